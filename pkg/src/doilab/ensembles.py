"""Seeded random matrix families used by the tests, the acceptance run and ``gen``."""
from __future__ import annotations

from typing import Iterator, NamedTuple

import numpy as np

FAMILIES = ("gaussian", "dominant", "clustered")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def gaussian_hermitian(n: int, seed=0, radius: float = 2.0) -> np.ndarray:
    """Unitary-invariant Gaussian Hermitian matrix, spectrum roughly in ``[-radius, radius]``."""
    rng = _rng(seed)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return radius * (g + g.conj().T) / (2.0 * np.sqrt(2.0 * n))


def diagonal_dominant(n: int, seed=0, spread: float = 5.0, coupling: float = 0.1) -> np.ndarray:
    """Well separated diagonal plus a small Hermitian coupling."""
    rng = _rng(seed)
    d = np.sort(rng.uniform(-spread, spread, n))
    return np.diag(d).astype(complex) + coupling * gaussian_hermitian(n, rng)


def clustered_spectrum(n: int, seed=0, clusters: int = 3, width: float = 1e-3) -> np.ndarray:
    """``Q diag(lambda) Q^*`` with eigenvalues in a few tight clusters."""
    rng = _rng(seed)
    centers = np.linspace(-2.0, 2.0, clusters)
    lam = centers[rng.integers(0, clusters, n)] + width * rng.standard_normal(n)
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    m = (q * lam) @ q.conj().T
    return 0.5 * (m + m.conj().T)


def general_matrix(rows: int, cols: int, seed=0) -> np.ndarray:
    rng = _rng(seed)
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)


def hermitian(n: int, seed=0, family: str = "gaussian") -> np.ndarray:
    if family == "gaussian":
        return gaussian_hermitian(n, seed)
    if family == "dominant":
        return diagonal_dominant(n, seed)
    if family == "clustered":
        return clustered_spectrum(n, seed)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


class Pair(NamedTuple):
    seed: int
    family: str
    a: np.ndarray
    k: np.ndarray

    @property
    def b(self) -> np.ndarray:
        return self.a + self.k


def make_pair(n: int, seed: int, family: str = "gaussian", k_size: float = 0.5) -> Pair:
    """``A`` from ``family`` and a Gaussian perturbation ``K`` of spectral size about ``k_size``."""
    rng = np.random.default_rng(seed)
    a = hermitian(n, rng, family)
    k = gaussian_hermitian(n, rng, radius=k_size)
    return Pair(seed, family, a, k)


def pair_corpus(count: int, sizes=(2, 4, 8, 16, 32, 64), seed: int = 0,
                families=FAMILIES) -> Iterator[Pair]:
    """``count`` pairs cycling through ``sizes`` and ``families``."""
    for k in range(count):
        yield make_pair(sizes[k % len(sizes)], seed + k, families[(k // len(sizes)) % len(families)])
