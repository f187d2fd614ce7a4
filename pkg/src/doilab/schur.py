"""
Two-sided bounds on the Schur multiplier norm of a sampled symbol.

For an ``m x n`` matrix ``M`` the multiplier norm

    ||M||_m = sup { ||M o Q|| : ||Q|| <= 1 }

equals the least ``c`` such that ``M[i, j] = <x_i, y_j>`` with
``max ||x_i|| * max ||y_j|| <= c`` (a Haagerup factorization). Lower bounds
come from probe matrices ``Q``; upper bounds come with an explicit
factorization, the :class:`HaagerupCertificate`.

Two upper-bound solvers are provided.

``method="scaling"`` (default)
    Maximizes ``g(u, v) = ||D_u M D_v||_{S_1}`` over unit vectors ``u, v >= 0``.
    ``g`` is concave in ``(u^2, v^2)``, every iterate is a rigorous lower
    bound (``u v^T`` is a unit trace-class probe) and the SVD
    ``D_u M D_v = W S Z^*`` gives the factorization
    ``x_i = (W S^{1/2})_i / u_i``, ``y_j = (Z S^{1/2})_j / v_j``, whose
    bound meets ``g`` at a stationary point. The update is the fixed point
    ``u_i^2 <- (W S W^*)_{ii} / g``.

``method="projection"``
    Bisection on ``c`` with Dykstra alternating projections between the
    positive semidefinite cone and the set of Hermitian ``(m+n)``-square
    matrices with off-diagonal block ``M`` and diagonal at most ``c``.

Both finish with :func:`repair`, which absorbs the residual ``M - X Y^*`` into
extra coordinates so the certificate reproduces ``M`` exactly; the bound
grows by at most the largest row norm of the residual.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .doi import symbol_matrix

LOGGER = logging.getLogger(__name__)

ITERATION_CAP = 50_000
SCALING_FLOOR = 1e-12
STALL_LIMIT = 500  # iterations without improving the upper bound


@dataclass(frozen=True)
class SymbolMatrix:
    entries: np.ndarray
    x_grid: np.ndarray
    y_grid: np.ndarray

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    def __mul__(self, other: "SymbolMatrix") -> "SymbolMatrix":
        # Schur (entrywise) product on the same grids
        return SymbolMatrix(self.entries * other.entries, self.x_grid, self.y_grid)

    def __rmul__(self, alpha) -> "SymbolMatrix":
        return SymbolMatrix(complex(alpha) * self.entries, self.x_grid, self.y_grid)

    def submatrix(self, rows, cols) -> "SymbolMatrix":
        rows, cols = np.asarray(rows), np.asarray(cols)
        return SymbolMatrix(self.entries[np.ix_(rows, cols)], self.x_grid[rows], self.y_grid[cols])


def as_symbol_matrix(M) -> SymbolMatrix:
    if isinstance(M, SymbolMatrix):
        return M
    E = np.atleast_2d(np.asarray(M, dtype=complex))
    if not np.all(np.isfinite(E)):
        raise ValueError("symbol matrix entries must be finite")
    return SymbolMatrix(E, np.arange(E.shape[0], dtype=float), np.arange(E.shape[1], dtype=float))


def sample_symbol(phi, x_grid, y_grid) -> SymbolMatrix:
    """``entries[i, j] = phi(x_grid[i], y_grid[j])``."""
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    ys = np.atleast_1d(np.asarray(y_grid, dtype=float))
    if xs.size == 0 or ys.size == 0:
        raise ValueError("grids must be nonempty")
    return SymbolMatrix(symbol_matrix(phi, xs, ys), xs, ys)


@dataclass(frozen=True)
class HaagerupCertificate:
    """Factorization ``M = X Y^*``: row ``i`` of ``x_vectors`` is ``x_i``.

    ``bound`` is ``max ||x_i|| * max ||y_j||``, an upper bound on the
    multiplier norm; ``dual_bound`` is a lower bound found along the way.
    """

    x_vectors: np.ndarray
    y_vectors: np.ndarray
    bound: float
    dual_bound: float = 0.0
    converged: bool = True
    iterations: int = 0

    def product(self) -> np.ndarray:
        return self.x_vectors @ self.y_vectors.conj().T

    def residual(self, M) -> float:
        """Worst entry error relative to ``1 + |M[i, j]|``."""
        E = as_symbol_matrix(M).entries
        return float(np.max(np.abs(self.product() - E) / (1.0 + np.abs(E))))

    def reproduces(self, M, rtol: float = 1e-7) -> bool:
        return self.residual(M) <= rtol

    def factor_bound(self) -> float:
        return _factor_bound(self.x_vectors, self.y_vectors)


def _factor_bound(X: np.ndarray, Y: np.ndarray) -> float:
    a = float(np.max(np.sum(np.abs(X) ** 2, axis=1))) if X.size else 0.0
    b = float(np.max(np.sum(np.abs(Y) ** 2, axis=1))) if Y.size else 0.0
    return float(np.sqrt(a * b))


def _balance(X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = float(np.max(np.sum(np.abs(X) ** 2, axis=1)))
    b = float(np.max(np.sum(np.abs(Y) ** 2, axis=1)))
    if a > 0 and b > 0:
        r = (b / a) ** 0.25
        return X * r, Y / r
    return X, Y


def repair(M: np.ndarray, X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Extend ``(X, Y)`` so that ``X Y^*`` equals ``M`` exactly.

    The residual ``E = M - X Y^*`` is appended as ``[X, t E]`` and
    ``[Y, I / t]`` with ``t`` chosen so the bound grows by at most
    ``max_i ||E_i||``.
    """
    E = M - X @ Y.conj().T
    rho = float(np.max(np.linalg.norm(E, axis=1)))
    if rho == 0.0:
        return _balance(X, Y)
    a = float(np.max(np.sum(np.abs(X) ** 2, axis=1)))
    b = float(np.max(np.sum(np.abs(Y) ** 2, axis=1)))
    if a == 0.0 or b == 0.0:
        a = b = rho
    t = np.sqrt(np.sqrt(a / b) / rho)
    n = M.shape[1]
    X2 = np.hstack([X, t * E])
    Y2 = np.hstack([Y, np.eye(n, dtype=complex) / t])
    return _balance(X2, Y2)


def _certificate(M, X, Y, dual, converged, iterations) -> HaagerupCertificate:
    X, Y = repair(M, X, Y)
    return HaagerupCertificate(X, Y, _factor_bound(X, Y), dual, converged, iterations)


def row_certificate(M) -> HaagerupCertificate:
    """The always-feasible factorization ``x_i = row_i``, ``y_j = e_j``."""
    E = as_symbol_matrix(M).entries
    X = E.copy()
    Y = np.eye(E.shape[1], dtype=complex)
    return HaagerupCertificate(X, Y, _factor_bound(X, Y), float(np.max(np.abs(E))), True, 0)


# --------------------------------------------------------------------------
# Lower bounds
# --------------------------------------------------------------------------

def _hadamard(k: int) -> Optional[np.ndarray]:
    if k < 1 or k & (k - 1):
        return None
    H = np.ones((1, 1))
    while H.shape[0] < k:
        H = np.block([[H, H], [H, -H]])
    return H


def structured_probes(m: int, n: int, entries: Optional[np.ndarray] = None) -> list[np.ndarray]:
    """All-ones, identity-shaped, Hilbert-Toeplitz and (square) sign/Hadamard probes."""
    i = np.arange(m)[:, None]
    j = np.arange(n)[None, :]
    probes = [np.ones((m, n)), np.eye(m, n), 1.0 / (i - j + 0.5)]
    if m == n:
        H = _hadamard(n)
        if H is not None:
            probes.append(H)
        if entries is not None:
            mag = np.abs(entries)
            probes.append(np.where(mag > 0, np.conj(entries) / np.where(mag > 0, mag, 1.0), 0.0))
    return probes


def _ratio(E: np.ndarray, Q: np.ndarray) -> float:
    qn = np.linalg.norm(Q, 2)
    return 0.0 if qn == 0 else float(np.linalg.norm(E * Q, 2) / qn)


def norm_lower(M, probes: int = 16, seed: int = 0) -> float:
    """Largest ``||M o Q|| / ||Q||`` over the probe set.

    The probes are every elementary matrix ``e_i e_j^*`` (giving
    ``max |M[i, j]|``), :func:`structured_probes`, and ``probes`` seeded
    complex Gaussian and rank-one Gaussian matrices each.
    """
    if probes < 1:
        raise ValueError("probes must be at least 1")
    E = as_symbol_matrix(M).entries
    m, n = E.shape
    best = float(np.max(np.abs(E)))
    for Q in structured_probes(m, n, E):
        best = max(best, _ratio(E, Q))
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        G = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        best = max(best, _ratio(E, G))
        x = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        best = max(best, _ratio(E, np.outer(x, y.conj())))
    return best


# --------------------------------------------------------------------------
# Upper bounds
# --------------------------------------------------------------------------

def _scaling(E: np.ndarray, tol: float, max_iter: int) -> HaagerupCertificate:
    m, n = E.shape
    u = np.full(m, 1.0 / np.sqrt(m))
    v = np.full(n, 1.0 / np.sqrt(n))
    lo = float(np.max(np.abs(E)))
    best = None
    best_hi = np.inf
    stalled = 0
    k = 0
    for k in range(1, max_iter + 1):
        W, s, Zh = np.linalg.svd(u[:, None] * E * v[None, :], full_matrices=False)
        g = float(np.sum(s))
        lo = max(lo, g)
        root = np.sqrt(s)
        Ws = W * root
        Zs = Zh.conj().T * root
        X = Ws / u[:, None]
        Y = Zs / v[:, None]
        # rounding in X Y^* is amplified where u or v is small; repair adds it back
        rho = float(np.max(np.linalg.norm(E - X @ Y.conj().T, axis=1)))
        hi = _factor_bound(X, Y) + rho
        if hi < best_hi - 1e-3 * tol:
            stalled = 0
        else:
            stalled += 1
        if hi < best_hi:
            best_hi, best = hi, (X, Y)
        if best_hi - lo <= tol or stalled >= STALL_LIMIT:
            break
        a = np.sum(np.abs(Ws) ** 2, axis=1) / g
        b = np.sum(np.abs(Zs) ** 2, axis=1) / g
        u = np.sqrt(np.maximum(a, SCALING_FLOOR))
        u /= np.linalg.norm(u)
        v = np.sqrt(np.maximum(b, SCALING_FLOOR))
        v /= np.linalg.norm(v)
    cert = _certificate(E, best[0], best[1], lo, False, k)
    return HaagerupCertificate(cert.x_vectors, cert.y_vectors, cert.bound, lo,
                               cert.bound - lo <= tol * 1.01 + 1e-15, k)


def _psd_part(Z: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (Z + Z.conj().T))
    w = np.clip(w, 0.0, None)
    return (V * w) @ V.conj().T


def _affine_part(Z: np.ndarray, E: np.ndarray, c: float) -> np.ndarray:
    m, n = E.shape
    P = 0.5 * (Z + Z.conj().T)
    P[:m, m:] = E
    P[m:, :m] = E.conj().T
    d = np.real(np.diag(P)).copy()
    np.fill_diagonal(P, np.minimum(d, c))
    return P


def _dykstra(E: np.ndarray, c: float, Z0: np.ndarray, max_iter: int, feas_tol: float):
    Z = Z0.copy()
    p = np.zeros_like(Z)
    q = np.zeros_like(Z)
    it = 0
    for it in range(1, max_iter + 1):
        Y = _psd_part(Z + p)
        p = Z + p - Y
        Znew = _affine_part(Y + q, E, c)
        q = Y + q - Znew
        Z = Znew
        if np.linalg.norm(Z - Y) <= feas_tol:
            break
    return Y, it


def _projection(E: np.ndarray, tol: float, max_iter: int, lower: float, feas_tol: float,
                inner_cap: int) -> HaagerupCertificate:
    m, n = E.shape
    start = row_certificate(E)
    best = start
    lo, hi = lower, start.bound
    total = 0
    Z = np.zeros((m + n, m + n), dtype=complex)
    Z[:m, m:] = E
    Z[m:, :m] = E.conj().T
    np.fill_diagonal(Z, hi)
    depth = int(np.ceil(np.log2(max(hi - lo, tol) / tol))) if hi > lo else 0
    for _ in range(depth):
        if hi - lo <= tol or total >= max_iter:
            break
        c = 0.5 * (lo + hi)
        Y, it = _dykstra(E, c, Z, min(inner_cap, max_iter - total), feas_tol)
        total += it
        w, V = np.linalg.eigh(0.5 * (Y + Y.conj().T))
        F = V * np.sqrt(np.clip(w, 0.0, None))
        cert = _certificate(E, F[:m], F[m:], lower, True, total)
        if cert.bound <= c + tol:
            Z = Y
            if cert.bound < best.bound:
                best = cert
            hi = min(c, best.bound)
        else:
            lo = c
    converged = best.bound - lower <= tol
    return HaagerupCertificate(best.x_vectors, best.y_vectors, best.bound, lower, converged, total)


def norm_upper(M, tol: float = 1e-9, *, method: str = "scaling", max_iter: int = ITERATION_CAP,
               lower: Optional[float] = None, feas_tol: float = 1e-10,
               inner_cap: int = 2_000) -> HaagerupCertificate:
    """Certified upper bound on the multiplier norm.

    Parameters
    ----------
    M : SymbolMatrix or array_like
    tol : float
        Target gap between the certified bound and the best lower bound.
    method : {"scaling", "projection"}
        See the module docstring.
    max_iter : int
        Iteration cap; on exhaustion the best certificate is returned with
        ``converged=False``.
    lower : float, optional
        Starting lower bound for the bisection (``projection`` only);
        defaults to :func:`norm_lower`.

    Returns
    -------
    HaagerupCertificate
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    E = as_symbol_matrix(M).entries
    if not np.any(E):
        m, n = E.shape
        return HaagerupCertificate(np.zeros((m, 1), complex), np.zeros((n, 1), complex), 0.0, 0.0)
    if method == "scaling":
        cert = _scaling(E, tol, max_iter)
    elif method == "projection":
        lo = norm_lower(E) if lower is None else lower
        cert = _projection(E, tol, max_iter, lo, feas_tol, inner_cap)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not cert.converged:
        LOGGER.warning("norm_upper(%s): gap %.3e above tol after %d iterations",
                       method, cert.bound - cert.dual_bound, cert.iterations)
    return cert


class MultiplierBounds(NamedTuple):
    lo: float
    hi: float

    @property
    def gap(self) -> float:
        return self.hi - self.lo


def multiplier_norm(M, tol: float = 1e-9, probes: int = 16, seed: int = 0) -> MultiplierBounds:
    """``(lo, hi)`` with ``lo <= ||M||_m <= hi``.

    ``lo`` is the larger of the probe bound and the solver's dual bound;
    ``hi`` is the certificate bound.
    """
    lo = norm_lower(M, probes, seed)
    cert = norm_upper(M, tol)
    lo = max(lo, cert.dual_bound)
    return MultiplierBounds(min(lo, cert.bound), cert.bound)
