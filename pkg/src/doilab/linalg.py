"""
Dense Hermitian linear algebra shared by every other module.

The eigensolver is a cyclic Jacobi method with a round-robin pair ordering,
so each round applies ``n // 2`` disjoint rotations as vectorized column and
row updates. It is slower than LAPACK but deterministic and delivers
eigenvectors that are orthonormal to working precision, which is what the
double operator integral identities need.

Functions
---------
:func:`as_hermitian`
    Validate and symmetrize a square complex matrix.
:func:`eigh`
    Jacobi eigendecomposition returning an :class:`EigenSystem`.
:func:`func_calc`
    Functional calculus ``f(M) = U diag(f(lambda)) U^*``.
:func:`norms`
    Operator, trace and Hilbert-Schmidt norms.
:func:`indicator`
    Closed-interval indicator with tolerant endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

HERMITIAN_TOL = 1e-12
JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 64
CLUSTER_GAP = 1e-9
INDICATOR_TIE = 1e-12
PHASE_ZERO = 1e-10


class NotHermitianError(ValueError):
    """Raised when a matrix is not square or not self-adjoint."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class PoleError(ValueError):
    """Raised when a function is not finite at an eigenvalue."""

    def __init__(self, eigenvalue: float):
        super().__init__(f"function is not finite at eigenvalue {eigenvalue!r}")
        self.eigenvalue = eigenvalue


def hermitian_residual(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def as_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``m`` as an exactly Hermitian complex array.

    The residual ``max|m - m^*|`` is compared against ``tol * max(1, max|m|)``;
    inputs within tolerance are replaced by ``(m + m^*) / 2``.

    Raises
    ------
    NotHermitianError
        If ``m`` is not square or the residual exceeds the tolerance.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise NotHermitianError(f"expected a nonempty square matrix, got shape {m.shape}")
    res = hermitian_residual(m)
    bound = tol * max(1.0, float(np.max(np.abs(m))))
    if res > bound:
        raise NotHermitianError(
            f"matrix is not Hermitian: residual {res:.3e} exceeds {bound:.3e}", res)
    return 0.5 * (m + m.conj().T)


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues in ascending order and the unitary matrix of eigenvectors.

    This is the finite spectral measure: ``E(D)`` is the sum of ``u_j u_j^*``
    over the ``lambdas[j]`` lying in ``D``.
    """

    lambdas: np.ndarray
    u: np.ndarray

    @property
    def n(self) -> int:
        return self.lambdas.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.lambdas) @ self.u.conj().T

    def projection(self, mask) -> np.ndarray:
        """Spectral projection onto the eigenvectors selected by ``mask``."""
        mask = np.asarray(mask, dtype=bool)
        v = self.u[:, mask]
        return v @ v.conj().T


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # Circle-method tournament: every pair (p, q) appears once per sweep and
    # pairs within a round are disjoint.
    m = n + (n % 2)
    idx = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(idx[i], idx[m - 1 - i]) for i in range(m // 2)]
        pairs = sorted((min(p), max(p)) for p in pairs if max(p) < n)
        if pairs:
            rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        idx = [idx[0], idx[-1]] + idx[1:-1]
    return rounds


def _off_norm(w: np.ndarray) -> np.ndarray:
    # w has the batch axis last
    off = ~np.eye(w.shape[0], dtype=bool)
    return np.sqrt(np.sum(np.abs(w[off]) ** 2, axis=0))


def _jacobi(a: np.ndarray, tol: float, max_sweeps: int) -> tuple[np.ndarray, np.ndarray, int]:
    # a has shape (batch, n, n); every member gets the same rotation schedule.
    # Work with the batch axis last so row and column gathers are contiguous.
    batch, n, _ = a.shape
    w = np.ascontiguousarray(np.moveaxis(a, 0, -1))
    v = np.zeros(w.shape, dtype=complex)
    v[np.arange(n), np.arange(n)] = 1.0
    target = tol * np.linalg.norm(a, axis=(1, 2))
    schedule = _round_robin(n)
    sweeps = 0
    while sweeps < max_sweeps and np.any(_off_norm(w) > target):
        sweeps += 1
        for p, q in schedule:
            b = w[p, q]
            ab = np.abs(b)
            live = ab > 1e-300
            safe = np.where(live, ab, 1.0)
            phase = np.where(live, b / safe, 1.0)
            theta = np.where(live, (w[q, q].real - w[p, p].real) / (2.0 * safe), 0.0)
            t = np.where(live, np.where(theta >= 0, 1.0, -1.0)
                         / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            se = s * phase
            sce = s * np.conj(phase)
            # A <- J^* A J with J[p,p] = J[q,q] = c, J[p,q] = s e, J[q,p] = -s conj(e)
            cp, cq = w[:, p], w[:, q]
            w[:, p], w[:, q] = cp * c - cq * sce, cp * se + cq * c
            rp, rq = w[p], w[q]
            cr, ser, scer = c[:, None], se[:, None], sce[:, None]
            w[p], w[q] = cr * rp - ser * rq, scer * rp + cr * rq
            vp, vq = v[:, p], v[:, q]
            v[:, p], v[:, q] = vp * c - vq * sce, vp * se + vq * c
    lambdas = np.diagonal(w, axis1=0, axis2=1).real.copy()
    return lambdas, np.moveaxis(v, -1, 0), sweeps


def _orthonormalize_clusters(lambdas: np.ndarray, u: np.ndarray, gap: float) -> np.ndarray:
    u = u.copy()
    n = lambdas.shape[0]
    start = 0
    for stop in range(1, n + 1):
        if stop < n and lambdas[stop] - lambdas[stop - 1] < gap:
            continue
        if stop - start > 1:
            for j in range(start, stop):
                w = u[:, j]
                for k in range(start, j):
                    w = w - (u[:, k].conj() @ w) * u[:, k]
                u[:, j] = w / np.linalg.norm(w)
        start = stop
    return u


def _fix_phases(u: np.ndarray) -> np.ndarray:
    big = np.abs(u) > PHASE_ZERO
    first = np.argmax(big, axis=0)
    lead = u[first, np.arange(u.shape[1])]
    mag = np.abs(lead)
    rot = np.where(big.any(axis=0) & (mag > 0), np.conj(lead) / np.where(mag > 0, mag, 1.0), 1.0)
    return u * rot


def _finish(lambdas: np.ndarray, u: np.ndarray, cluster_gap: float) -> EigenSystem:
    order = np.argsort(lambdas, kind="stable")
    lambdas = lambdas[order]
    u = u[:, order]
    spread = float(np.max(np.abs(lambdas)))
    if spread > 0:
        u = _orthonormalize_clusters(lambdas, u, cluster_gap * spread)
    u = _fix_phases(u)
    lambdas.setflags(write=False)
    u.setflags(write=False)
    return EigenSystem(lambdas, u)


def eigh(m, *, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS,
         cluster_gap: float = CLUSTER_GAP, hermitian_tol: float = HERMITIAN_TOL) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius mass is at most
    ``tol * ||m||_F`` or after ``max_sweeps``. Eigenvalues are sorted
    ascending. Eigenvectors of eigenvalues closer than
    ``cluster_gap * ||m||`` are re-orthonormalized by modified Gram-Schmidt in
    index order, and every eigenvector is rotated so that its first component
    of modulus above 1e-10 is real and positive.

    Parameters
    ----------
    m : array_like, shape (n, n)
        Hermitian matrix.

    Returns
    -------
    EigenSystem
    """
    a = as_hermitian(m, hermitian_tol)
    lambdas, u, _ = _jacobi(a[None], tol, max_sweeps)
    return _finish(lambdas[0], u[0], cluster_gap)


def eigh_batch(ms, *, basis=None, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS,
               cluster_gap: float = CLUSTER_GAP, hermitian_tol: float = HERMITIAN_TOL,
               chunk: int = 128) -> list[EigenSystem]:
    """:func:`eigh` applied to a stack of matrices, rotating all members together.

    Results follow the conventions of :func:`eigh`. Members that converge
    early keep rotating until the whole chunk has converged, which only
    shrinks their off-diagonal mass further.

    ``basis`` is an optional stack of unitaries used as a warm start: member
    ``k`` is diagonalized in the basis ``basis[k]``, which costs few sweeps
    when that basis nearly diagonalizes it.
    """
    ms = np.asarray(ms, dtype=complex)
    if ms.ndim != 3 or ms.shape[1] != ms.shape[2]:
        raise ValueError("expected a stack of square matrices")
    res = np.max(np.abs(ms - np.conj(np.swapaxes(ms, 1, 2))), axis=(1, 2))
    bound = hermitian_tol * np.maximum(1.0, np.max(np.abs(ms), axis=(1, 2)))
    if np.any(res > bound):
        k = int(np.argmax(res > bound))
        raise NotHermitianError(f"member {k} is not Hermitian: residual {res[k]:.3e}", float(res[k]))
    ms = 0.5 * (ms + np.conj(np.swapaxes(ms, 1, 2)))
    if basis is not None:
        basis = np.asarray(basis, dtype=complex)
        ms = np.conj(np.swapaxes(basis, 1, 2)) @ ms @ basis
        ms = 0.5 * (ms + np.conj(np.swapaxes(ms, 1, 2)))
    out: list[EigenSystem] = []
    for lo in range(0, ms.shape[0], chunk):
        lambdas, u, _ = _jacobi(ms[lo:lo + chunk], tol, max_sweeps)
        if basis is not None:
            u = basis[lo:lo + chunk] @ u
        out.extend(_finish(lambdas[k], u[k], cluster_gap) for k in range(u.shape[0]))
    return out


def _evaluate(f, x: np.ndarray) -> np.ndarray:
    fn = getattr(f, "eval", f)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals = np.asarray(fn(x), dtype=complex)
    if vals.shape != x.shape:
        vals = np.broadcast_to(vals, x.shape).astype(complex)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise PoleError(float(x[bad[0]]))
    return vals


def func_calc(f: Callable, E: EigenSystem) -> np.ndarray:
    """Return ``f(M) = u diag(f(lambdas)) u^*``.

    ``f`` is either a :class:`doilab.symbols.ScalarFunction` or a vectorized
    callable mapping real arrays to complex arrays.

    Raises
    ------
    PoleError
        If ``f`` is not finite at some eigenvalue.
    """
    vals = _evaluate(f, E.lambdas)
    return (E.u * vals) @ E.u.conj().T


class Norms(NamedTuple):
    op: float
    trace: float
    hs: float


def norms(q) -> Norms:
    """Operator, trace (S_1) and Hilbert-Schmidt (S_2) norms from singular values."""
    q = np.asarray(q, dtype=complex)
    if q.size == 0:
        return Norms(0.0, 0.0, 0.0)
    s = np.linalg.svd(q, compute_uv=False)
    return Norms(float(s[0]), float(np.sum(s)), float(np.sqrt(np.sum(s * s))))


def op_norm(q) -> float:
    return norms(q).op


def trace_norm(q) -> float:
    return norms(q).trace


def scale(*mats) -> float:
    """``1 + sum of Frobenius norms``, the reference magnitude for residuals."""
    return 1.0 + sum(float(np.linalg.norm(np.asarray(m))) for m in mats)


def indicator(a: float, b: float, tie: float = INDICATOR_TIE) -> Callable[[np.ndarray], np.ndarray]:
    """Indicator of the closed interval ``[a, b]``.

    Points within ``tie * max(1, |endpoint|)`` of an endpoint count as inside.
    """
    lo = a - tie * max(1.0, abs(a))
    hi = b + tie * max(1.0, abs(b))

    def chi(x):
        x = np.asarray(x, dtype=float)
        return ((x >= lo) & (x <= hi)).astype(float)

    return chi


def resolvent(E: EigenSystem, z: complex = 1j) -> np.ndarray:
    """``(M + z I)^{-1}`` through the spectral decomposition."""
    return func_calc(lambda x: 1.0 / (x + z), E)
