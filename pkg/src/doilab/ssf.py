"""
Spectral shift functions of finite Hermitian pairs.

Two routes to ``xi`` for ``B = A + K``:

* :func:`ssf_oracle`, the difference of eigenvalue counting functions, which
  satisfies ``trace(f(B) - f(A)) = int f' xi`` exactly;
* :func:`eigen_flow` followed by :func:`ssf_from_flow`, which builds the
  complex measure ``nu = int_0^1 nu_t dt`` with
  ``nu_t(D) = trace(E_{A_t}(D) K (A_t + iI)^{-1})`` along ``A_t = A + tK``
  and takes ``xi_hat(s) = Re((s + i) dnu/ds)`` with a histogram density.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from .doi import doi
from .linalg import EigenSystem, as_hermitian, eigh, eigh_batch, func_calc, op_norm
from .symbols import ScalarFunction, Symbol

LOGGER = logging.getLogger(__name__)

TIE_OVERLAP = 1e-6
LIPSCHITZ_SLACK = 1e-8
WARM_STRIDE = 16


def _log_weight_primitive(t):
    # antiderivative of 1 / (1 + |t|)
    t = np.asarray(t, dtype=float)
    return np.sign(t) * np.log1p(np.abs(t))


@dataclass(frozen=True)
class StepFunction:
    """Piecewise constant function, ``values[k]`` on ``[breakpoints[k], breakpoints[k+1])``.

    Zero outside ``[breakpoints[0], breakpoints[-1])``.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or v.ndim != 1 or (b.size and v.size != b.size - 1):
            raise ValueError("need len(values) == len(breakpoints) - 1")
        if np.any(np.diff(b) < 0):
            raise ValueError("breakpoints must be ascending")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.values.size == 0:
            return np.zeros(t.shape)
        k = np.searchsorted(self.breakpoints, t, side="right") - 1
        inside = (k >= 0) & (k < self.values.size)
        return np.where(inside, self.values[np.clip(k, 0, self.values.size - 1)], 0.0)

    def integrate_derivative(self, f: Callable) -> complex:
        """``int f'(t) xi(t) dt`` by telescoping over the intervals."""
        if self.values.size == 0:
            return 0j
        fb = np.asarray(f(self.breakpoints), dtype=complex)
        return complex(np.sum(self.values * (fb[1:] - fb[:-1])))

    def weighted_l1(self) -> float:
        """``int |xi(t)| / (1 + |t|) dt``, exact."""
        if self.values.size == 0:
            return 0.0
        g = _log_weight_primitive(self.breakpoints)
        return float(np.sum(np.abs(self.values) * np.diff(g)))

    def support(self) -> Optional[tuple[float, float]]:
        nz = np.flatnonzero(self.values)
        if nz.size == 0:
            return None
        return float(self.breakpoints[nz[0]]), float(self.breakpoints[nz[-1] + 1])


def ssf_oracle(A, B) -> StepFunction:
    """``xi(t) = #{eig(A) <= t} - #{eig(B) <= t}``."""
    la = eigh(A).lambdas
    lb = eigh(B).lambdas
    if la.size != lb.size:
        raise ValueError("A and B must have the same dimension")
    points = np.unique(np.concatenate([la, lb]))
    counts_a = np.searchsorted(la, points, side="right")
    counts_b = np.searchsorted(lb, points, side="right")
    vals = (counts_a - counts_b)[:-1].astype(float)
    return StepFunction(points, vals)


# --------------------------------------------------------------------------
# Eigenvalue flow
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenFlow:
    """Matched eigen-trajectories of ``A + tK`` on a midpoint grid of ``[0, 1]``.

    ``lambda_paths[k, j]`` and ``weights[k, j]`` belong to trajectory ``j``
    at ``t_grid[k]``; ``weights`` is ``<K u_j(t), u_j(t)>``, the
    Hellmann-Feynman velocity of the trajectory. ``flagged`` lists the grid
    indices where matching was ambiguous or fell back to sorted order.
    """

    t_grid: np.ndarray
    dt: float
    lambda_paths: np.ndarray
    weights: np.ndarray
    spectrum_a: np.ndarray
    spectrum_b: np.ndarray
    k_norm: float
    trace_k: float
    flagged: tuple = field(default=())

    @property
    def steps(self) -> int:
        return self.t_grid.size

    @property
    def n(self) -> int:
        return self.lambda_paths.shape[1]

    def lipschitz_excess(self) -> float:
        """Largest ``|lambda_j(t_{k+1}) - lambda_j(t_k)| - ||K|| dt`` (<= 1e-8 when valid)."""
        if self.steps < 2:
            return -np.inf
        jumps = np.abs(np.diff(self.lambda_paths, axis=0))
        return float(np.max(jumps) - self.k_norm * self.dt)

    def weight_sum_error(self) -> float:
        return float(np.max(np.abs(self.weights.sum(axis=1) - self.trace_k)))


def _match(prev_u: np.ndarray, prev_l: np.ndarray, u: np.ndarray, lam: np.ndarray):
    """Greedy assignment of new eigenpairs to previous trajectories.

    Returns ``perm`` with ``perm[j]`` the new index continuing trajectory
    ``j``, and whether a near tie was broken by eigenvalue proximity.
    """
    n = lam.size
    overlap = np.abs(prev_u.conj().T @ u)
    # Fast path: a row-wise maximum that also dominates its column by more than
    # the tie margin is exactly what the greedy pass would pick.
    cols = np.argmax(overlap, axis=1)
    if np.unique(cols).size == n:
        best = overlap[np.arange(n), cols]
        rest = overlap.copy()
        rest[np.arange(n), cols] = -1.0
        if np.all(rest.max(axis=1) < best - TIE_OVERLAP) and np.all(rest[:, cols].max(axis=0) < best - TIE_OVERLAP):
            return cols, False
    perm = np.full(n, -1)
    free_rows = np.ones(n, bool)
    free_cols = np.ones(n, bool)
    tie = False
    for _ in range(n):
        sub = np.where(free_rows[:, None] & free_cols[None, :], overlap, -1.0)
        r, c = np.unravel_index(int(np.argmax(sub)), sub.shape)
        best = sub[r, c]
        # competitors: other free pairs sharing the row or the column
        rows = np.flatnonzero(sub[:, c] >= best - TIE_OVERLAP)
        cols = np.flatnonzero(sub[r, :] >= best - TIE_OVERLAP)
        if rows.size > 1 or cols.size > 1:
            tie = True
            cand = [(int(i), int(c)) for i in rows] + [(int(r), int(j)) for j in cols]
            r, c = min(cand, key=lambda rc: abs(prev_l[rc[0]] - lam[rc[1]]))
        perm[r] = c
        free_rows[r] = False
        free_cols[c] = False
    return perm, tie


def eigen_flow(A, K, steps: int) -> EigenFlow:
    """Eigen-decompose ``A + tK`` at ``t_k = (k + 1/2) / steps`` and match trajectories.

    Matching is greedy on eigenvector overlaps, ties within 1e-6 being broken
    by eigenvalue proximity. If a matched step would violate the Lipschitz
    bound ``||K|| dt`` the sorted order is used instead; both events are
    recorded in ``flagged``.
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    A = as_hermitian(A)
    K = as_hermitian(K)
    if A.shape != K.shape:
        raise ValueError("A and K must have the same dimension")
    n = A.shape[0]
    dt = 1.0 / steps
    ts = (np.arange(steps) + 0.5) * dt
    stack = A[None] + ts[:, None, None] * K[None]
    anchors = eigh_batch(stack[::WARM_STRIDE])
    basis = np.repeat(np.stack([e.u for e in anchors]), WARM_STRIDE, axis=0)[:steps]
    systems = eigh_batch(stack, basis=basis)
    lam = np.stack([e.lambdas for e in systems])
    us = np.stack([e.u for e in systems])
    k_norm = op_norm(K)
    paths = np.empty((steps, n))
    order = np.arange(n)
    orders = np.empty((steps, n), dtype=int)
    flagged = []
    for k in range(steps):
        if k > 0:
            perm, tie = _match(us[k - 1][:, order], paths[k - 1], us[k], lam[k])
            if np.max(np.abs(lam[k][perm] - paths[k - 1])) > k_norm * dt + LIPSCHITZ_SLACK:
                perm = np.argsort(np.argsort(paths[k - 1], kind="stable"), kind="stable")
                flagged.append(k)
            elif tie:
                flagged.append(k)
            order = perm
        paths[k] = lam[k][order]
        orders[k] = order
    u = np.take_along_axis(us, orders[:, None, :], axis=2)
    weights = np.real(np.einsum("tij,ik,tkj->tj", u.conj(), K, u))
    if flagged:
        LOGGER.info("eigen_flow: %d ambiguous or reordered steps", len(flagged))
    return EigenFlow(ts, dt, paths, weights, eigh(A).lambdas, eigh(A + K).lambdas,
                     k_norm, float(np.real(np.trace(K))), tuple(flagged))


# --------------------------------------------------------------------------
# nu-construction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralShiftProfile:
    """Histogram estimate of ``xi`` on the bins ``[s_grid[k], s_grid[k+1])``.

    ``nu_density`` is the complex density of ``nu``, ``density`` is
    ``Re((s_c + i) nu_density)`` at bin centers ``s_c`` and ``imag_density``
    is the discarded imaginary part.
    """

    s_grid: np.ndarray
    density: np.ndarray
    nu_density: np.ndarray
    imag_density: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.s_grid[1:] + self.s_grid[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.s_grid)

    def as_step_function(self) -> StepFunction:
        return StepFunction(self.s_grid, self.density)

    def weighted_l1(self) -> float:
        return self.as_step_function().weighted_l1()

    def imag_weighted_l1(self) -> float:
        return StepFunction(self.s_grid, self.imag_density).weighted_l1()

    def integrate_derivative(self, f: ScalarFunction) -> complex:
        """Midpoint rule ``sum_k f'(s_k) xi_k h_k``."""
        return complex(np.sum(f.derivative(self.centers) * self.density * self.widths))


def _bin_edges(flow: EigenFlow, bins: int) -> np.ndarray:
    pts = np.concatenate([flow.spectrum_a, flow.spectrum_b, flow.lambda_paths.ravel()])
    lo, hi = float(pts.min()), float(pts.max())
    span = hi - lo
    h = span / (bins - 2) if span > 0 else 1.0 / bins
    return lo - h + h * np.arange(bins + 1)


def ssf_from_flow(flow: EigenFlow, bins: int, deposit: str = "segment") -> SpectralShiftProfile:
    """Accumulate ``nu`` into ``bins`` equal bins and return ``xi_hat``.

    Each trajectory ``j`` and grid time ``t_k`` contributes the complex mass
    ``w_j(t_k) dt / (lambda_j(t_k) + i)``. With ``deposit="point"`` the mass
    goes to the bin containing ``lambda_j(t_k)``; with ``deposit="segment"``
    it is spread uniformly over ``lambda_j(t_k) +- |w_j(t_k)| dt / 2``, the
    stretch the trajectory covers during the step.

    The bins span the spectra of ``A`` and ``A + K`` (and every trajectory
    point) padded by one bin on each side.
    """
    if bins < 3:
        raise ValueError("bins must be at least 3")
    if deposit not in ("point", "segment"):
        raise ValueError(f"unknown deposit {deposit!r}")
    edges = _bin_edges(flow, bins)
    h = edges[1] - edges[0]
    lam = flow.lambda_paths.T.ravel()  # trajectory-major for a fixed summation order
    w = flow.weights.T.ravel()
    mass = w * flow.dt / (lam + 1j)
    acc = np.zeros(bins, dtype=complex)
    if deposit == "point":
        idx = np.clip(np.floor((lam - edges[0]) / h).astype(int), 0, bins - 1)
        np.add.at(acc, idx, mass)
    else:
        half = 0.5 * np.abs(w) * flow.dt
        a, b = lam - half, lam + half
        width = b - a
        point = width <= 1e-15 * (1.0 + np.abs(lam))
        idx = np.clip(np.floor((lam - edges[0]) / h).astype(int), 0, bins - 1)
        np.add.at(acc, idx[point], mass[point])
        seg = ~point
        a, b, width, m = a[seg], b[seg], width[seg], mass[seg]
        first = np.clip(np.floor((a - edges[0]) / h).astype(int), 0, bins - 1)
        last = np.clip(np.floor((b - edges[0]) / h).astype(int), 0, bins - 1)
        for off in range(int(np.max(last - first, initial=0)) + 1):
            k = first + off
            ok = k <= last
            kk = k[ok]
            cover = np.minimum(b[ok], edges[kk + 1]) - np.maximum(a[ok], edges[kk])
            np.add.at(acc, kk, m[ok] * np.clip(cover, 0.0, None) / width[ok])
    nu = acc / h
    centers = 0.5 * (edges[1:] + edges[:-1])
    lifted = (centers + 1j) * nu
    return SpectralShiftProfile(edges, lifted.real.copy(), nu, lifted.imag.copy())


def weighted_l1_distance(xi: Union[StepFunction, SpectralShiftProfile],
                         other: Union[StepFunction, SpectralShiftProfile]) -> float:
    """``int |xi - other| / (1 + |t|) dt`` for piecewise constant arguments, exact."""
    f = xi.as_step_function() if isinstance(xi, SpectralShiftProfile) else xi
    g = other.as_step_function() if isinstance(other, SpectralShiftProfile) else other
    pts = np.unique(np.concatenate([f.breakpoints, g.breakpoints]))
    if pts.size < 2:
        return 0.0
    mids = 0.5 * (pts[1:] + pts[:-1])
    diff = np.abs(f(mids) - g(mids))
    return float(np.sum(diff * np.diff(_log_weight_primitive(pts))))


# --------------------------------------------------------------------------
# Trace identities
# --------------------------------------------------------------------------

class TraceCheck(NamedTuple):
    lhs: complex
    rhs: complex
    abs_error: float


def trace_formula_check(f: ScalarFunction, A, K, xi: Union[StepFunction, SpectralShiftProfile]) -> TraceCheck:
    """Compare ``trace(f(A + K) - f(A))`` with ``int f' xi``.

    A :class:`StepFunction` is integrated exactly by telescoping, a
    :class:`SpectralShiftProfile` by the midpoint rule per bin.
    """
    A = as_hermitian(A)
    K = as_hermitian(K)
    if A.shape != K.shape:
        raise ValueError("A and K must have the same dimension")
    lhs = complex(np.trace(func_calc(f, eigh(A + K)) - func_calc(f, eigh(A))))
    rhs = xi.integrate_derivative(f)
    return TraceCheck(lhs, rhs, abs(lhs - rhs))


def diag_trace_identity(phi: Symbol, E: EigenSystem, T) -> TraceCheck:
    """``trace doi(phi, E, E, T)`` against ``sum_j phi(l_j, l_j) <T u_j, u_j>``."""
    T = np.asarray(T, dtype=complex)
    if T.shape != (E.n, E.n):
        raise ValueError(f"T has shape {T.shape}, expected {(E.n, E.n)}")
    lhs = complex(np.trace(doi(phi, E, E, T)))
    mu = np.einsum("ij,ik,kj->j", E.u.conj(), T, E.u)
    diag = np.asarray(phi(E.lambdas, E.lambdas), dtype=complex)
    rhs = complex(np.sum(diag * mu))
    return TraceCheck(lhs, rhs, abs(lhs - rhs))


def path_derivative_error(f: ScalarFunction, flow: EigenFlow) -> float:
    """Largest gap between ``sum_j f'(lambda_j) w_j`` and the forward difference of ``trace f(A_t)``.

    Both are computed on the flow grid; the gap is ``O(dt)``.
    """
    tr = np.sum(f(flow.lambda_paths), axis=1)
    fd = np.diff(tr) / flow.dt
    hf = np.sum(f.derivative(flow.lambda_paths) * flow.weights, axis=1)
    return float(np.max(np.abs(fd - hf[:-1])))


class UniquenessShadow(NamedTuple):
    support: Optional[tuple]
    radii: tuple
    shifted_mass: tuple
    outside_nonzero: bool


def uniqueness_shadow(oracle: StepFunction, c: float, radii=(1e1, 1e2, 1e3, 1e4)) -> UniquenessShadow:
    """Weighted mass of ``xi + c`` outside the support of ``xi`` on growing windows.

    ``xi`` vanishes outside its support, while ``xi + c`` keeps mass
    ``|c| int 1/(1+|t|)`` there, which grows like ``2 |c| log R`` with the
    window radius ``R``.
    """
    if c == 0:
        raise ValueError("c must be nonzero")
    sup = oracle.support()
    lo, hi = sup if sup is not None else (0.0, 0.0)
    masses = []
    for r in radii:
        g = _log_weight_primitive
        outside = max(0.0, float(g(min(lo, r)) - g(-r))) + max(0.0, float(g(r) - g(max(hi, -r))))
        masses.append(abs(c) * outside)
    probe = np.array([lo - 1.0, hi + 1.0])
    return UniquenessShadow(sup, tuple(radii), tuple(masses),
                            bool(np.all(oracle(probe) + c != 0) and np.all(oracle(probe) == 0)))
