"""
Diagnostics for relatively bounded perturbations and commutator estimates.

Finite probes can falsify a Lipschitz-type estimate but never certify it, so
every ratio here is one-sided evidence: a large ratio is a candidate
counterexample, a small one is only consistent with the estimate.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import as_hermitian, eigh, func_calc, op_norm, scale, trace_norm
from .symbols import ScalarFunction

ZERO_RATIO_TOL = 1e-12


def _resolvent_i(M) -> np.ndarray:
    return func_calc(lambda x: 1.0 / (x + 1j), eigh(M))


@dataclass(frozen=True)
class PerturbationPair:
    """``A`` and ``K`` with ``c = K (A + iI)^{-1}`` and ``g = K (A^2 + I)^{-1/2}``."""

    a: np.ndarray
    k: np.ndarray
    c: np.ndarray
    g: np.ndarray
    c_trace_norm: float

    @property
    def b(self) -> np.ndarray:
        return self.a + self.k

    def residuals(self) -> tuple[float, float]:
        """``||c (A + iI) - K||_F`` and ``||g (A^2 + I)^{1/2} - K||_F``."""
        n = self.a.shape[0]
        r1 = np.linalg.norm(self.c @ (self.a + 1j * np.eye(n)) - self.k)
        root = func_calc(lambda x: np.sqrt(x * x + 1.0), eigh(self.a))
        r2 = np.linalg.norm(self.g @ root - self.k)
        return float(r1), float(r2)


def make_pair(A, K) -> PerturbationPair:
    A = as_hermitian(A)
    K = as_hermitian(K)
    if A.shape != K.shape:
        raise ValueError("A and K must have the same dimension")
    E = eigh(A)
    c = K @ func_calc(lambda x: 1.0 / (x + 1j), E)
    g = K @ func_calc(lambda x: 1.0 / np.sqrt(x * x + 1.0), E)
    return PerturbationPair(A, K, c, g, trace_norm(c))


class DominationReport(NamedTuple):
    max_violation: float
    implication_holds: bool
    implication_slack: float


def domination_check(A, K, c: float, d: float, trials: int = 100, seed: int = 0) -> DominationReport:
    """Test ``||Kv|| <= c||v|| + d||Av||`` on seeded random unit vectors.

    When no trial violates it, also test the consequence
    ``||Kv|| <= (c||v|| + d||(A + K)v||) / (1 - d)`` on the same vectors;
    ``implication_slack`` is the smallest margin of that bound.
    """
    if not 0.0 < d < 1.0:
        raise ValueError("d must lie in (0, 1)")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    A = as_hermitian(A)
    K = as_hermitian(K)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((n, trials)) + 1j * rng.standard_normal((n, trials))
    V /= np.linalg.norm(V, axis=0)
    kv = np.linalg.norm(K @ V, axis=0)
    av = np.linalg.norm(A @ V, axis=0)
    bv = np.linalg.norm((A + K) @ V, axis=0)
    violation = float(max(np.max(kv - c - d * av), 0.0))
    slack = float(np.min((c + d * bv) / (1.0 - d) - kv))
    tol = 1e-12 * scale(A, K)
    holds = violation == 0.0 and slack >= -tol
    return DominationReport(violation, holds, slack)


class CommutatorRatios(NamedTuple):
    ratio_b: float
    ratio_c: float
    flagged_b: bool
    flagged_c: bool
    num_b: float
    den_b: float
    num_c: float
    den_c: float


def _ratio(num: float, den: float, ref: float) -> tuple[float, bool]:
    if den > ZERO_RATIO_TOL * ref:
        return num / den, False
    if num <= ZERO_RATIO_TOL * ref:
        return 0.0, False
    return float("inf"), True


def commutator_probe(f: ScalarFunction, A, B, R) -> CommutatorRatios:
    """Commutator and quasi-commutator ratios in the operator norm.

    ``ratio_b = ||f(A)R - Rf(A)|| / ||(AR - RA)(A + iI)^{-1}||`` and
    ``ratio_c = ||f(B)R - Rf(A)|| / ||(BR - RA)(A + iI)^{-1}||``.

    A zero denominator yields ratio 0 when the numerator is also below
    ``1e-12 * scale``; otherwise the ratio is ``inf`` and flagged.
    """
    A = as_hermitian(A)
    B = as_hermitian(B)
    R = np.asarray(R, dtype=complex)
    if R.shape != (B.shape[0], A.shape[0]):
        raise ValueError(f"R has shape {R.shape}, expected {(B.shape[0], A.shape[0])}")
    ref = scale(A, B, R)
    Ea, Eb = eigh(A), eigh(B)
    fa, fb = func_calc(f, Ea), func_calc(f, Eb)
    res_a = func_calc(lambda x: 1.0 / (x + 1j), Ea)
    if A.shape == B.shape:
        num_b = op_norm(fa @ R - R @ fa)
        den_b = op_norm((A @ R - R @ A) @ res_a)
    else:
        num_b = den_b = 0.0
    num_c = op_norm(fb @ R - R @ fa)
    den_c = op_norm((B @ R - R @ A) @ res_a)
    rb, flag_b = _ratio(num_b, den_b, ref)
    rc, flag_c = _ratio(num_c, den_c, ref)
    return CommutatorRatios(rb, rc, flag_b, flag_c, num_b, den_b, num_c, den_c)


def block_dilation(A, B, R) -> tuple[np.ndarray, np.ndarray]:
    """``blockdiag(A, B)`` and ``R`` placed in the lower-left block."""
    A = as_hermitian(A)
    B = as_hermitian(B)
    R = np.asarray(R, dtype=complex)
    m, n = A.shape[0], B.shape[0]
    big = np.zeros((m + n, m + n), dtype=complex)
    big[:m, :m] = A
    big[m:, m:] = B
    rr = np.zeros_like(big)
    rr[m:, :m] = R
    return big, rr


class DilationCheck(NamedTuple):
    numerator_gap: float
    denominator_gap: float
    ratio_gap: float


def dilation_check(f: ScalarFunction, A, B, R) -> DilationCheck:
    """Compare the quasi-commutator of ``(A, B, R)`` with the commutator of its dilation."""
    direct = commutator_probe(f, A, B, R)
    big, rr = block_dilation(A, B, R)
    lifted = commutator_probe(f, big, big, rr)
    gap = abs(direct.ratio_c - lifted.ratio_b) if np.isfinite(direct.ratio_c) else 0.0
    return DilationCheck(abs(direct.num_c - lifted.num_b), abs(direct.den_c - lifted.den_b), gap)


class IdentityResidual(NamedTuple):
    residual: float
    scale: float


def cayley_commutator_identity(A, B, R) -> IdentityResidual:
    """Residual of ``VR - RU = 2i (B + iI)^{-1} (BR - RA) (A + iI)^{-1}``.

    ``U`` and ``V`` are the Cayley transforms ``(X - iI)(X + iI)^{-1}`` of
    ``A`` and ``B``.
    """
    A = as_hermitian(A)
    B = as_hermitian(B)
    R = np.asarray(R, dtype=complex)
    Ea, Eb = eigh(A), eigh(B)
    cay = lambda x: (x - 1j) / (x + 1j)  # noqa: E731
    U, V = func_calc(cay, Ea), func_calc(cay, Eb)
    ra = func_calc(lambda x: 1.0 / (x + 1j), Ea)
    rb = func_calc(lambda x: 1.0 / (x + 1j), Eb)
    lhs = V @ R - R @ U
    rhs = 2j * rb @ (B @ R - R @ A) @ ra
    return IdentityResidual(float(np.linalg.norm(lhs - rhs)), scale(A, B, R))


class ChainResult(NamedTuple):
    residual: float
    s1_norm: float
    scale: float


def chain_identity(A, K) -> ChainResult:
    """``K(A+K+iI)^{-1} - K(A+iI)^{-1} = -K(A+K+iI)^{-1} K (A+iI)^{-1}``."""
    A = as_hermitian(A)
    K = as_hermitian(K)
    ra = _resolvent_i(A)
    rb = _resolvent_i(A + K)
    lhs = K @ rb - K @ ra
    rhs = -K @ rb @ K @ ra
    return ChainResult(float(np.linalg.norm(lhs - rhs)), trace_norm(rhs), scale(A, K))


class ContinuityReport(NamedTuple):
    op_moduli: np.ndarray
    s1_moduli: np.ndarray
    lipschitz_op: float
    lipschitz_s1: float


def continuity_probe(f: ScalarFunction, A, K, s_grid) -> ContinuityReport:
    """Increments of ``s -> f(A + sK)`` (operator norm) and ``s -> K(A_s + iI)^{-1}`` (trace norm).

    ``lipschitz_*`` is the largest increment divided by its step.
    """
    A = as_hermitian(A)
    K = as_hermitian(K)
    s = np.asarray(s_grid, dtype=float)
    if s.ndim != 1 or s.size < 2 or np.any(np.diff(s) <= 0):
        raise ValueError("s_grid must be strictly ascending with at least two points")
    fs, cs = [], []
    for sk in s:
        E = eigh(A + sk * K)
        fs.append(func_calc(f, E))
        cs.append(K @ func_calc(lambda x: 1.0 / (x + 1j), E))
    op = np.array([op_norm(fs[k + 1] - fs[k]) for k in range(s.size - 1)])
    s1 = np.array([trace_norm(cs[k + 1] - cs[k]) for k in range(s.size - 1)])
    ds = np.diff(s)
    return ContinuityReport(op, s1, float(np.max(op / ds)), float(np.max(s1 / ds)))
