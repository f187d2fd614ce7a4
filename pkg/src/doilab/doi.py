"""
Double operator integrals on finite spectral measures.

With ``E_1`` and ``E_2`` given by eigensystems ``(lambda, U)`` and
``(mu, V)``, the double operator integral of a symbol ``Phi`` against ``Q``
is the Schur product in the mixed eigenbases::

    U (S o (U^* Q V)) V^*,    S[i, j] = Phi(lambda_i, mu_j).

Everything else in this module is a particular choice of symbol, spectral
measures and ``Q``.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .linalg import EigenSystem, as_hermitian, eigh, func_calc, indicator, op_norm
from .symbols import ScalarFunction, Symbol, divided_difference, weight_symbol


class SymbolEvaluationError(ValueError):
    def __init__(self, i: int, j: int, x: float, y: float):
        super().__init__(f"symbol is not finite at pair ({i}, {j}) = ({x!r}, {y!r})")
        self.pair = (i, j)
        self.point = (x, y)


def symbol_matrix(symbol, xs, ys) -> np.ndarray:
    """Sample ``symbol`` on ``xs x ys``; raise on the first non-finite entry."""
    sample = symbol.sample if isinstance(symbol, Symbol) else Symbol(symbol).sample
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        S = sample(xs, ys)
    bad = np.argwhere(~np.isfinite(S))
    if bad.size:
        i, j = (int(k) for k in bad[0])
        raise SymbolEvaluationError(i, j, float(xs[i]), float(ys[j]))
    return S


def doi(symbol, left: EigenSystem, right: EigenSystem, q, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Double operator integral ``int int Phi(x, y) dE_left(x) q dE_right(y)``.

    Parameters
    ----------
    symbol : Symbol or callable
        The symbol ``Phi``.
    left, right : EigenSystem
        Spectral measures; ``left.n`` must equal ``q.shape[0]`` and
        ``right.n`` must equal ``q.shape[1]``.
    q : array_like
    mask : array_like of bool, optional
        Samples where ``mask`` is False are set to zero before the Schur
        product (restriction of the spectral measures).
    """
    q = np.asarray(q, dtype=complex)
    if q.ndim != 2 or q.shape != (left.n, right.n):
        raise ValueError(f"shape mismatch: left n={left.n}, q {q.shape}, right n={right.n}")
    S = symbol_matrix(symbol, left.lambdas, right.lambdas)
    if mask is not None:
        S = np.where(mask, S, 0.0)
    inner = left.u.conj().T @ q @ right.u
    return left.u @ (S * inner) @ right.u.conj().T


def doi_separated(phis: Sequence[Callable], psis: Sequence[Callable],
                  left: EigenSystem, right: EigenSystem, q) -> np.ndarray:
    """``sum_n phi_n(left) q psi_n(right)`` for a symbol given in separated form."""
    q = np.asarray(q, dtype=complex)
    out = np.zeros(q.shape, dtype=complex)
    for ph, ps in zip(phis, psis):
        out += func_calc(ph, left) @ q @ func_calc(ps, right)
    return out


def _eig(M, E: Optional[EigenSystem]) -> EigenSystem:
    return E if E is not None else eigh(M)


def difference_standard(f: ScalarFunction, A, B, *, eig_a: Optional[EigenSystem] = None,
                        eig_b: Optional[EigenSystem] = None) -> np.ndarray:
    """``f(B) - f(A)`` as the double operator integral of ``Df`` against ``B - A``.

    The left measure is that of ``B`` and the right one that of ``A``.
    Precomputed eigensystems may be passed to avoid repeated decompositions.
    """
    A = as_hermitian(A)
    B = as_hermitian(B)
    if A.shape != B.shape:
        raise ValueError("A and B must have the same dimension")
    return doi(divided_difference(f), _eig(B, eig_b), _eig(A, eig_a), B - A)


def relative_operand(A, K, form: str, eig_a: Optional[EigenSystem] = None) -> np.ndarray:
    """``K (A + iI)^{-1}`` for form I, ``K (A^2 + I)^{-1/2}`` for form II."""
    Ea = _eig(A, eig_a)
    K = np.asarray(K, dtype=complex)
    if form == "I":
        return K @ func_calc(lambda x: 1.0 / (x + 1j), Ea)
    if form == "II":
        return K @ func_calc(lambda x: 1.0 / np.sqrt(x * x + 1.0), Ea)
    raise ValueError(f"unknown form {form!r}; expected 'I' or 'II'")


def difference_relative(f: ScalarFunction, A, K, form: str = "I", *,
                        eig_a: Optional[EigenSystem] = None,
                        eig_b: Optional[EigenSystem] = None) -> np.ndarray:
    """``f(A + K) - f(A)`` written through a relatively bounded operand.

    Form I integrates the symbol ``Df(x, y)(y + i)`` against
    ``K (A + iI)^{-1}``; form II integrates ``Df(x, y)(y^2 + 1)^{1/2}``
    against ``K (A^2 + I)^{-1/2}``. Left measure ``E_{A+K}``, right ``E_A``.
    """
    A = as_hermitian(A)
    K = as_hermitian(K)
    Ea = _eig(A, eig_a)
    Eb = _eig(A + K, eig_b)
    q = relative_operand(A, K, form, Ea)
    return doi(weight_symbol(f, form), Eb, Ea, q)


def relative_ratio(f: ScalarFunction, A, K, form: str = "II", norm: Optional[Callable] = None) -> float:
    """``||f(A+K) - f(A)|| / ||q||`` with ``q`` the form's operand.

    This is the quantity bounded by the multiplier norm of the weighted
    divided difference. Operator norm unless ``norm`` is given.
    """
    norm = norm or op_norm
    A = as_hermitian(A)
    K = as_hermitian(K)
    Ea = eigh(A)
    diff = difference_relative(f, A, K, form, eig_a=Ea)
    q = relative_operand(A, K, form, Ea)
    denom = norm(q)
    return 0.0 if denom == 0 else norm(diff) / denom


def derivative_at(f: ScalarFunction, A, K, t: float = 0.0) -> np.ndarray:
    """Derivative of ``s -> f(A + sK)`` at ``s = t``.

    The double operator integral of ``Df(x, y)(y + i)`` against
    ``K (A_t + iI)^{-1}`` with both measures those of ``A_t = A + tK``.
    """
    A = as_hermitian(A)
    K = as_hermitian(K)
    Et = eigh(A + t * K)
    q = K @ func_calc(lambda x: 1.0 / (x + 1j), Et)
    return doi(weight_symbol(f, "I"), Et, Et, q)


def truncated_transformer(f: ScalarFunction, A, T, M: float, *,
                          eig_a: Optional[EigenSystem] = None) -> np.ndarray:
    """Transformer with symbol ``Df(x, y)(y + i)`` and the right measure cut to ``[-M, M]``.

    Samples in columns whose eigenvalue lies outside ``[-M, M]`` are zeroed.
    """
    Ea = _eig(as_hermitian(A), eig_a)
    keep = indicator(-M, M)(Ea.lambdas).astype(bool)
    mask = np.broadcast_to(keep[None, :], (Ea.n, Ea.n))
    return doi(weight_symbol(f, "I"), Ea, Ea, T, mask=mask)
