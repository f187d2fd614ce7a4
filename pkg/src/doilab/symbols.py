"""
Scalar functions and the two-variable symbols built from them.

A :class:`ScalarFunction` carries a vectorized evaluator and its derivative;
derivatives are supplied per function, never approximated. A
:class:`Symbol` is a vectorized function of ``(x, y)``. The divided
difference and its weighted variants are the symbols that turn
``f(B) - f(A)`` into a double operator integral.

The built-in families are

``resolvent``   ``1 / (x + z)`` with ``Im z != 0``
``rational``    ``p(x) / q(x)`` with no real poles
``arctan``      ``arctan(a x)``
``gauss``       ``exp(-a x^2)``
``poly``        polynomials (unbounded, used for exactness checks)
``expres``      ``exp(i tau x) / (x + i)``

Coefficient lists are in ascending powers: ``(c0, c1, c2)`` is
``c0 + c1 x + c2 x^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

COINCIDENCE_REL = 1e-7


@dataclass(frozen=True)
class ScalarFunction:
    """A function on the real line together with its derivative.

    ``bounded`` and ``rol`` are catalogue facts about the family, used to
    select functions for the checks; they are not computed.
    ``rol`` is True when the function is known to be relatively operator
    Lipschitz, False when it is known not to be, None if unknown.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    name: str
    limit_at_infinity: Optional[complex] = None
    bounded: bool = True
    rol: Optional[bool] = None
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    def derivative(self, x):
        return self.deriv(np.asarray(x, dtype=float))


def _c(x) -> np.ndarray:
    return np.asarray(x, dtype=float).astype(complex)


def resolvent(z: complex = 1j) -> ScalarFunction:
    z = complex(z)
    if z.imag == 0:
        raise ValueError(f"resolvent pole z = {z} must lie off the real axis")
    return ScalarFunction(
        eval=lambda x: 1.0 / (_c(x) + z),
        deriv=lambda x: -1.0 / (_c(x) + z) ** 2,
        name="resolvent", limit_at_infinity=0j, bounded=True, rol=True,
        params={"z": z})


def _polyval(coeffs: np.ndarray, x) -> np.ndarray:
    # ascending coefficients, Horner
    x = _c(x)
    out = np.zeros_like(x)
    for c in coeffs[::-1]:
        out = out * x + c
    return out


def _polyder(coeffs: np.ndarray) -> np.ndarray:
    if coeffs.size <= 1:
        return np.zeros(1, dtype=complex)
    return coeffs[1:] * np.arange(1, coeffs.size)


def _trim(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    nz = np.flatnonzero(c != 0)
    return c[: nz[-1] + 1] if nz.size else np.zeros(1, dtype=complex)


def real_poles(den: Sequence[complex], rtol: float = 1e-9) -> list[complex]:
    """Roots of the ascending-coefficient polynomial ``den`` lying on the real axis."""
    d = _trim(den)
    if d.size <= 1:
        return []
    roots = np.roots(d[::-1])
    return [complex(r) for r in roots if abs(r.imag) <= rtol * (1.0 + abs(r))]


def poly(coeffs: Sequence[complex] = (0.0, 1.0)) -> ScalarFunction:
    c = _trim(coeffs)
    dc = _polyder(c)
    degree = c.size - 1
    return ScalarFunction(
        eval=lambda x: _polyval(c, x),
        deriv=lambda x: _polyval(dc, x),
        name="poly",
        limit_at_infinity=complex(c[0]) if degree == 0 else None,
        bounded=degree == 0, rol=degree == 0,
        params={"coeffs": tuple(complex(v) for v in c)})


def rational(num: Sequence[complex] = (1.0,), den: Sequence[complex] = (1.0, 0.0, 1.0)) -> ScalarFunction:
    p, q = _trim(num), _trim(den)
    if not np.any(q != 0):
        raise ValueError("rational denominator is identically zero")
    poles = real_poles(q)
    if poles:
        raise ValueError(f"rational function has a pole on the real axis at {poles[0].real!r}")
    dp, dq = _polyder(p), _polyder(q)
    dp_deg, dq_deg = p.size - 1, q.size - 1
    if dp_deg < dq_deg:
        limit = 0j
    elif dp_deg == dq_deg:
        limit = complex(p[-1] / q[-1])
    else:
        limit = None
    return ScalarFunction(
        eval=lambda x: _polyval(p, x) / _polyval(q, x),
        deriv=lambda x: (_polyval(dp, x) * _polyval(q, x) - _polyval(p, x) * _polyval(dq, x))
        / _polyval(q, x) ** 2,
        name="rational", limit_at_infinity=limit,
        bounded=dp_deg <= dq_deg, rol=dp_deg <= dq_deg,
        params={"num": tuple(complex(v) for v in p), "den": tuple(complex(v) for v in q)})


def arctan(a: float = 1.0) -> ScalarFunction:
    # Operator Lipschitz but not relatively so: (x + i) arctan(x) behaves like |x|.
    a = float(a)
    return ScalarFunction(
        eval=lambda x: _c(np.arctan(a * np.asarray(x, dtype=float))),
        deriv=lambda x: _c(a / (1.0 + (a * np.asarray(x, dtype=float)) ** 2)),
        name="arctan", limit_at_infinity=None, bounded=True, rol=a == 0,
        params={"a": a})


def gauss(a: float = 1.0) -> ScalarFunction:
    a = float(a)
    if a <= 0:
        raise ValueError("gauss width parameter must be positive")
    return ScalarFunction(
        eval=lambda x: _c(np.exp(-a * np.asarray(x, dtype=float) ** 2)),
        deriv=lambda x: _c(-2.0 * a * np.asarray(x, dtype=float)
                           * np.exp(-a * np.asarray(x, dtype=float) ** 2)),
        name="gauss", limit_at_infinity=0j, bounded=True, rol=True,
        params={"a": a})


def expres(tau: float = 1.0) -> ScalarFunction:
    tau = float(tau)

    def ev(x):
        x = _c(x)
        return np.exp(1j * tau * x) / (x + 1j)

    def dv(x):
        x = _c(x)
        return np.exp(1j * tau * x) * (1j * tau / (x + 1j) - 1.0 / (x + 1j) ** 2)

    return ScalarFunction(eval=ev, deriv=dv, name="expres", limit_at_infinity=0j,
                          bounded=True, rol=True, params={"tau": tau})


REGISTRY: dict[str, Callable[..., ScalarFunction]] = {
    "resolvent": resolvent,
    "rational": rational,
    "arctan": arctan,
    "gauss": gauss,
    "poly": poly,
    "expres": expres,
}

#: Function specs used as "every registered f" in the corpus-wide checks.
DEFAULT_SPECS = (
    "resolvent:z=0+1i",
    "resolvent:z=-1+2i",
    "rational:num=1;den=1,0,1",
    "rational:num=0,1;den=4,0,1",
    "arctan",
    "gauss",
    "expres:tau=1",
    "poly:coeffs=0,0,1",
    "poly:coeffs=1,-2",
)


# --------------------------------------------------------------------------
# Two-variable symbols
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Symbol:
    """A function ``(x, y) -> complex``, vectorized over broadcast arrays."""

    eval2: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str = ""

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return np.asarray(self.eval2(x, y), dtype=complex) * np.ones(x.shape)

    def sample(self, xs, ys) -> np.ndarray:
        """Matrix ``S[i, j] = Phi(xs[i], ys[j])``."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        return self(xs[:, None], ys[None, :])


def constant_symbol(c: complex) -> Symbol:
    c = complex(c)
    return Symbol(lambda x, y: np.full(np.shape(x), c, dtype=complex), label=f"const({c})")


def separated_symbol(phis: Sequence[Callable], psis: Sequence[Callable], label: str = "separated") -> Symbol:
    """``Phi(x, y) = sum_n phi_n(x) psi_n(y)``."""
    if len(phis) != len(psis):
        raise ValueError("phis and psis must have equal length")

    def ev(x, y):
        out = np.zeros(np.shape(x), dtype=complex)
        for ph, ps in zip(phis, psis):
            out = out + np.asarray(ph(x), dtype=complex) * np.asarray(ps(y), dtype=complex)
        return out

    return Symbol(ev, label=label)


def divided_difference(f: ScalarFunction, coincidence: float = COINCIDENCE_REL) -> Symbol:
    """Symbol ``(f(x) - f(y)) / (x - y)``, equal to ``f'((x + y) / 2)`` near the diagonal.

    The derivative branch is used when
    ``|x - y| <= coincidence * (1 + |x| + |y|)``.
    """

    def ev(x, y):
        d = x - y
        close = np.abs(d) <= coincidence * (1.0 + np.abs(x) + np.abs(y))
        with np.errstate(divide="ignore", invalid="ignore"):
            quotient = (f.eval(x) - f.eval(y)) / np.where(close, 1.0, d)
        return np.where(close, f.deriv(0.5 * (x + y)), quotient)

    return Symbol(ev, label=f"dd[{f.name}]")


WEIGHT_KINDS = ("I", "II", "resolvent")


def weight_symbol(f: ScalarFunction, kind: str, coincidence: float = COINCIDENCE_REL) -> Symbol:
    """Divided difference times a weight.

    ``kind="I"`` multiplies by ``y + i``, ``"II"`` by ``(y^2 + 1)^{1/2}`` and
    ``"resolvent"`` by ``(x + i)(y + i)``.
    """
    dd = divided_difference(f, coincidence)
    if kind == "I":
        ev = lambda x, y: dd.eval2(x, y) * (y + 1j)
    elif kind == "II":
        ev = lambda x, y: dd.eval2(x, y) * np.sqrt(y * y + 1.0)
    elif kind == "resolvent":
        ev = lambda x, y: dd.eval2(x, y) * (x + 1j) * (y + 1j)
    else:
        raise ValueError(f"unknown weight kind {kind!r}; expected one of {WEIGHT_KINDS}")
    return Symbol(ev, label=f"dd_{kind}[{f.name}]")


# --------------------------------------------------------------------------
# Growth constants
# --------------------------------------------------------------------------

class GrowthConstants(NamedTuple):
    c_a: float
    c_b: float
    c_c: float


def default_growth_grid(radius: float = 1e4, fine: int = 201, per_decade: int = 10) -> np.ndarray:
    """Uniform grid on ``[-10, 10]`` plus geometric points out to ``radius``."""
    inner = np.linspace(-10.0, 10.0, fine)
    if radius <= 10:
        return inner[np.abs(inner) <= radius]
    decades = np.log10(radius) - 1.0
    outer = np.logspace(1.0, np.log10(radius), int(np.ceil(decades * per_decade)) + 1)
    return np.unique(np.concatenate([-outer, inner, outer]))


def growth_check(f: ScalarFunction, grid) -> GrowthConstants:
    """Sampled constants for the three equivalent growth conditions.

    ``c_a = max |f(s) - f(t)| (1 + |t|) / |s - t|``,
    ``c_b = max |f(s) - f(t)| (1 + |s| + |t|) / |s - t|`` and
    ``c_c = max |(s + i) f(s) - (t + i) f(t)| / |s - t|``,
    all over ordered pairs of distinct grid points.
    """
    g = np.unique(np.asarray(grid, dtype=float))
    if g.size < 2:
        raise ValueError("growth_check needs at least two distinct grid points")
    fv = f(g)
    s, t = g[:, None], g[None, :]
    diff = np.abs(s - t)
    off = diff > 0
    safe = np.where(off, diff, 1.0)
    df = np.abs(fv[:, None] - fv[None, :])
    ra = np.where(off, df * (1.0 + np.abs(t)) / safe, 0.0)
    rb = np.where(off, df * (1.0 + np.abs(s) + np.abs(t)) / safe, 0.0)
    lifted = (g + 1j) * fv
    rc = np.where(off, np.abs(lifted[:, None] - lifted[None, :]) / safe, 0.0)
    return GrowthConstants(float(ra.max()), float(rb.max()), float(rc.max()))


class GrowthVerdict(NamedTuple):
    radii: tuple
    constants: tuple
    finite_a: bool
    finite_b: bool
    finite_c: bool


def growth_verdict(f: ScalarFunction, radii=(1e1, 1e2, 1e3, 1e4), factor: float = 1.5) -> GrowthVerdict:
    """Decide sampled finiteness of the growth constants.

    A constant is reported finite when its value on the widest grid is at most
    ``factor`` times its value on the second widest. This only detects growth
    that is visible within the probed radii.
    """
    consts = tuple(growth_check(f, default_growth_grid(r)) for r in radii)
    last, prev = consts[-1], consts[-2]

    def finite(k):
        return bool(np.isfinite(last[k]) and last[k] <= factor * max(prev[k], 1e-300))

    return GrowthVerdict(tuple(radii), consts, finite(0), finite(1), finite(2))


# --------------------------------------------------------------------------
# Pointwise identities and the Cayley lift
# --------------------------------------------------------------------------

def weighted_dd_residual(f: ScalarFunction, x, y) -> np.ndarray:
    """Residual of ``D[(x+i)f](x, y) = (x + i) Df(x, y) + f(y)`` at ``x != y``."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    lhs = ((x + 1j) * f(x) - (y + 1j) * f(y)) / (x - y)
    rhs = (x + 1j) * divided_difference(f)(x, y) + f(y)
    return np.abs(lhs - rhs)


def doubly_weighted_dd_residual(f: ScalarFunction, x, y) -> np.ndarray:
    """Residual of ``D[(x+i)^2 f] = (x+i)(y+i) Df + (x+i) f(x) + (y+i) f(y)`` at ``x != y``."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    lhs = ((x + 1j) ** 2 * f(x) - (y + 1j) ** 2 * f(y)) / (x - y)
    rhs = (x + 1j) * (y + 1j) * divided_difference(f)(x, y) + (x + 1j) * f(x) + (y + 1j) * f(y)
    return np.abs(lhs - rhs)


def cayley_lift(f: ScalarFunction, unit_tol: float = 1e-9) -> Callable:
    """Return ``phi(zeta) = f(i (1 + zeta) / (1 - zeta))`` on the unit circle.

    ``phi(1)`` is ``f.limit_at_infinity``; it is an error to evaluate there
    when the limit is not set.
    """

    def phi(zeta):
        z = np.asarray(zeta, dtype=complex)
        if np.any(np.abs(np.abs(z) - 1.0) > unit_tol):
            raise ValueError("cayley_lift is defined on the unit circle only")
        at_one = np.abs(z - 1.0) <= unit_tol
        if np.any(at_one) and f.limit_at_infinity is None:
            raise ValueError(f"{f.name} has no limit at infinity, so phi(1) is undefined")
        with np.errstate(divide="ignore", invalid="ignore"):
            x = (1j * (1.0 + z) / np.where(at_one, 1.0, 1.0 - z)).real
        out = np.where(at_one, f.limit_at_infinity if f.limit_at_infinity is not None else 0j,
                       f(np.where(at_one, 0.0, x)))
        return out if out.ndim else complex(out)

    return phi
