"""
File formats and textual function specs.

Matrix files are JSON objects::

    {"kind": "hermitian", "n": 2, "real": [[...], ...], "imag": [[...], ...]}
    {"kind": "general", "rows": 2, "cols": 3, "real": [...], "imag": [...]}

Function specs are ``name`` or ``name:key=value;key=value`` where a value is a
number or a comma separated list of numbers and complex numbers are written
``a+bi``. Parameters are separated by ``;`` because list values use ``,``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np

from .linalg import HERMITIAN_TOL, hermitian_residual
from .symbols import REGISTRY, ScalarFunction


class FormatError(ValueError):
    """Malformed input; ``where`` locates the problem (file, key, row, column)."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


# --------------------------------------------------------------------------
# Numbers
# --------------------------------------------------------------------------

def parse_complex(text: str) -> complex:
    """Parse ``a``, ``bi``, ``a+bi`` or ``a-bi``."""
    t = text.strip()
    if not t or "j" in t.lower() or " " in t:
        raise FormatError(f"cannot parse number {text!r}")
    try:
        z = complex(t.replace("i", "j"))
    except ValueError:
        raise FormatError(f"cannot parse number {text!r}") from None
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise FormatError(f"number {text!r} is not finite")
    return z


def _fmt_real(x: float) -> str:
    x = float(x)
    if math.isfinite(x) and x == int(x) and abs(x) < 1e15:
        return str(int(x)) if x != 0 else "0"
    return repr(x)


def format_complex(z: complex) -> str:
    """Inverse of :func:`parse_complex`; real numbers render without an imaginary part."""
    z = complex(z)
    if z.imag == 0:
        return _fmt_real(z.real)
    sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
    return f"{_fmt_real(z.real)}{sign}{_fmt_real(abs(z.imag))}i"


# --------------------------------------------------------------------------
# Function specs
# --------------------------------------------------------------------------

#: parameter kinds per registered name: "c" complex scalar, "r" real scalar, "cl" complex list
PARAM_KINDS: dict[str, dict[str, str]] = {
    "resolvent": {"z": "c"},
    "rational": {"num": "cl", "den": "cl"},
    "arctan": {"a": "r"},
    "gauss": {"a": "r"},
    "poly": {"coeffs": "cl"},
    "expres": {"tau": "r"},
}


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    params: tuple = field(default=())  # sorted (key, value) pairs

    @classmethod
    def parse(cls, text: str) -> "FunctionSpec":
        text = text.strip()
        name, _, rest = text.partition(":")
        name = name.strip()
        if name not in REGISTRY:
            raise FormatError(f"unknown function {name!r}; expected one of {sorted(REGISTRY)}", text)
        kinds = PARAM_KINDS[name]
        params = {}
        if rest.strip():
            for item in rest.split(";"):
                key, eq, value = item.partition("=")
                key = key.strip()
                if not eq or not key:
                    raise FormatError(f"expected key=value, got {item!r}", text)
                if key not in kinds:
                    raise FormatError(f"{name} has no parameter {key!r}; expected {sorted(kinds)}", text)
                if key in params:
                    raise FormatError(f"parameter {key!r} given twice", text)
                params[key] = _parse_value(value, kinds[key], f"{text} [{key}]")
        return cls(name, tuple(sorted(params.items())))

    def render(self) -> str:
        if not self.params:
            return self.name
        kinds = PARAM_KINDS[self.name]
        body = ";".join(f"{k}={_render_value(v, kinds[k])}" for k, v in self.params)
        return f"{self.name}:{body}"

    def build(self) -> ScalarFunction:
        return REGISTRY[self.name](**dict(self.params))

    def __str__(self) -> str:
        return self.render()


def _parse_value(text: str, kind: str, where: str):
    try:
        if kind == "cl":
            items = [s for s in text.split(",")]
            if any(not s.strip() for s in items):
                raise FormatError("empty list entry", where)
            return tuple(parse_complex(s) for s in items)
        z = parse_complex(text)
    except FormatError as exc:
        raise FormatError(str(exc), where) from None
    if kind == "r":
        if z.imag != 0:
            raise FormatError(f"expected a real number, got {text!r}", where)
        return float(z.real)
    return z


def _render_value(value, kind: str) -> str:
    if kind == "cl":
        return ",".join(format_complex(v) for v in value)
    return format_complex(value)


def parse_function(text: str) -> ScalarFunction:
    """Build the registered :class:`ScalarFunction` named by ``text``.

    Raises :class:`FormatError` for unknown names or bad parameters and
    ``ValueError`` naming the pole when a rational spec has a real pole.
    """
    spec = FunctionSpec.parse(text)
    try:
        return spec.build()
    except ValueError as exc:
        raise FormatError(str(exc), text) from None


# --------------------------------------------------------------------------
# Matrices
# --------------------------------------------------------------------------

def matrix_to_obj(m, kind: str = "general") -> dict:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ValueError("expected a 2-d array")
    obj: dict[str, Any] = {"kind": kind}
    if kind == "hermitian":
        if m.shape[0] != m.shape[1]:
            raise ValueError("hermitian matrix must be square")
        obj["n"] = m.shape[0]
    elif kind == "general":
        obj["rows"], obj["cols"] = m.shape
    else:
        raise ValueError(f"unknown kind {kind!r}")
    obj["real"] = m.real.tolist()
    obj["imag"] = m.imag.tolist()
    return obj


def write_matrix(path: Union[str, Path], m, kind: str = "general") -> None:
    Path(path).write_text(json.dumps(matrix_to_obj(m, kind), indent=1) + "\n")


def _rows(obj: dict, key: str, shape: tuple, where: str) -> np.ndarray:
    if key not in obj:
        raise FormatError(f"missing key {key!r}", where)
    data = obj[key]
    if not isinstance(data, list) or len(data) != shape[0]:
        raise FormatError(f"{key!r} must be a list of {shape[0]} rows", where)
    out = np.empty(shape)
    for i, row in enumerate(data):
        if not isinstance(row, list) or len(row) != shape[1]:
            raise FormatError(f"row {i} of {key!r} must have {shape[1]} entries", where)
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise FormatError(f"{key}[{i}][{j}] = {v!r} is not a finite number", where)
            out[i, j] = v
    return out


def _positive_int(obj: dict, key: str, where: str) -> int:
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise FormatError(f"{key!r} must be a positive integer, got {v!r}", where)
    return v


def matrix_from_obj(obj: Any, where: str = "", hermitian_tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, str]:
    if not isinstance(obj, dict):
        raise FormatError("matrix must be a JSON object", where)
    kind = obj.get("kind", "general")
    if kind == "hermitian":
        n = _positive_int(obj, "n", where)
        shape = (n, n)
    elif kind == "general":
        shape = (_positive_int(obj, "rows", where), _positive_int(obj, "cols", where))
    else:
        raise FormatError(f"unknown kind {kind!r}; expected 'hermitian' or 'general'", where)
    m = _rows(obj, "real", shape, where) + 1j * _rows(obj, "imag", shape, where)
    if kind == "hermitian":
        res = hermitian_residual(m)
        if res > hermitian_tol:
            i, j = np.unravel_index(int(np.argmax(np.abs(m - m.conj().T))), m.shape)
            raise FormatError(f"declared hermitian but residual {res:.3e} > {hermitian_tol:.0e} "
                              f"at entry ({i}, {j})", where)
    return m, kind


def parse_matrix(path: Union[str, Path]) -> np.ndarray:
    """Read a matrix file, validating shape and (when declared) self-adjointness."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", f"{path}:{exc.lineno}:{exc.colno}") from None
    return matrix_from_obj(obj, str(path))[0]


def complex_pair(z: complex) -> list:
    z = complex(z)
    return [z.real, z.imag]
