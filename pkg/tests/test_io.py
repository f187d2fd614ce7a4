import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from doilab import ensembles
from doilab.io import (FormatError, FunctionSpec, format_complex, matrix_from_obj, parse_complex, parse_function,
                       parse_matrix, write_matrix)


def _write(tmp_path, obj, name="m.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return p


def test_parse_one_by_one(tmp_path):
    p = _write(tmp_path, {"kind": "hermitian", "n": 1, "real": [[2]], "imag": [[0]]})
    m = parse_matrix(p)
    assert m.shape == (1, 1) and m[0, 0] == 2


def test_hermitian_flag_enforced(tmp_path):
    p = _write(tmp_path, {"kind": "hermitian", "n": 1, "real": [[2]], "imag": [[0.5]]})
    with pytest.raises(FormatError, match="residual"):
        parse_matrix(p)
    p = _write(tmp_path, {"kind": "hermitian", "n": 2, "real": [[0, 1], [2, 0]], "imag": [[0, 0], [0, 0]]})
    with pytest.raises(FormatError, match=r"entry \(\d, \d\)"):
        parse_matrix(p)
    # the same data as a general matrix is fine
    p = _write(tmp_path, {"kind": "general", "rows": 1, "cols": 1, "real": [[2]], "imag": [[0.5]]})
    assert parse_matrix(p)[0, 0] == 2 + 0.5j


@pytest.mark.parametrize("kind", ["hermitian", "general"])
def test_round_trip_bitwise(tmp_path, kind):
    m = ensembles.gaussian_hermitian(8, 4) if kind == "hermitian" else ensembles.general_matrix(8, 5, 4)
    p = tmp_path / "m.json"
    write_matrix(p, m, kind)
    back = parse_matrix(p)
    assert back.tobytes() == np.asarray(m, complex).tobytes()


@pytest.mark.parametrize("text, pattern", [
    ('{"kind": "hermitian", "n": 2, "real": [[1, 0]], "imag": [[0, 0]]}', "2 rows"),
    ('{"kind": "hermitian", "n": 2, "real": [[1, 0], [0]], "imag": [[0, 0], [0, 0]]}', "row 1"),
    ('{"kind": "hermitian", "n": 1, "real": [["x"]], "imag": [[0]]}', r"real\[0\]\[0\]"),
    ('{"kind": "hermitian", "n": 0, "real": [], "imag": []}', "positive integer"),
    ('{"kind": "general", "rows": 1, "real": [[1]], "imag": [[0]]}', "cols"),
    ('{"kind": "sparse", "n": 1}', "unknown kind"),
    ('{"kind": "hermitian", "n": 1, "real": [[1]]}', "missing key 'imag'"),
    ('[1, 2]', "JSON object"),
    ('{"kind": "hermitian", "n": 1,\n "real": [[1]] "imag": [[0]]}', r"m\.json:2:"),
])
def test_malformed_files(tmp_path, text, pattern):
    p = _write(tmp_path, text)
    with pytest.raises(FormatError, match=pattern) as info:
        parse_matrix(p)
    assert str(p) in str(info.value)


def test_nonfinite_rejected():
    with pytest.raises(FormatError, match="finite"):
        matrix_from_obj({"kind": "general", "rows": 1, "cols": 1, "real": [[float("nan")]], "imag": [[0]]})


def test_parse_complex():
    assert parse_complex("0+1i") == 1j
    assert parse_complex("-2.5") == -2.5
    assert parse_complex("i") == 1j
    assert parse_complex("1e-3-4i") == 1e-3 - 4j
    for bad in ("", "1+2j", "1 + 2i", "abc", "inf", "nan+1i"):
        with pytest.raises(FormatError):
            parse_complex(bad)


def test_format_complex():
    assert format_complex(1j) == "0+1i"
    assert format_complex(-2.0) == "-2"
    assert format_complex(0.1 - 3j) == "0.1-3i"


def test_function_spec_examples():
    f = parse_function("resolvent:z=0+1i")
    x = np.linspace(-3, 3, 7)
    assert np.allclose(f(x), 1 / (x + 1j))
    f = parse_function("poly:coeffs=0,0,1")
    assert np.allclose(f(x), x ** 2) and np.allclose(f.derivative(x), 2 * x)
    f = parse_function("rational:num=1;den=1,0,1")
    assert np.allclose(f(x), 1 / (x ** 2 + 1))
    assert np.allclose(np.roots([1, 0, 1]).real, 0)  # poles at +-i


def test_function_spec_rejections():
    with pytest.raises(FormatError, match="unknown function"):
        parse_function("sinc")
    with pytest.raises(FormatError, match="pole on the real axis at"):
        parse_function("rational:num=1;den=1,0,-1")
    with pytest.raises(FormatError, match="no parameter"):
        parse_function("arctan:b=2")
    with pytest.raises(FormatError, match="real number"):
        parse_function("gauss:a=1+1i")
    with pytest.raises(FormatError, match="twice"):
        parse_function("arctan:a=1;a=2")
    with pytest.raises(FormatError, match="key=value"):
        parse_function("arctan:a")
    with pytest.raises(FormatError, match="empty list"):
        parse_function("poly:coeffs=1,,2")


def test_canonical_render():
    assert FunctionSpec.parse("rational:den=1,0,1;num=1").render() == "rational:den=1,0,1;num=1"
    assert str(FunctionSpec.parse(" resolvent:z=0+1i ")) == "resolvent:z=0+1i"
    assert FunctionSpec.parse("arctan").render() == "arctan"


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)
specs = st.one_of(
    st.builds(lambda z: FunctionSpec("resolvent", (("z", z),)), cplx),
    st.builds(lambda a: FunctionSpec("arctan", (("a", a),)), finite),
    st.builds(lambda a: FunctionSpec("gauss", (("a", a),)), finite),
    st.builds(lambda t: FunctionSpec("expres", (("tau", t),)), finite),
    st.builds(lambda c: FunctionSpec("poly", (("coeffs", tuple(c)),)), st.lists(cplx, min_size=1, max_size=5)),
    st.builds(lambda d, n: FunctionSpec("rational", (("den", tuple(d)), ("num", tuple(n)))),
              st.lists(cplx, min_size=1, max_size=4), st.lists(cplx, min_size=1, max_size=4)),
)


@settings(max_examples=200)
@given(specs)
def test_spec_round_trip(spec):
    assert FunctionSpec.parse(spec.render()) == spec


@settings(max_examples=200)
@given(cplx)
def test_complex_round_trip(z):
    assert parse_complex(format_complex(z)) == z
