import csv
import io
import json
from importlib import resources

import numpy as np
import pytest

from doilab import __version__
from doilab.cli import OUT_DIR_ENV, run_command
from doilab.io import write_matrix

jsonschema = pytest.importorskip("jsonschema")
SCHEMA = json.loads(resources.files("doilab").joinpath("schemas/report.schema.json").read_text())


def run(capsys, *argv):
    code = run_command(list(argv))
    return code, capsys.readouterr().out


def report(capsys, *argv):
    code, out = run(capsys, *argv)
    assert code == 0, out
    obj = json.loads(out)
    jsonschema.validate(obj, SCHEMA)
    return obj


@pytest.fixture
def two_by_two(tmp_path):
    write_matrix(tmp_path / "a.json", np.diag([0.0, 2.0]), "hermitian")
    write_matrix(tmp_path / "k.json", np.diag([1.0, -1.0]), "hermitian")
    return str(tmp_path / "a.json"), str(tmp_path / "k.json")


@pytest.mark.parametrize("argv", [
    ["gen", "--n", "3"],
    ["doi", "--n", "5", "--symbol", "II"],
    ["diff", "--n", "6", "--f", "arctan:a=2"],
    ["ssf", "--n", "3", "--steps", "50", "--bins", "40"],
    ["trace-check", "--n", "7"],
    ["trace-check", "--n", "3", "--xi", "profile", "--steps", "60", "--bins", "60"],
    ["multnorm", "--n", "4", "--symbol", "I"],
    ["multnorm", "--symbol", "sign"],
    ["probe", "--n", "4", "--bound"],
    ["flow", "--n", "3", "--steps", "5"],
])
def test_commands_emit_valid_reports(capsys, argv):
    obj = report(capsys, *argv)
    assert obj["command"] == argv[0] and obj["version"] == __version__ and obj["seed"] == 0
    assert len(obj["inputs_digest"]) == 64


def test_gen_writes_matrices(capsys, tmp_path):
    obj = report(capsys, "gen", "--n", "4", "--seed", "3", "--write-matrices", str(tmp_path / "inst"))
    for name in "akbr":
        assert (tmp_path / "inst" / f"{name}.json").exists()
    # a written instance reproduces the generated one
    again = report(capsys, "gen", "--a", str(tmp_path / "inst/a.json"), "--k", str(tmp_path / "inst/k.json"),
                   "--r", str(tmp_path / "inst/r.json"))
    assert again["inputs_digest"] == obj["inputs_digest"]


def test_diff_residuals(capsys):
    res = report(capsys, "diff", "--n", "8", "--seed", "2")["results"]
    for key in ("residual_standard", "residual_form_I", "residual_form_II"):
        assert res[key] <= 1e-8 * res["scale"]


def test_trace_check_worked_example(capsys, two_by_two):
    a, k = two_by_two
    res = report(capsys, "trace-check", "--a", a, "--k", k, "--f", "poly:coeffs=0,0,1")["results"]
    assert res["lhs"] == pytest.approx([-2.0, 0.0], abs=1e-12)
    assert res["error"] <= 1e-10


def test_trace_check_with_b_file(capsys, tmp_path, two_by_two):
    a, _ = two_by_two
    write_matrix(tmp_path / "b.json", np.diag([1.0, 1.0]), "hermitian")
    res = report(capsys, "trace-check", "--a", a, "--b", str(tmp_path / "b.json"), "--f", "poly:coeffs=0,0,1")
    assert res["results"]["lhs"] == pytest.approx([-2.0, 0.0], abs=1e-12)


def test_multnorm_constant(capsys):
    res = report(capsys, "multnorm", "--symbol", "const", "--value", "-1", "--n", "8")["results"]
    assert res["lo"] == pytest.approx(1, abs=1e-9) and res["hi"] == pytest.approx(1, abs=1e-9)
    assert res["shape"] == [8, 8]


def test_ssf_worked_example(capsys, two_by_two):
    a, k = two_by_two
    res = report(capsys, "ssf", "--a", a, "--k", k, "--steps", "1000", "--bins", "1000")["results"]
    assert res["weighted_l1_distance"] <= 5e-2
    assert res["oracle"]["values"] == [1.0, -1.0]


def test_ssf_csv(capsys, two_by_two):
    a, k = two_by_two
    code, out = run(capsys, "ssf", "--a", a, "--k", k, "--steps", "20", "--bins", "10", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["s_lo", "s_hi", "xi_hat", "xi_oracle"] and len(rows) == 11


def test_flow_csv(capsys):
    code, out = run(capsys, "flow", "--n", "3", "--steps", "4", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0]) == ["t", "j", "lambda", "weight"]
    assert len(rows) == 12 and float(rows[0]["t"]) == 0.125


def test_probe_note(capsys):
    res = report(capsys, "probe", "--n", "3")["results"]
    assert "one-sided" in res["note"]
    assert res["cayley_residual"] <= 1e-9 * res["cayley_scale"]


@pytest.mark.parametrize("argv, etype", [
    (["diff", "--f", "rational:num=1;den=1,0,-1"], "FormatError"),
    (["diff", "--f", "sinc"], "FormatError"),
    (["diff", "--n", "0"], "CommandError"),
    (["ssf", "--steps", "1"], "CommandError"),
    (["diff", "--a", "/nonexistent/a.json"], "FileNotFoundError"),
])
def test_errors_are_json(capsys, argv, etype):
    code, out = run(capsys, *argv)
    obj = json.loads(out)
    assert code == 1 and obj["error"]["type"] == etype and obj["command"] == argv[0]
    jsonschema.validate(obj, SCHEMA)


def test_pole_error_names_pole(capsys):
    _, out = run(capsys, "diff", "--f", "rational:num=1;den=1,0,-1")
    assert "pole on the real axis at" in json.loads(out)["error"]["message"]


def test_shape_mismatch(capsys, tmp_path):
    write_matrix(tmp_path / "a.json", np.eye(2), "hermitian")
    write_matrix(tmp_path / "k.json", np.eye(3), "hermitian")
    code, out = run(capsys, "diff", "--a", str(tmp_path / "a.json"), "--k", str(tmp_path / "k.json"))
    assert code == 1 and "K (or B)" in json.loads(out)["error"]["message"]


def test_output_file_and_env_override(capsys, tmp_path, monkeypatch):
    code, out = run(capsys, "gen", "--n", "2", "--out", str(tmp_path / "x" / "gen.json"))
    assert code == 0 and out == "" and (tmp_path / "x" / "gen.json").exists()
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "env"))
    assert run(capsys, "gen", "--n", "2", "--out", "rel.json")[0] == 0
    assert (tmp_path / "env" / "rel.json").read_bytes() == (tmp_path / "x" / "gen.json").read_bytes()


def test_digest_depends_on_inputs(capsys):
    d0 = report(capsys, "gen", "--n", "3", "--seed", "1")["inputs_digest"]
    d1 = report(capsys, "gen", "--n", "3", "--seed", "2")["inputs_digest"]
    d2 = report(capsys, "gen", "--n", "3", "--seed", "1")["inputs_digest"]
    assert d0 != d1 and d0 == d2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        run_command(["--version"])
    assert info.value.code == 0 and __version__ in capsys.readouterr().out
