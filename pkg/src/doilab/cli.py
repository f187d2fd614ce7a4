"""
Command-line interface.

Every subcommand writes one report (JSON by default, CSV where noted) to
``--out`` or standard output. Reports are deterministic: keys are sorted,
floats are written with ``repr`` precision and all randomness comes from
``--seed``. Relative ``--out`` paths are resolved against ``$DOILAB_OUT_DIR``
when that variable is set.

Matrices not supplied with ``--a/--b/--k/--r`` are generated from ``--seed``,
``--n`` and ``--family``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io as _stdio
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from . import doi as doi_mod
from . import ensembles, perturb, schur, ssf
from .io import FunctionSpec, matrix_to_obj, parse_function, parse_matrix, write_matrix
from .linalg import as_hermitian, eigh, func_calc, norms, scale
from .symbols import constant_symbol, divided_difference, weight_symbol

OUT_DIR_ENV = "DOILAB_OUT_DIR"
COMMANDS = ("gen", "doi", "diff", "ssf", "trace-check", "multnorm", "probe", "flow")


class CommandError(Exception):
    pass


# --------------------------------------------------------------------------
# Serialization helpers
# --------------------------------------------------------------------------

def _clean(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(float(x.real)), _clean(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    return x


def _dumps(obj: Any) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def _digest(inputs: dict) -> str:
    canon = json.dumps(_clean(inputs), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode()).hexdigest()


def _out_path(out: Optional[str]) -> Optional[Path]:
    if out is None:
        return None
    p = Path(out)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _emit(text: str, out: Optional[str]) -> None:
    path = _out_path(out)
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _csv(header: list, rows) -> str:
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------
# Inputs
# --------------------------------------------------------------------------

class Inputs:
    def __init__(self, args):
        self.args = args
        pair = ensembles.make_pair(args.n, args.seed, args.family, args.k_size)
        self.a = as_hermitian(parse_matrix(args.a)) if args.a else pair.a
        if args.k:
            self.k = as_hermitian(parse_matrix(args.k))
        elif args.b:
            self.k = as_hermitian(parse_matrix(args.b)) - self.a
        else:
            self.k = pair.k
        if self.k.shape != self.a.shape:
            raise CommandError(f"A is {self.a.shape} but K (or B) is {self.k.shape}")
        self.b = self.a + self.k
        n = self.a.shape[0]
        if args.r:
            self.r = parse_matrix(args.r)
        else:
            self.r = ensembles.general_matrix(n, n, np.random.default_rng([args.seed, 1]))
        self.spec = FunctionSpec.parse(args.f)
        self.f = parse_function(args.f)

    def record(self, *names) -> dict:
        out = {"f": self.spec.render()}
        for name in names:
            out[name] = matrix_to_obj(getattr(self, name), "general" if name == "r" else "hermitian")
        return out


def _symbol(kind: str, f):
    if kind == "dd":
        return divided_difference(f)
    if kind in ("I", "II", "resolvent"):
        return weight_symbol(f, kind)
    raise CommandError(f"unknown symbol {kind!r}")


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_gen(args, inp: Inputs):
    if args.write_matrices:
        d = _out_path(args.write_matrices)
        d.mkdir(parents=True, exist_ok=True)
        write_matrix(d / "a.json", inp.a, "hermitian")
        write_matrix(d / "k.json", inp.k, "hermitian")
        write_matrix(d / "b.json", inp.b, "hermitian")
        write_matrix(d / "r.json", inp.r, "general")
    results = {"family": args.family, "n": inp.a.shape[0],
               "a": matrix_to_obj(inp.a, "hermitian"), "k": matrix_to_obj(inp.k, "hermitian"),
               "r": matrix_to_obj(inp.r, "general")}
    return inp.record("a", "k", "r"), results


def cmd_doi(args, inp: Inputs):
    symbol = _symbol(args.symbol, inp.f)
    Ea, Eb = eigh(inp.a), eigh(inp.b)
    q = inp.r
    out = doi_mod.doi(symbol, Eb, Ea, q)
    cert = schur.norm_upper(schur.sample_symbol(symbol, Eb.lambdas, Ea.lambdas), args.tol)
    qn, on = norms(q), norms(out)
    results = {
        "symbol": symbol.label,
        "norms": {"op": on.op, "trace": on.trace, "hs": on.hs},
        "q_norms": {"op": qn.op, "trace": qn.trace, "hs": qn.hs},
        "trace_ratio": on.trace / qn.trace if qn.trace else 0.0,
        "multiplier_hi": cert.bound,
        "contraction_holds": bool(on.trace <= cert.bound * qn.trace * (1 + 1e-9) + 1e-12),
    }
    return inp.record("a", "k", "r"), results


def cmd_diff(args, inp: Inputs):
    f = inp.f
    Ea, Eb = eigh(inp.a), eigh(inp.b)
    exact = func_calc(f, Eb) - func_calc(f, Ea)
    ref = 1.0 + np.linalg.norm(func_calc(f, Eb)) + np.linalg.norm(func_calc(f, Ea))
    std = doi_mod.difference_standard(f, inp.a, inp.b, eig_a=Ea, eig_b=Eb)
    rel1 = doi_mod.difference_relative(f, inp.a, inp.k, "I", eig_a=Ea, eig_b=Eb)
    rel2 = doi_mod.difference_relative(f, inp.a, inp.k, "II", eig_a=Ea, eig_b=Eb)
    results = {
        "scale": ref,
        "residual_standard": float(np.linalg.norm(std - exact)),
        "residual_form_I": float(np.linalg.norm(rel1 - exact)),
        "residual_form_II": float(np.linalg.norm(rel2 - exact)),
        "forms_gap": float(np.linalg.norm(rel1 - rel2)),
        "ratio_form_II": doi_mod.relative_ratio(f, inp.a, inp.k, "II"),
        "diff_op_norm": norms(exact).op,
    }
    return inp.record("a", "k"), results


def _profile_rows(profile, oracle):
    c = profile.centers
    return zip(profile.s_grid[:-1], profile.s_grid[1:], profile.density, oracle(c))


def cmd_ssf(args, inp: Inputs):
    oracle = ssf.ssf_oracle(inp.a, inp.b)
    flow = ssf.eigen_flow(inp.a, inp.k, args.steps)
    prof = ssf.ssf_from_flow(flow, args.bins, args.deposit)
    if args.format == "csv":
        return None, _csv(["s_lo", "s_hi", "xi_hat", "xi_oracle"], _profile_rows(prof, oracle))
    results = {
        "oracle": {"breakpoints": oracle.breakpoints, "values": oracle.values,
                   "weighted_l1": oracle.weighted_l1()},
        "profile": {"bins": args.bins, "steps": args.steps, "deposit": args.deposit,
                    "s_min": prof.s_grid[0], "s_max": prof.s_grid[-1],
                    "weighted_l1": prof.weighted_l1(), "imag_weighted_l1": prof.imag_weighted_l1()},
        "weighted_l1_distance": ssf.weighted_l1_distance(prof, oracle),
        "flagged_steps": len(flow.flagged),
    }
    return inp.record("a", "k"), results


def cmd_trace_check(args, inp: Inputs):
    if args.xi == "oracle":
        xi = ssf.ssf_oracle(inp.a, inp.b)
    else:
        xi = ssf.ssf_from_flow(ssf.eigen_flow(inp.a, inp.k, args.steps), args.bins, args.deposit)
    tc = ssf.trace_formula_check(inp.f, inp.a, inp.k, xi)
    results = {"xi": args.xi, "lhs": tc.lhs, "rhs": tc.rhs, "error": tc.abs_error,
               "relative_error": tc.abs_error / (1.0 + abs(tc.lhs))}
    return inp.record("a", "k"), results


def cmd_multnorm(args, inp: Inputs):
    n = args.n
    if args.symbol == "triangular":
        M = np.triu(np.ones((n, n)))
        rec = {"symbol": "triangular", "n": n}
    elif args.symbol == "sign":
        M = np.array([[1.0, 1.0], [1.0, -1.0]])
        rec = {"symbol": "sign"}
    elif args.symbol == "const":
        M = constant_symbol(args.value).sample(np.arange(n, dtype=float), np.arange(n, dtype=float))
        rec = {"symbol": "const", "value": args.value, "n": n}
    else:
        symbol = _symbol(args.symbol, inp.f)
        M = schur.sample_symbol(symbol, eigh(inp.b).lambdas, eigh(inp.a).lambdas).entries
        rec = inp.record("a", "k")
        rec["symbol"] = args.symbol
    lo = schur.norm_lower(M, args.probes, args.seed)
    cert = schur.norm_upper(M, args.tol, method=args.method)
    lo = min(max(lo, cert.dual_bound), cert.bound)
    results = {"lo": lo, "hi": cert.bound, "gap": cert.bound - lo, "converged": cert.converged,
               "iterations": cert.iterations, "certificate_residual": cert.residual(M),
               "shape": list(M.shape), "method": args.method}
    return rec, results


def cmd_probe(args, inp: Inputs):
    f = inp.f
    cr = perturb.commutator_probe(f, inp.a, inp.b, inp.r)
    dil = perturb.dilation_check(f, inp.a, inp.b, inp.r)
    cay = perturb.cayley_commutator_identity(inp.a, inp.b, inp.r)
    chain = perturb.chain_identity(inp.a, inp.k)
    results = {
        "ratio_b": cr.ratio_b, "ratio_c": cr.ratio_c,
        "flagged_b": cr.flagged_b, "flagged_c": cr.flagged_c,
        "dilation_gap": max(dil.numerator_gap, dil.denominator_gap),
        "cayley_residual": cay.residual, "cayley_scale": cay.scale,
        "chain_residual": chain.residual, "chain_s1_norm": chain.s1_norm,
        "note": "ratios are one-sided evidence: they can refute but not certify a Lipschitz estimate",
    }
    if args.bound:
        Ea, Eb = eigh(inp.a), eigh(inp.b)
        grid = np.concatenate([Ea.lambdas, Eb.lambdas])
        M = schur.sample_symbol(weight_symbol(f, "I"), grid, grid)
        results["multiplier_hi"] = schur.norm_upper(M, args.tol).bound
    return inp.record("a", "k", "r"), results


def cmd_flow(args, inp: Inputs):
    flow = ssf.eigen_flow(inp.a, inp.k, args.steps)
    if args.format == "csv":
        rows = ((t, j, flow.lambda_paths[k, j], flow.weights[k, j])
                for k, t in enumerate(flow.t_grid) for j in range(flow.n))
        return None, _csv(["t", "j", "lambda", "weight"], rows)
    results = {"t": flow.t_grid, "lambda": flow.lambda_paths, "weight": flow.weights,
               "flagged": list(flow.flagged), "lipschitz_excess": flow.lipschitz_excess(),
               "weight_sum_error": flow.weight_sum_error()}
    return inp.record("a", "k"), results


HANDLERS = {
    "gen": cmd_gen, "doi": cmd_doi, "diff": cmd_diff, "ssf": cmd_ssf,
    "trace-check": cmd_trace_check, "multnorm": cmd_multnorm, "probe": cmd_probe, "flow": cmd_flow,
}


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--n", type=int, default=4)
    common.add_argument("--steps", type=int, default=1000)
    common.add_argument("--bins", type=int, default=1000)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--f", default="resolvent:z=0+1i", help="function spec, e.g. 'rational:num=1;den=1,0,1'")
    common.add_argument("--a", help="matrix file for A")
    common.add_argument("--b", help="matrix file for B (K = B - A)")
    common.add_argument("--k", help="matrix file for K")
    common.add_argument("--r", help="matrix file for R / Q")
    common.add_argument("--family", choices=ensembles.FAMILIES, default="gaussian")
    common.add_argument("--k-size", type=float, default=0.5)
    parser = argparse.ArgumentParser(prog="doilab", description="Double operator integral laboratory.")
    parser.add_argument("--version", action="version", version=f"doilab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("gen", parents=[common], help="generate a seeded instance")
    p.add_argument("--write-matrices", metavar="DIR", help="also write a/k/b/r matrix files to DIR")
    p = sub.add_parser("doi", parents=[common], help="double operator integral of a symbol against R")
    p.add_argument("--symbol", choices=("dd", "I", "II", "resolvent"), default="I")
    sub.add_parser("diff", parents=[common], help="representation residuals for f(B) - f(A)")
    for name, helptext in (("ssf", "spectral shift function, oracle and flow profile"),
                           ("trace-check", "trace formula check")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--deposit", choices=("segment", "point"), default="segment")
        if name == "trace-check":
            p.add_argument("--xi", choices=("oracle", "profile"), default="oracle")
    p = sub.add_parser("multnorm", parents=[common], help="Schur multiplier norm bounds")
    p.add_argument("--symbol", choices=("dd", "I", "II", "resolvent", "triangular", "sign", "const"),
                   default="I")
    p.add_argument("--value", type=float, default=1.0, help="value of the constant symbol")
    p.add_argument("--probes", type=int, default=16)
    p.add_argument("--method", choices=("scaling", "projection"), default="scaling")
    p = sub.add_parser("probe", parents=[common], help="commutator ratios and identities")
    p.add_argument("--bound", action="store_true", help="also bound the multiplier norm of D_I f")
    sub.add_parser("flow", parents=[common], help="eigenvalue trajectories (CSV: t, j, lambda, weight)")
    return parser


def run_command(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.n < 1:
            raise CommandError("--n must be positive")
        if args.steps < 2 or args.bins < 3:
            raise CommandError("--steps must be >= 2 and --bins >= 3")
        if args.tol <= 0:
            raise CommandError("--tol must be positive")
        inp = Inputs(args)
        record, results = HANDLERS[args.command](args, inp)
        if record is None:
            text = results
        else:
            flags = {k: getattr(args, k) for k in ("n", "steps", "bins", "tol", "family", "k_size")}
            flags.update({k: v for k, v in vars(args).items()
                          if k in ("symbol", "deposit", "xi", "probes", "method", "value", "bound")})
            report = {"command": args.command, "version": __version__, "seed": args.seed,
                      "inputs_digest": _digest({"inputs": record, "flags": flags}),
                      "inputs": {"flags": flags, "f": record.get("f")}, "results": results}
            text = _dumps(report)
        _emit(text, args.out)
        return 0
    except Exception as exc:  # report every module error as a JSON object
        err = {"command": args.command, "version": __version__, "seed": args.seed,
               "error": {"type": type(exc).__name__, "message": str(exc)}}
        sys.stdout.write(_dumps(err))
        return 1


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
