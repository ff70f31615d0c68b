"""Command-line front end: ``condual VERB --problem FILE --out DIR``.

Exit codes: 0 all checks pass, 1 some check fails, 2 the problem file is
invalid, 3 the function violates properness or convexity preconditions.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bochner import FiniteMeasureSpace, measure_algebra
from .conjugate import (
    GridSpec,
    NotProperError,
    check_duality,
    check_proper,
    conjugate_brute,
    conjugate_fast,
    default_dual_grid,
    sample,
    tol_disc,
    write_grid_csv,
    young_fenchel_slack,
)
from .functions import FunctionDescriptor
from .lsc import NotConvexError, cond_extend, geometric_schedule, is_lsc_at
from .metric import CondVector
from .pairing import DUAL_NORM, DualPairConfig
from .selftest import run_all

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_PROPER = 0, 1, 2, 3
ORACLE_TOL = 1e-9

_num = {"oneOf": [{"type": "number"}, {"enum": ["inf", "-inf", "+inf"]}]}
_vec = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_axis = {"type": "array", "prefixItems": [{"type": "number"}, {"type": "number"}, {"type": "integer", "minimum": 2}],
         "minItems": 3, "maxItems": 3}
_grid = {"type": "array", "items": _axis, "minItems": 1, "maxItems": 3}
_component = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["quadratic", "norm", "indicator", "max_affine", "pwa1d", "constant"]},
        "Q": {}, "b": {}, "c": {}, "alpha": {"type": "number"}, "p": {"enum": [1, 2, "1", "2", "inf"]},
        "n": {"type": "integer"}, "lo": {}, "hi": {}, "boundary": _num, "A": {}, "xs": {}, "vs": {},
        "value": _num,
    },
    "additionalProperties": False,
}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "algebra": {"type": "object", "required": ["d"], "additionalProperties": False,
                    "properties": {"d": {"type": "integer", "minimum": 1}}},
        "measure_space": {"type": "object", "required": ["labels", "weights"], "additionalProperties": False,
                          "properties": {"labels": {"type": "array", "minItems": 1},
                                         "weights": {"type": "array", "items": {"type": "number", "minimum": 0}}}},
        "dual_pair": {
            "type": "object", "required": ["n"], "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1, "maximum": 3},
                "pairing": {"enum": ["dot", "weighted"]},
                "weight": {"type": "array", "items": _vec},
                "primal_norm": {"enum": sorted(DUAL_NORM)},
                "dual_norm": {"enum": sorted(DUAL_NORM) + ["weighted"]},
            },
        },
        "function": {
            "type": "object", "required": ["components"], "additionalProperties": False,
            "properties": {
                "components": {"oneOf": [_component, {"type": "array", "items": _component, "minItems": 1}]},
                "overrides": {"type": "array", "items": {
                    "type": "object", "required": ["point", "values"], "additionalProperties": False,
                    "properties": {"point": _vec, "values": {"oneOf": [_num, {"type": "array", "items": _num}]}}}},
                "box": {"type": "array", "items": _vec, "minItems": 2, "maxItems": 2},
            },
        },
        "grids": {"type": "object", "required": ["primal"], "additionalProperties": False,
                  "properties": {"primal": _grid, "dual": _grid}},
        "schedule": {"type": "object", "additionalProperties": False,
                     "properties": {"radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                                              "minItems": 1},
                                    "seed": {"type": "integer"},
                                    "budget": {"type": "integer", "minimum": 0},
                                    "tests": {"type": "array", "items": _vec}}},
        "test_points": {"type": "array", "items": _vec, "minItems": 1},
        "extend_points": {"type": "array", "items": {"type": "array", "items": _vec, "minItems": 1}, "minItems": 1},
        "tolerances": {"type": "object", "additionalProperties": False,
                       "properties": {"duality": {"type": ["number", "null"]},
                                      "oracle": {"type": "number", "minimum": 0},
                                      "lsc": {"type": "number", "minimum": 0},
                                      "young_fenchel": {"type": "number", "minimum": 0}}},
        "method": {"enum": ["fast", "brute"]},
        "description": {"type": "string"},
    },
    "required": ["dual_pair", "function", "grids"],
    "oneOf": [{"required": ["algebra"]}, {"required": ["measure_space"]}],
    "additionalProperties": False,
}


class SchemaError(ValueError):
    pass


def _json_num(t):
    t = float(t)
    if t == math.inf:
        return "inf"
    if t == -math.inf:
        return "-inf"
    return t


def _json_arr(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 0:
        return _json_num(a)
    return [_json_arr(r) for r in a]


class Problem:
    """A validated problem file with its defaults resolved."""

    def __init__(self, data: dict, seed: int | None = None):
        try:
            jsonschema.validate(data, PROBLEM_SCHEMA)
        except jsonschema.ValidationError as e:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise SchemaError(f"{path}: {e.message}") from None
        self.data = data
        self.notes: list[str] = []
        if "measure_space" in data:
            ms = data["measure_space"]
            try:
                self.space = FiniteMeasureSpace(tuple(ms["labels"]), tuple(ms["weights"]))
            except (ValueError, TypeError) as e:
                raise SchemaError(f"measure_space: {e}") from None
            self.d, _ = measure_algebra(self.space)
        else:
            self.space = None
            self.d = data["algebra"]["d"]
        dp = data["dual_pair"]
        self.n = dp["n"]
        try:
            self.config = DualPairConfig.from_key(
                self.n, dp.get("pairing", "dot"), dp.get("primal_norm", "euclidean"),
                dp.get("dual_norm"), dp.get("weight"))
            self.f = FunctionDescriptor.from_json(data["function"], self.n, self.d)
            self.primal = GridSpec.from_json(data["grids"]["primal"])
            self.dual = GridSpec.from_json(data["grids"]["dual"]) if "dual" in data["grids"] else None
        except (ValueError, TypeError, KeyError) as e:
            raise SchemaError(str(e)) from None
        if self.primal.n != self.n or (self.dual is not None and self.dual.n != self.n):
            raise SchemaError(f"grids must have {self.n} axes")
        sch = data.get("schedule", {})
        self.seed = sch.get("seed", 0) if seed is None else seed
        self.budget = sch.get("budget", 64)
        self.radii = np.asarray(sch["radii"], dtype=np.float64) if "radii" in sch else geometric_schedule()
        self.tests = sch.get("tests")
        tol = data.get("tolerances", {})
        self.tol_duality = tol.get("duality")
        self.tol_oracle = tol.get("oracle", ORACLE_TOL)
        self.tol_lsc = tol.get("lsc", 1e-9)
        self.tol_yf = tol.get("young_fenchel", 1e-12)
        self.method = data.get("method", "fast")
        if self.config.weight is not None and not np.array_equal(
                self.config.matrix, np.diag(np.diag(self.config.matrix))):
            if self.method == "fast":
                self.notes.append("non-diagonal pairing: conjugation falls back to brute force")
            self.method = "brute"

    def test_points(self) -> np.ndarray:
        if "test_points" in self.data:
            pts = np.asarray(self.data["test_points"], dtype=np.float64)
            if pts.shape[1] != self.n:
                raise SchemaError(f"test points must have {self.n} coordinates")
            return pts
        self.notes.append("test_points defaulted to 11 points per axis across the primal box")
        axes = [np.linspace(lo, hi, 11) for lo, hi, _ in self.primal.axes]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def dual_grid(self, gf) -> GridSpec:
        if self.dual is not None:
            return self.dual
        g = default_dual_grid(gf)
        self.notes.append(f"dual grid defaulted from finite-difference slopes: {g.to_json()}")
        return g

    def resolved(self) -> dict:
        out = {
            "d": self.d,
            "n": self.n,
            "pairing": "dot" if self.config.weight is None else "weighted",
            "primal_norm": self.config.primal_norm,
            "dual_norm": self.config.dual_norm,
            "primal_grid": self.primal.to_json(),
            "method": self.method,
            "seed": self.seed,
            "tolerances": {"duality": "tol_disc = L*h + 1e-9" if self.tol_duality is None else self.tol_duality,
                           "oracle": self.tol_oracle, "lsc": self.tol_lsc, "young_fenchel": self.tol_yf},
        }
        if self.space is not None:
            out["measure_space"] = self.space.to_json()
            out["null_mask"] = (~self.space.positive).tolist()
        return out


def _truncation_warning(gf, dual: GridSpec, problem: Problem) -> None:
    lo, hi = dual.lo, dual.hi
    vals = gf.values.reshape(gf.grid.shape + (gf.d,))
    for ax in range(gf.n):
        v = np.moveaxis(vals, ax, 0)
        fin = np.isfinite(v[1:]) & np.isfinite(v[:-1])
        if not fin.any():
            continue
        s = (v[1:][fin] - v[:-1][fin]) / gf.grid.spacing[ax]
        if s.min() < lo[ax] or s.max() > hi[ax]:
            msg = (f"dual axis {ax} [{lo[ax]}, {hi[ax]}] does not cover the slope range "
                   f"[{s.min()}, {s.max()}]; conjugate values may be truncated")
            problem.notes.append("warning: " + msg)
            print("warning: " + msg, file=sys.stderr)


def _check(name: str, ok: bool, **detail) -> dict:
    return {"name": name, "status": "PASS" if ok else "FAIL", **detail}


def cmd_conjugate(problem: Problem, out: Path, oracle: bool, threads: int | None) -> dict:
    gf = sample(problem.f, problem.primal)
    dual = problem.dual_grid(gf)
    _truncation_warning(gf, dual, problem)
    cfg = problem.config
    if problem.method == "fast":
        fs = conjugate_fast(gf, dual, cfg, threads)
    else:
        fs = conjugate_brute(gf, dual, cfg)
    write_grid_csv(fs, out / "conjugate.csv")
    slack = young_fenchel_slack(gf, fs, cfg)
    checks = [_check("young-fenchel", slack >= -problem.tol_yf, min_slack=_json_num(slack))]
    if oracle:
        ref = fs if problem.method == "brute" else conjugate_brute(gf, dual, cfg)
        fin = np.isfinite(ref.values) | np.isfinite(fs.values)
        same_inf = np.array_equal(np.isinf(ref.values), np.isinf(fs.values))
        diff = float(np.abs(ref.values[fin] - fs.values[fin]).max()) if same_inf and fin.any() else (
            0.0 if same_inf else math.inf)
        print(f"oracle: max |fast - brute| = {diff!r}")
        checks.append(_check("oracle", diff <= problem.tol_oracle, max_abs_diff=_json_num(diff)))
    return {"checks": checks, "outputs": {"csv": "conjugate.csv", "dual_grid": dual.to_json()}}


def cmd_check_duality(problem: Problem, out: Path, oracle: bool, threads: int | None) -> dict:
    gf = sample(problem.f, problem.primal)
    dual = problem.dual_grid(gf)
    _truncation_warning(gf, dual, problem)
    pts = problem.test_points()
    tol = problem.tol_duality
    if tol is None:
        tol = tol_disc(problem.f, problem.primal, dual)
    rep = check_duality(problem.f, pts, problem.primal, dual, tol, problem.config, problem.method)
    rows = []
    for t in range(len(pts)):
        rows.append({
            "point": pts[t].tolist(),
            "value": _json_arr(rep.values[t]),
            "residual": _json_arr(rep.residual[t]),
            "optimizer": _json_arr(rep.optimizer[t]),
            "status": list(rep.status[t]),
        })
    checks = [_check("duality", rep.passed, **rep.summary())]
    return {"checks": checks, "tolerance": _json_arr(rep.tol), "residuals": rows}


def cmd_check_lsc(problem: Problem, out: Path, oracle: bool, threads: int | None) -> dict:
    check_proper(sample(problem.f, problem.primal))
    pts = problem.test_points()
    rows, checks = [], []
    for x in pts:
        ok_w, gap_w = is_lsc_at(problem.f, x, problem.radii, problem.tol_lsc, "weak", problem.tests,
                                problem.budget, problem.seed)
        ok_n, gap_n = is_lsc_at(problem.f, x, problem.radii, problem.tol_lsc, "norm", None,
                                problem.budget, problem.seed)
        rows.append({"point": x.tolist(), "weak": {"lsc": ok_w, "gap": gap_w.to_json()},
                     "norm": {"lsc": ok_n, "gap": gap_n.to_json()}})
        checks.append(_check(f"lsc at {x.tolist()}", ok_w and ok_n))
        checks.append(_check(f"weak/norm agree at {x.tolist()}", ok_w == ok_n))
    return {"checks": checks, "schedule": {"radii": problem.radii.tolist(), "budget": problem.budget,
                                           "seed": problem.seed}, "points": rows}


def cmd_extend(problem: Problem, out: Path, oracle: bool, threads: int | None) -> dict:
    check_proper(sample(problem.f, problem.primal))
    if "extend_points" in problem.data:
        points = [CondVector(raw) for raw in problem.data["extend_points"]]
    else:
        points = [CondVector.constant(x, problem.d) for x in problem.test_points()]
        problem.notes.append("extend_points defaulted to the constant points at test_points")
    rows, checks = [], []
    for xc in points:
        if xc.values.shape != (problem.d, problem.n):
            raise SchemaError(f"extend point of shape {xc.values.shape}, need ({problem.d}, {problem.n})")
        val = cond_extend(problem.f, xc)
        rows.append({"point": xc.to_json(), "value": val.to_json()})
        if (xc.values == xc.values[0]).all():
            exact = problem.f(xc.values[0])
            ok = bool(np.all((val.values == exact) | (np.abs(val.values - exact) <= problem.tol_oracle)))
            if problem.f.lsc_known:
                checks.append(_check(f"extension at constant {xc.values[0].tolist()}", ok))
    return {"checks": checks, "points": rows}


def cmd_selftest(seed: int) -> dict:
    return {"checks": run_all(seed)}


COMMANDS = {
    "conjugate": cmd_conjugate,
    "check-duality": cmd_check_duality,
    "check-lsc": cmd_check_lsc,
    "extend": cmd_extend,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="condual", description="Conditional convex duality at finite scale.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in [*COMMANDS, "selftest"]:
        s = sub.add_parser(verb)
        s.add_argument("--problem", type=Path, required=verb != "selftest")
        s.add_argument("--out", type=Path, default=Path("condual-out"))
        s.add_argument("--oracle", action="store_true", help="also run the brute-force conjugate")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $CONDUAL_THREADS or 1)")
    return p


def _footer(report: dict) -> str:
    if "error" in report:
        return f"{report['command']}: {report['error']} error: {report['message']}"
    checks = report.get("checks", [])
    failed = [c["name"] for c in checks if c["status"] != "PASS"]
    head = f"{report['command']}: {len(checks) - len(failed)}/{len(checks)} checks PASS"
    return head if not failed else head + "; FAIL: " + ", ".join(failed)


def _write_report(report: dict, out: Path) -> None:
    report["footer"] = _footer(report)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, allow_nan=False)
        fh.write("\n")
    print(report["footer"])


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads
    if threads is None and os.environ.get("CONDUAL_THREADS"):
        threads = int(os.environ["CONDUAL_THREADS"])
    start = time.perf_counter()
    report: dict = {"command": args.verb, "flags": {"oracle": args.oracle, "seed": args.seed}}
    code = EXIT_OK
    try:
        if args.verb == "selftest":
            seed = 0 if args.seed is None else args.seed
            report["seed"] = seed
            report.update(cmd_selftest(seed))
        else:
            try:
                data = json.loads(args.problem.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as e:
                raise SchemaError(f"cannot read problem file: {e}") from None
            problem = Problem(data, args.seed)
            report["problem"] = args.problem.name
            args.out.mkdir(parents=True, exist_ok=True)
            body = COMMANDS[args.verb](problem, args.out, args.oracle, threads)
            report["resolved"] = problem.resolved()
            report["notes"] = problem.notes
            report.update(body)
    except SchemaError as e:
        print(f"error: invalid problem file: {e}", file=sys.stderr)
        report.update({"error": "schema", "message": str(e), "checks": []})
        _write_report(report, args.out)
        return EXIT_SCHEMA
    except (NotProperError, NotConvexError) as e:
        print(f"error: {e}", file=sys.stderr)
        report.update({"error": "precondition", "message": str(e), "checks": []})
        _write_report(report, args.out)
        return EXIT_PROPER
    if any(c["status"] != "PASS" for c in report.get("checks", [])):
        code = EXIT_FAIL
    _write_report(report, args.out)
    # timings stay out of the report so reruns are byte-identical
    print(f"elapsed {time.perf_counter() - start:.3f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
