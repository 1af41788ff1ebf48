"""Scenario-driven command line front end.

A scenario is a sectioned key = value file (INI syntax) with DSL expressions
in double quotes::

    [scenario]
    kind = embed            ; embed | verify | family-check | phi | phi2d
    order = 6
    mode = exact            ; exact | float
    tolerance = 0

    [metric]
    g11 = "1 + x2^2"
    g22 = "1"
    g33 = "1"

Subcommands mirror the kinds and accept --scenario plus overrides.  Exit
codes: 0 all verdicts pass, 1 a verdict fails, 2 input or parse error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import families as fam_mod
from . import hodge as hodge_mod
from .dsl import ParseError, eval_jet, parse
from .families import FamilyError, MetricFamily, check_slag_family, family_from_entries
from .jets import EXACT, FLOAT, Jet, JetError, X1, X2, X3
from .solver import (
    SolverError,
    check_structure,
    dump_structure,
    load_structure,
    solve_calabi_yau,
)

SCHEMA_VERSION = 1
KINDS = ("embed", "verify", "family-check", "phi", "phi2d")
_TOL_ENV = "SLAGCY_TOLERANCE"


class ScenarioError(Exception):
    """Unusable scenario file; maps to exit code 2."""


@dataclass
class Scenario:
    kind: str
    order: int = 6
    mode: str = FLOAT
    grid: int = 256
    t_samples: int = 21
    tolerance: object = None
    phi_tolerance: float = 1e-8
    metric: dict = field(default_factory=dict)      # key -> DSL text
    family: dict = field(default_factory=dict)
    structure_path: str | None = None
    dump_path: str | None = None
    json_path: str | None = None
    csv_path: str | None = None

    def echo(self) -> dict:
        out = {
            "kind": self.kind,
            "order": self.order,
            "mode": self.mode,
            "grid": self.grid,
            "t_samples": self.t_samples,
            "tolerance": _jsonable(self.tolerance),
            "phi_tolerance": self.phi_tolerance,
        }
        if self.metric:
            out["metric"] = dict(sorted(self.metric.items()))
        if self.family:
            out["family"] = dict(sorted(self.family.items()))
        return out


@dataclass
class RunReport:
    scenario: dict
    verdicts: list
    residuals: dict | None = None
    family_check: dict | None = None
    phi: dict | None = None
    timings: dict = field(default_factory=dict)

    def all_passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts)

    def as_dict(self, deterministic: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "kind": self.scenario.get("kind"),
            "scenario": self.scenario,
            "verdicts": self.verdicts,
            "residuals": self.residuals,
            "family_check": self.family_check,
            "phi": self.phi,
        }
        if not deterministic:
            out["timings"] = self.timings
        return out


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


# -- scenario parsing ------------------------------------------------------------


def _unquote(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == '"' and value[-1] == '"':
        return value[1:-1]
    return value


def _default_tolerance(mode: str):
    env = os.environ.get(_TOL_ENV)
    if env is not None:
        try:
            return Fraction(env) if mode == EXACT else float(env)
        except ValueError as exc:
            raise ScenarioError(f"bad {_TOL_ENV} value {env!r}") from exc
    return Fraction(0) if mode == EXACT else 1e-12


def load_scenario(path) -> Scenario:
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=(";", "#"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ScenarioError(f"malformed scenario {path}: {exc}") from exc
    if not parser.has_section("scenario"):
        raise ScenarioError("scenario file needs a [scenario] section")
    sect = parser["scenario"]
    kind = sect.get("kind", "").strip()
    if kind not in KINDS:
        raise ScenarioError(f"kind must be one of {KINDS}, got {kind!r}")
    mode = sect.get("mode", FLOAT).strip()
    if mode not in (EXACT, FLOAT):
        raise ScenarioError(f"mode must be 'exact' or 'float', got {mode!r}")
    sc = Scenario(kind=kind, mode=mode)
    try:
        sc.order = sect.getint("order", sc.order)
        sc.grid = sect.getint("grid", sc.grid)
        sc.t_samples = sect.getint("t_samples", sc.t_samples)
        sc.phi_tolerance = sect.getfloat("phi_tolerance", sc.phi_tolerance)
    except ValueError as exc:
        raise ScenarioError(f"bad numeric value in [scenario]: {exc}") from exc
    tol_text = sect.get("tolerance", "").strip()
    if tol_text:
        try:
            sc.tolerance = Fraction(tol_text) if mode == EXACT else float(tol_text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ScenarioError(f"bad tolerance {tol_text!r}") from exc
    else:
        sc.tolerance = _default_tolerance(mode)

    if parser.has_section("metric"):
        sc.metric = {k: _unquote(v) for k, v in parser["metric"].items()}
    if parser.has_section("family"):
        sc.family = {k: _unquote(v) for k, v in parser["family"].items()}
    if parser.has_section("input"):
        sc.structure_path = _unquote(parser["input"].get("structure", "")) or None
    if parser.has_section("output"):
        out = parser["output"]
        sc.json_path = _unquote(out.get("json", "")) or None
        sc.csv_path = _unquote(out.get("csv", "")) or None
        sc.dump_path = _unquote(out.get("dump", "")) or None
    _validate_required(sc)
    return sc


def _validate_required(sc: Scenario) -> None:
    if sc.kind == "embed" and not sc.metric:
        raise ScenarioError("embed scenarios need a [metric] section")
    if sc.kind == "verify" and not sc.structure_path:
        raise ScenarioError("verify scenarios need [input] structure = <path>")
    if sc.kind in ("family-check", "phi", "phi2d") and not sc.family:
        raise ScenarioError(f"{sc.kind} scenarios need a [family] section")


def _parse_expr(text: str, where: str):
    try:
        return parse(text)
    except ParseError as exc:
        raise ScenarioError(f"in {where}: {exc}") from exc


def _metric_jets(sc: Scenario):
    base = None
    gens = {
        "x1": Jet.variable(X1, sc.order, sc.mode, base),
        "x2": Jet.variable(X2, sc.order, sc.mode, base),
        "x3": Jet.variable(X3, sc.order, sc.mode, base),
        "t": Jet.constant(0, sc.order, sc.mode, base),
    }
    g = [[None] * 3 for _ in range(3)]
    for i in range(1, 4):
        for j in range(i, 4):
            key = f"g{i}{j}"
            text = sc.metric.get(key)
            if text is None:
                if i == j:
                    raise ScenarioError(f"[metric] is missing {key}")
                text = "0"
            expr = _parse_expr(text, f"[metric] {key}")
            try:
                jet = eval_jet(expr, gens)
            except JetError as exc:
                raise ScenarioError(f"[metric] {key}: {exc}") from exc
            g[i - 1][j - 1] = jet
            g[j - 1][i - 1] = jet
    return g


def _family_from_scenario(sc: Scenario) -> MetricFamily:
    spec = dict(sc.family)
    constructor = spec.pop("constructor", "direct").strip()
    dim = int(spec.pop("dim", "3"))
    t_min = float(spec.pop("t_min", "0"))
    t_max = float(spec.pop("t_max", "1"))
    periodic_text = spec.pop("periodic", "")
    if periodic_text:
        flags = tuple(v.strip().lower() in ("1", "true", "yes") for v in periodic_text.split())
        if len(flags) != dim:
            raise ScenarioError("periodic needs one flag per x-variable")
    else:
        flags = None
    name = spec.pop("name", constructor)
    try:
        if constructor == "direct":
            entries = {k: _parse_expr(v, f"[family] {k}") for k, v in spec.items()}
            return family_from_entries(entries, dim=dim, t_range=(t_min, t_max),
                                       periodic=flags, name=name)
        if constructor == "block":
            u = _parse_expr(spec.pop("u", "0"), "[family] u")
            q = _parse_expr(spec.pop("q", "1"), "[family] q")
            qm = [[_parse_expr(spec.pop("q11", "1"), "[family] q11"),
                   _parse_expr(spec.pop("q12", "0"), "[family] q12")], [None, None]]
            qm[1][0] = qm[0][1]
            qm[1][1] = _parse_expr(spec.pop("q22", "1"), "[family] q22")
            return fam_mod.make_block_family(u, qm, q, t_range=(t_min, t_max), name=name)
        if constructor == "collapse22":
            w = _parse_expr(spec.pop("w", "0"), "[family] w")
            t1 = float(spec.pop("t1", "1"))
            return fam_mod.make_collapsing_22(w, t1, t_range=(t_min, t_max), name=name)
        if constructor == "collapse21":
            w = _parse_expr(spec.pop("w", "0"), "[family] w")
            v = _parse_expr(spec.pop("v", "0"), "[family] v")
            t1 = float(spec.pop("t1", "1"))
            return fam_mod.make_collapsing_21(w, v, t1, t_range=(t_min, t_max), name=name)
        if constructor == "cone":
            f = _parse_expr(spec.pop("f", "1"), "[family] f")
            return fam_mod.make_cone_family(f, t_range=(t_min, t_max), name=name)
    except FamilyError as exc:
        raise ScenarioError(f"[family]: {exc}") from exc
    raise ScenarioError(f"unknown family constructor {constructor!r}")


# -- scenario execution -------------------------------------------------------------


def _verdict(name: str, value, tolerance) -> dict:
    if isinstance(value, Fraction) and isinstance(tolerance, (int, Fraction)):
        passed = value <= tolerance
    else:
        passed = float(value) <= float(tolerance)
    return {"name": name, "passed": bool(passed),
            "value": _jsonable(value), "tolerance": _jsonable(tolerance)}


def _residual_verdicts(report, tol) -> tuple:
    residuals = {k: _jsonable(v) for k, v in report.as_dict().items()}
    residuals["details"] = {k: _jsonable(v) for k, v in report.details.items()}
    residuals["effective_orders"] = dict(report.effective_orders)
    verdicts = [_verdict(name, value, tol) for name, value in report.as_dict().items()]
    return residuals, verdicts


def _run_embed(sc: Scenario) -> RunReport:
    g = _metric_jets(sc)
    t0 = time.perf_counter()
    structure = solve_calabi_yau(g, sc.order)
    solve_s = time.perf_counter() - t0
    report = check_structure(structure)
    residuals, verdicts = _residual_verdicts(report, sc.tolerance)
    if sc.dump_path:
        _atomic_write(sc.dump_path, dump_structure(structure))
    return RunReport(scenario=sc.echo(), verdicts=verdicts, residuals=residuals,
                     timings={"solve_s": solve_s})


def _run_verify(sc: Scenario) -> RunReport:
    try:
        with open(sc.structure_path, "r", encoding="utf-8") as fh:
            structure = load_structure(fh.read())
    except OSError as exc:
        raise ScenarioError(f"cannot read structure {sc.structure_path}: {exc}") from exc
    except SolverError as exc:
        raise ScenarioError(f"bad structure dump: {exc}") from exc
    report = check_structure(structure)
    residuals, verdicts = _residual_verdicts(report, sc.tolerance)
    return RunReport(scenario=sc.echo(), verdicts=verdicts, residuals=residuals)


def _run_family_check(sc: Scenario) -> RunReport:
    fam = _family_from_scenario(sc)
    tol = float(sc.tolerance)
    report = check_slag_family(fam, n=sc.grid, nt=max(2, min(sc.t_samples, 17)), tol=tol)
    verdicts = [
        _verdict("det_t_independence", report.det_t_independence, tol),
        _verdict("det_x1_independence", report.det_x1_independence, tol),
        _verdict("closure_residual", report.closure_residual, tol),
    ]
    return RunReport(scenario=sc.echo(), verdicts=verdicts,
                     family_check=_jsonable(report.as_dict()))


def _phi_payload(curve, sc: Scenario) -> dict:
    return {
        "t": _jsonable(curve.t),
        "phi": _jsonable(curve.phi),
        "spread": curve.spread(),
        "classification": curve.classification(float(sc.tolerance)),
        "integrals": _jsonable(curve.integrals),
    }


def _run_phi(sc: Scenario) -> RunReport:
    fam = _family_from_scenario(sc)
    tol = float(sc.tolerance)
    ts = np.linspace(fam.t_range[0], fam.t_range[1], sc.t_samples)
    check = check_slag_family(fam, n=min(sc.grid, 128), nt=max(2, min(sc.t_samples, 9)), tol=tol)
    verdicts = [_verdict("family_admissible",
                         max(check.det_t_independence, check.det_x1_independence,
                             check.closure_residual), tol)]
    if not check.passed():
        return RunReport(scenario=sc.echo(), verdicts=verdicts,
                         family_check=_jsonable(check.as_dict()))
    curve = hodge_mod.phi_curve(fam, ts, n=sc.grid, check=False)
    if sc.csv_path:
        _atomic_write(sc.csv_path, curve.to_csv_text())
    return RunReport(scenario=sc.echo(), verdicts=verdicts,
                     family_check=_jsonable(check.as_dict()),
                     phi=_phi_payload(curve, sc))


def _run_phi2d(sc: Scenario) -> RunReport:
    fam = _family_from_scenario(sc)
    if fam.dim != 2:
        raise ScenarioError("phi2d needs a 2-dimensional family")
    tol = float(sc.tolerance)
    ts = np.linspace(fam.t_range[0], fam.t_range[1], sc.t_samples)
    check = check_slag_family(fam, n=min(sc.grid, 128), nt=max(2, min(sc.t_samples, 9)), tol=tol)
    verdicts = [_verdict("family_admissible",
                         max(check.det_t_independence, check.det_x1_independence,
                             check.closure_residual), tol)]
    if not check.passed():
        return RunReport(scenario=sc.echo(), verdicts=verdicts,
                         family_check=_jsonable(check.as_dict()))
    curve = hodge_mod.phi_2d(fam, ts, n=min(sc.grid, 256), check=False)
    verdicts.append(_verdict("phi_constant_equal_1",
                             float(np.max(np.abs(curve.phi - 1.0))), sc.phi_tolerance))
    if sc.csv_path:
        _atomic_write(sc.csv_path, curve.to_csv_text())
    return RunReport(scenario=sc.echo(), verdicts=verdicts,
                     family_check=_jsonable(check.as_dict()),
                     phi=_phi_payload(curve, sc))


_RUNNERS = {
    "embed": _run_embed,
    "verify": _run_verify,
    "family-check": _run_family_check,
    "phi": _run_phi,
    "phi2d": _run_phi2d,
}


def _execute(sc: Scenario) -> RunReport:
    t0 = time.perf_counter()
    try:
        report = _RUNNERS[sc.kind](sc)
    except (FamilyError, SolverError, JetError) as exc:
        raise ScenarioError(str(exc)) from exc
    report.timings["total_s"] = time.perf_counter() - t0
    return report


def run_scenario(path, overrides: dict | None = None) -> RunReport:
    """Load, execute and report one scenario file."""
    sc = load_scenario(path)
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(sc, key, value)
    return _execute(sc)


# -- report emission ------------------------------------------------------------------


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def report_json(report: RunReport, deterministic: bool = False) -> str:
    return json.dumps(report.as_dict(deterministic), indent=2, sort_keys=True) + "\n"


def emit_report(report: RunReport, json_path=None, csv_path=None,
                deterministic: bool = False) -> None:
    """Write the JSON (and, for phi kinds, CSV) artifacts atomically."""
    if json_path:
        _atomic_write(json_path, report_json(report, deterministic))
    if csv_path is not None:
        lines = ["t,phi,g11_int,g22_int,g33_int"]
        phi = report.phi or {}
        ts = phi.get("t") or []
        phis = phi.get("phi") or []
        ints = phi.get("integrals")
        for k in range(len(ts)):
            cols = [ts[k], phis[k]]
            cols.extend(ints[k] if ints is not None else [float("nan")] * 3)
            lines.append(",".join(format(float(c), ".17g") for c in cols))
        _atomic_write(csv_path, "\n".join(lines) + "\n")


# -- entry point ------------------------------------------------------------------------


def _build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slagcy",
                                 description="Calabi-Yau structures around special "
                                             "Lagrangian tori: solve, verify, and "
                                             "measure the semi-flat obstruction.")
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--scenario", required=True, help="scenario file path")
        p.add_argument("--order", type=int, help="override truncation order")
        p.add_argument("--grid", type=int, help="override grid resolution")
        p.add_argument("--mode", choices=(EXACT, FLOAT), help="override scalar mode")
        p.add_argument("--t-samples", type=int, dest="t_samples")
        p.add_argument("--out-json", dest="json_path", help="write the JSON report here")
        p.add_argument("--out-csv", dest="csv_path", help="write the phi CSV here")
        p.add_argument("--dump", dest="dump_path", help="write a structure dump (embed)")
        p.add_argument("--deterministic", action="store_true",
                       help="omit volatile fields (timings) from the JSON report")
    return ap


def main(argv=None) -> int:
    args = _build_arg_parser().parse_args(argv)
    try:
        sc = load_scenario(args.scenario)
        if sc.kind != args.kind:
            raise ScenarioError(
                f"scenario kind {sc.kind!r} does not match subcommand {args.kind!r}")
        for key in ("order", "grid", "mode", "t_samples", "dump_path"):
            value = getattr(args, key)
            if value is not None:
                setattr(sc, key, value)
        report = _execute(sc)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    json_path = args.json_path or sc.json_path
    csv_path = args.csv_path or sc.csv_path
    wants_csv = csv_path and args.kind in ("phi", "phi2d")
    emit_report(report, json_path=json_path, csv_path=csv_path if wants_csv else None,
                deterministic=args.deterministic)
    if not json_path:
        sys.stdout.write(report_json(report, args.deterministic))
    for v in report.verdicts:
        state = "pass" if v["passed"] else "FAIL"
        print(f"[{state}] {v['name']}: {v['value']} (tol {v['tolerance']})",
              file=sys.stderr)
    return 0 if report.all_passed() else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
