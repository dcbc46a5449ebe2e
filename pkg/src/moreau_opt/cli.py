"""Command-line front end.

Exit codes: 0 success, 1 usage or parse error, 2 infeasible model,
3 numerical failure, 4 reference-value regressions failed.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import nano, usv
from .certify import certify
from .optimize import BoxDomain, grid_search, nelder_mead
from .planar import (
    SUM_NORM,
    Configuration,
    ControlBoundsError,
    ControlledVelocityModel,
    Coupling,
    OrientationError,
    Scaling,
    ScenarioSpec,
)
from .polytope import EmptySetError
from .regression import run_all
from .sweeping import (
    ControlSignal,
    Grid,
    InadmissibleStateError,
    NumericalFailure,
    first_contact,
    halfspace_sweep_path,
    refine_and_compare,
    simulate,
)

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERICAL, EXIT_REGRESSION = 0, 1, 2, 3, 4

_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "scenario",
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["usv", "nano", "custom"]},
        "n": {"type": "integer", "minimum": 2},
        "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "initial": {"type": "array", "items": _pair},
        "speeds": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "angles_deg": {"type": "array", "items": {"type": "number"}},
        "control_bounds": {
            "type": "object",
            "additionalProperties": False,
            "required": ["bounds"],
            "properties": {
                "bounds": {"type": "array", "items": _pair},
                "couplings": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["coeffs"],
                        "properties": {
                            "coeffs": {"type": "array", "items": {"type": "number"}},
                            "rhs": {"type": "number"},
                        },
                    },
                },
            },
        },
        "constraint": {"enum": ["sum_norm_polyhedron", "euclidean_pairs"]},
        "offset_override": {"type": ["number", "null"]},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["k"],
            "properties": {"k": {"type": "integer", "minimum": 1}, "T": {"type": "number", "exclusiveMinimum": 0}},
        },
        "cost": {"enum": ["quadratic_state_time"]},
    },
}


class UsageError(ValueError):
    pass


def _usv_doc() -> dict:
    d = usv.USV
    return {
        "kind": "usv",
        "n": 2,
        "radii": list(d.radii),
        "initial": [list(p) for p in d.initial],
        "speeds": list(d.speeds),
        "angles_deg": [d.heading_deg, d.heading_deg],
        "control_bounds": {"bounds": [[0.0, d.upper[0]], [0.0, d.upper[1]]], "couplings": []},
        "constraint": SUM_NORM,
        "offset_override": d.offset,
        "grid": {"k": 4096, "T": usv.optimal_horizon(*d.upper)},
        "cost": "quadratic_state_time",
    }


def _nano_doc() -> dict:
    e = nano.NANO
    s1, s2 = nano.nano_speeds(e)
    return {
        "kind": "nano",
        "n": 2,
        "radii": list(e.radii),
        "initial": [list(p) for p in e.initial],
        "speeds": [s1, s2],
        "angles_deg": [e.heading_deg, e.heading_deg],
        "control_bounds": {
            "bounds": [[0.0, e.u_max], [0.0, e.u_max]],
            "couplings": [{"coeffs": [1.0, -2.0], "rhs": 0.0}],
        },
        "constraint": SUM_NORM,
        "offset_override": None,
        "grid": {"k": 4096, "T": nano.horizon_product(s1, s2, e) / nano.REPORTED_U2},
        "cost": "quadratic_state_time",
    }


_DEFAULTS = {"usv": _usv_doc, "nano": _nano_doc}
_CUSTOM_REQUIRED = ("radii", "initial", "speeds", "angles_deg", "control_bounds")


def expand_scenario(doc: dict) -> dict:
    """Validate ``doc`` and fill frozen datasets; explicit keys override the defaults."""
    jsonschema.validate(doc, SCENARIO_SCHEMA)
    kind = doc["kind"]
    if kind in _DEFAULTS:
        full = _DEFAULTS[kind]()
        full.update(copy.deepcopy(doc))
    else:
        missing = [k for k in _CUSTOM_REQUIRED if k not in doc]
        if missing:
            raise UsageError(f"custom scenario is missing {', '.join(missing)}")
        full = {"constraint": SUM_NORM, "offset_override": None, "grid": {"k": 256}, "cost": "quadratic_state_time"}
        full.update(copy.deepcopy(doc))
        full.setdefault("n", len(full["radii"]))
        full["control_bounds"].setdefault("couplings", [])
    n = full["n"]
    for key in ("radii", "initial", "speeds", "angles_deg"):
        if len(full[key]) != n:
            raise UsageError(f"'{key}' must have {n} entries")
    if len(full["control_bounds"]["bounds"]) != n:
        raise UsageError(f"'control_bounds.bounds' must have {n} entries")
    for cp in full["control_bounds"]["couplings"]:
        cp.setdefault("rhs", 0.0)
    jsonschema.validate(full, SCENARIO_SCHEMA)
    return full


def dump_scenario(doc: dict) -> str:
    """Canonical serialization: sorted keys, two-space indent, trailing newline."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def spec_from_doc(doc: dict) -> ScenarioSpec:
    """Build the internal scenario; nano scenarios are scaled (see ``spec.units``)."""
    if doc["kind"] == "nano":
        L, tau = nano.LENGTH_UNIT, nano.LENGTH_UNIT / doc["speeds"][0]
    else:
        L, tau = 1.0, 1.0
    cb = doc["control_bounds"]
    model = ControlledVelocityModel(
        speeds=np.array(doc["speeds"]) * tau / L,
        angles=np.radians(doc["angles_deg"]),
        lower=[b[0] for b in cb["bounds"]],
        upper=[b[1] for b in cb["bounds"]],
        couplings=tuple(Coupling(tuple(c["coeffs"]), c.get("rhs", 0.0)) for c in cb["couplings"]),
    )
    off = doc.get("offset_override")
    return ScenarioSpec(
        model=model,
        initial=Configuration(np.array(doc["initial"], dtype=float) / L, np.array(doc["radii"], dtype=float) / L),
        constraint=doc["constraint"],
        offset_override=None if off is None else off / L,
        cost=doc["cost"],
        units=Scaling(L, tau),
        name=doc["kind"],
        time_weight=(tau / L) ** 2,
    )


def doc_from_spec(spec: ScenarioSpec, grid: dict) -> dict:
    """Inverse of ``spec_from_doc`` (physical units)."""
    L, tau = spec.units.length, spec.units.time
    m = spec.model
    return {
        "kind": spec.name,
        "n": spec.n,
        "radii": (spec.radii * L).tolist(),
        "initial": (spec.initial.positions * L).tolist(),
        "speeds": (m.speeds * L / tau).tolist(),
        "angles_deg": np.degrees(m.angles).tolist(),
        "control_bounds": {
            "bounds": [[float(a), float(b)] for a, b in zip(m.lower, m.upper)],
            "couplings": [{"coeffs": list(c.coeffs), "rhs": c.rhs} for c in m.couplings],
        },
        "constraint": spec.constraint,
        "offset_override": None if spec.offset_override is None else spec.offset_override * L,
        "grid": grid,
        "cost": spec.cost,
    }


def load_scenario(path) -> tuple[dict, ScenarioSpec]:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        full = expand_scenario(doc)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise UsageError(f"{path}: schema violation at {where}: {exc.message}") from exc
    return full, spec_from_doc(full)


def _parse_control(text: str | None, n: int) -> np.ndarray:
    if text is None:
        raise UsageError("--control is required")
    try:
        vals = np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise UsageError(f"cannot parse --control {text!r}") from exc
    if vals.size != n:
        raise UsageError(f"--control needs {n} magnitudes, got {vals.size}")
    return vals


def _horizon(args, doc, spec) -> float:
    T = args.T if getattr(args, "T", None) is not None else doc["grid"].get("T")
    if T is None:
        raise UsageError("horizon T is required (flag --T or grid.T in the scenario)")
    if not T > 0:
        raise UsageError("horizon must be positive")
    return T / spec.units.time


def _write(out, text: str):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_simulate(args) -> int:
    doc, spec = load_scenario(args.scenario)
    u = _parse_control(args.control, spec.n)
    k = args.k if args.k is not None else doc["grid"]["k"]
    T = _horizon(args, doc, spec)
    spec.model.check(u)
    traj = simulate(spec, ControlSignal.constant(u), Grid(T, k))
    _write(args.out, traj.rescaled(spec.units.length, spec.units.time).to_csv())
    return EXIT_OK


def _closed_form_report(kind: str, method: str) -> dict:
    if kind == "usv":
        dom = BoxDomain([0.0, 0.0], list(usv.USV.upper))
        f = lambda u: min(usv.objective(u, r) for r in (0, 1))
        its = 0
        if method in ("grid", "both"):
            res = grid_search(f, dom, (101, 61))
            x = res.x
        else:
            x = np.array([50.0, 30.0])
        if method in ("nm", "both"):
            nm = nelder_mead(f, x, dom)
            if nm.fun <= f(x):
                x = nm.x
            its = nm.iterations
        roots = [r for r in (0, 1) if math.isfinite(usv.objective(x, r))]
        if not roots:
            raise RuntimeError("no feasible contact candidate found")
        cand = min((usv.evaluate(float(x[0]), float(x[1]), r) for r in roots), key=lambda c: c.cost)
        return {
            "mode": "closed_form",
            "method": method,
            "control": [cand.u1, cand.u2],
            "control_vector": cand.control_vector.tolist(),
            "t_contact": cand.t_m,
            "T_bar": cand.T_bar,
            "eta": cand.eta_m,
            "cost": cand.cost,
            "iterations": its,
        }
    res = nano.optimize_nano()
    b = res.best
    s1, s2 = nano.nano_speeds()
    return {
        "mode": "closed_form",
        "method": "nm",
        "case": b.case_id,
        "control": [b.u1, b.u2],
        "control_vector": list(map(float, b.pre_slopes[:2] + b.post_slopes[2:])),
        "t_contact": b.t_star,
        "T_bar": b.T_bar,
        "eta": float(b.eta),
        "cost": b.cost,
        "t_star_u2": list(nano.contact_products(s1, s2)),
        "T_bar_u2": nano.horizon_product(s1, s2),
        "case_costs": {str(c): {"cost": v.cost, "feasible": v.feasible} for c, v in res.cases.items()},
        "flatness": {str(c): v for c, v in res.flatness.items()},
        "iterations": {str(c): v[0] for c, v in res.iterations.items()},
    }


def _simulated_report(doc, spec, method: str) -> dict:
    m = spec.model
    T_max = doc["grid"].get("T")
    if T_max is None:
        raise UsageError("custom optimization needs grid.T as the horizon upper bound")
    T_max /= spec.units.time
    k = doc["grid"]["k"]
    C = [list(c.coeffs) + [0.0] for c in m.couplings]
    dom = BoxDomain(
        list(m.lower) + [T_max * 1e-3],
        list(m.upper) + [T_max],
        C if C else None,
        [c.rhs for c in m.couplings] if C else None,
    )

    def f(z):
        try:
            traj = simulate(spec, ControlSignal.constant(z[:-1]), Grid(float(z[-1]), k))
        except (ControlBoundsError, InadmissibleStateError, NumericalFailure, EmptySetError):
            return math.inf
        return spec.cost_value(traj.states[-1], float(z[-1]))

    res = grid_search(f, dom, 5)
    its = 0
    if method in ("nm", "both"):
        nm = nelder_mead(f, res.x, dom, max_iter=400)
        its = nm.iterations
        if nm.fun <= res.fun:
            res = nm
    z = res.x
    traj = simulate(spec, ControlSignal.constant(z[:-1]), Grid(float(z[-1]), k))
    tc = first_contact(traj, spec)
    L, tau = spec.units.length, spec.units.time
    return {
        "mode": "simulated",
        "method": method,
        "control": z[:-1].tolist(),
        "t_contact": None if tc is None else tc * tau,
        "T_bar": float(z[-1]) * tau,
        "cost": res.fun * L * L,
        "iterations": its,
    }


def cmd_optimize(args) -> int:
    doc, spec = load_scenario(args.scenario)
    if doc["kind"] in ("usv", "nano") and doc == expand_scenario({"kind": doc["kind"]}):
        report = _closed_form_report(doc["kind"], args.method)
    else:
        report = _simulated_report(doc, spec, args.method)
    _write(args.out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_certify(args) -> int:
    doc, spec = load_scenario(args.scenario)
    u = _parse_control(args.control, spec.n)
    T = _horizon(args, doc, spec)
    if spec.constraint != SUM_NORM:
        raise UsageError("certify needs the sum_norm_polyhedron constraint")
    if spec.n == 2:
        path = halfspace_sweep_path(spec, u, T, check_bounds=False)
    else:
        spec.model.check(u)
        path = simulate(spec, ControlSignal.constant(u), Grid(T, doc["grid"]["k"]))
    cert = certify(path, spec, threshold=args.threshold)
    report = cert.to_dict()
    report["units"] = {"length": spec.units.length, "time": spec.units.time}
    _write(args.out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_converge(args) -> int:
    doc, spec = load_scenario(args.scenario)
    u = _parse_control(args.control, spec.n)
    T = _horizon(args, doc, spec)
    spec.model.check(u)
    if args.k_min < 1 or args.k_max < 2 * args.k_min:
        raise UsageError("need 1 <= k-min and k-max >= 2 k-min")
    ks = [args.k_min]
    while ks[-1] * 2 <= args.k_max:
        ks.append(ks[-1] * 2)
    rows = refine_and_compare(spec, u, T, ks)
    # distances are in the internal (possibly scaled) units of the scenario
    text = "k,distance\n" + "".join(f"{k},{d:.17g}\n" for k, d in rows)
    _write(args.out, text)
    return EXIT_OK


def cmd_regress(args) -> int:
    report = run_all()
    sys.stdout.write(report.to_text())
    if args.junit:
        Path(args.junit).write_text(report.to_junit_xml())
    return EXIT_OK if report.ok else EXIT_REGRESSION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="moreau-opt", description="Controlled sweeping process toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="catching-up simulation to CSV")
    s.add_argument("--scenario", required=True)
    s.add_argument("--control", required=True, help="comma-separated magnitudes")
    s.add_argument("--k", type=int)
    s.add_argument("--T", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("optimize", help="optimize constant controls and horizon")
    o.add_argument("--scenario", required=True)
    o.add_argument("--method", choices=("grid", "nm", "both"), default="both")
    o.add_argument("--out")
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("certify", help="optimality-condition residuals as JSON")
    c.add_argument("--scenario", required=True)
    c.add_argument("--control", required=True)
    c.add_argument("--T", type=float)
    c.add_argument("--threshold", type=float, default=1e-6)
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    v = sub.add_parser("converge", help="dyadic refinement study to CSV")
    v.add_argument("--scenario", required=True)
    v.add_argument("--control", required=True)
    v.add_argument("--T", type=float)
    v.add_argument("--k-min", type=int, default=64)
    v.add_argument("--k-max", type=int, default=4096)
    v.add_argument("--out")
    v.set_defaults(func=cmd_converge)

    r = sub.add_parser("regress", help="run the reference-value corpus")
    r.add_argument("--junit")
    r.set_defaults(func=cmd_regress)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InadmissibleStateError, OrientationError, ControlBoundsError, EmptySetError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericalFailure, RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
