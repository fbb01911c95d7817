"""Command-line interface: ``impactplan {plan, ablate, sweep, fit}``.

Scenarios are JSON documents; traces are written as CSV with six decimals.
Exit codes: 0 success, 1 input error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import Mode, ModeSequence, ObjectModel, Scenario, Task, Workspace, validate_scenario
from .geometry import spline_from_points
from .nlp.solver import SolverOptions
from .planner import (
    PlanningError,
    Weights,
    agnostic_schedule,
    plan,
    plan_impact_agnostic,
    sweep,
    with_alpha_max,
)
from .sim import (
    detect_contact_outcome,
    fit_rolling_friction,
    planned_force,
    simulate_compliance_only,
    simulate_rollout,
)

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2
COMPLIANCE_STIFFNESS = 13600.0  # N/m, default stiffness of the compliance baseline

_SECTIONS = {
    "object": ({"mass", "surface_points", "contact_point", "contact_normal"}, {"inertia"}),
    "workspace": ({"lower", "upper"}, set()),
    "task": (
        {"y0", "ydot0"},
        {"yN", "ydotN", "friction_mu", "f_max", "alpha_bounds", "dt_bounds", "accel_max"},
    ),
    "solver": (set(), {"tolerances", "max_iters", "weights"}),
    "sim": (set(), {"dt", "virtual_mass", "compliance_stiffness"}),
}
_TOP_REQUIRED = {"object", "workspace", "task", "modes"}
_TOL_KEYS = {"feasibility", "optimality"}
_ITER_KEYS = {"outer", "inner"}


class ScenarioFileError(ValueError):
    """Malformed scenario document; the message names the offending field."""


@dataclass
class ScenarioFile:
    """A parsed scenario document."""

    scenario: Scenario
    modes: ModeSequence
    options: SolverOptions
    weights: Weights
    sim_dt: float = 1e-3
    virtual_mass: float | None = None
    compliance_stiffness: float = COMPLIANCE_STIFFNESS


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioFileError(f"{where}: expected a number, got {json.dumps(v)}")
    return float(v)


def _vector(v, where: str) -> list:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return [float(v)]
    if not isinstance(v, list) or not v:
        raise ScenarioFileError(f"{where}: expected a number or a non-empty list of numbers")
    return [_number(x, f"{where}[{i}]") for i, x in enumerate(v)]


def _pair(v, where: str) -> tuple:
    out = _vector(v, where)
    if len(out) != 2:
        raise ScenarioFileError(f"{where}: expected [lower, upper]")
    return tuple(out)


def _check_keys(d, where: str, required: set, optional: set):
    if not isinstance(d, dict):
        raise ScenarioFileError(f"{where}: expected an object")
    unknown = sorted(set(d) - required - optional)
    if unknown:
        raise ScenarioFileError(f"{where}.{unknown[0]}: unknown key")
    missing = sorted(required - set(d))
    if missing:
        raise ScenarioFileError(f"{where}.{missing[0]}: missing required field")


def parse_scenario(doc: dict) -> ScenarioFile:
    """Build a :class:`ScenarioFile` from a decoded JSON document.

    Raises
    ------
    ScenarioFileError
        On unknown or missing keys, wrong types or an invalid scenario.
    """
    if not isinstance(doc, dict):
        raise ScenarioFileError("document: expected a JSON object")
    unknown = sorted(set(doc) - _TOP_REQUIRED - {"solver", "sim"})
    if unknown:
        raise ScenarioFileError(f"{unknown[0]}: unknown key")
    missing = sorted(_TOP_REQUIRED - set(doc))
    if missing:
        raise ScenarioFileError(f"{missing[0]}: missing required section")
    for name, (req, opt) in _SECTIONS.items():
        if name in doc:
            _check_keys(doc[name], name, req, opt)

    o = doc["object"]
    pts = o["surface_points"]
    if not isinstance(pts, list) or len(pts) < 3:
        raise ScenarioFileError("object.surface_points: expected a list of at least 3 [x, y] points")
    pts = np.array([_pair(p, f"object.surface_points[{i}]") for i, p in enumerate(pts)])
    try:
        surface = spline_from_points(pts)
    except ValueError as err:
        raise ScenarioFileError(f"object.surface_points: {err}") from None
    obj = ObjectModel(
        mass=_number(o["mass"], "object.mass"),
        inertia=_number(o.get("inertia", 0.0), "object.inertia"),
        surface=surface,
        contact_point=_vector(o["contact_point"], "object.contact_point"),
        contact_normal=_vector(o["contact_normal"], "object.contact_normal"),
    )
    w = doc["workspace"]
    ws = Workspace(_vector(w["lower"], "workspace.lower"), _vector(w["upper"], "workspace.upper"))

    t = doc["task"]
    kw = {}
    for key in ("yN", "ydotN"):
        if key in t:
            kw[key] = _vector(t[key], f"task.{key}")
    for key in ("friction_mu", "f_max", "accel_max"):
        if key in t:
            kw[key] = _number(t[key], f"task.{key}")
    for key in ("alpha_bounds", "dt_bounds"):
        if key in t:
            kw[key] = _pair(t[key], f"task.{key}")
    y0 = _vector(t["y0"], "task.y0")
    task = Task(y0=y0, ydot0=_vector(t["ydot0"], "task.ydot0"), **kw)
    scenario = Scenario(obj, ws, task, spatial_dim=len(y0))
    problems = validate_scenario(scenario)
    if problems:
        raise ScenarioFileError("; ".join(problems))

    modes_doc = doc["modes"]
    if not isinstance(modes_doc, list) or not modes_doc:
        raise ScenarioFileError("modes: expected a non-empty list of {k, l, knots}")
    modes, knots = [], []
    for i, m in enumerate(modes_doc):
        _check_keys(m, f"modes[{i}]", {"k", "l"}, {"knots"})
        vals = [_number(m[key], f"modes[{i}].{key}") for key in ("k", "l")]
        modes.append(Mode(int(vals[0]), int(vals[1])))
        knots.append(int(_number(m.get("knots", 10), f"modes[{i}].knots")))
    z = ModeSequence(tuple(modes), tuple(knots))
    problems = z.violations()
    if problems:
        raise ScenarioFileError("modes: " + "; ".join(problems))

    opts = SolverOptions()
    weights = Weights()
    solver = doc.get("solver", {})
    if "tolerances" in solver:
        _check_keys(solver["tolerances"], "solver.tolerances", set(), _TOL_KEYS)
        tol = solver["tolerances"]
        opts = replace(
            opts,
            feas_tol=_number(tol.get("feasibility", opts.feas_tol), "solver.tolerances.feasibility"),
            opt_tol=_number(tol.get("optimality", opts.opt_tol), "solver.tolerances.optimality"),
        )
    if "max_iters" in solver:
        _check_keys(solver["max_iters"], "solver.max_iters", set(), _ITER_KEYS)
        it = solver["max_iters"]
        opts = replace(
            opts,
            max_outer=int(_number(it.get("outer", opts.max_outer), "solver.max_iters.outer")),
            max_inner=int(_number(it.get("inner", opts.max_inner), "solver.max_iters.inner")),
        )
    if "weights" in solver:
        vals = _vector(solver["weights"], "solver.weights")
        if len(vals) != 3 or min(vals) < 0:
            raise ScenarioFileError("solver.weights: expected three non-negative numbers [w_f, w_a, w_T]")
        weights = Weights(*vals)

    sim = doc.get("sim", {})
    sim_dt = _number(sim.get("dt", 1e-3), "sim.dt")
    if not 0 < sim_dt <= 1e-3:
        raise ScenarioFileError("sim.dt: must be in (0, 0.001]")
    vm = sim.get("virtual_mass")
    vm = None if vm is None else _number(vm, "sim.virtual_mass")
    if vm is not None and not vm > 0:
        raise ScenarioFileError("sim.virtual_mass: must be > 0")
    ks = _number(sim.get("compliance_stiffness", COMPLIANCE_STIFFNESS), "sim.compliance_stiffness")
    if not ks > 0:
        raise ScenarioFileError("sim.compliance_stiffness: must be > 0")
    return ScenarioFile(scenario, z, opts, weights, sim_dt, vm, ks)


def load_scenario(path) -> ScenarioFile:
    """Read and parse a scenario file; JSON syntax errors report line and column."""
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ScenarioFileError(f"{path}: {err.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioFileError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
    return parse_scenario(doc)


def scenario_document(s: Scenario, z: ModeSequence, weights: Weights | None = None) -> dict:
    """Inverse of :func:`parse_scenario` for a scenario and mode sequence."""
    o, t = s.object, s.task
    doc = {
        "object": {
            "mass": o.mass,
            "inertia": o.inertia,
            "surface_points": o.surface.control_points.tolist(),
            "contact_point": o.contact_point.tolist(),
            "contact_normal": o.contact_normal.tolist(),
        },
        "workspace": {"lower": s.workspace.lower.tolist(), "upper": s.workspace.upper.tolist()},
        "task": {
            "y0": t.y0.tolist(),
            "ydot0": t.ydot0.tolist(),
            "friction_mu": t.friction_mu,
            "f_max": t.f_max,
            "alpha_bounds": list(t.alpha_bounds),
            "dt_bounds": list(t.dt_bounds),
            "accel_max": t.accel_max,
        },
        "modes": [{"k": m.k, "l": m.l, "knots": n} for m, n in zip(z.modes, z.knots_per_mode)],
    }
    if t.yN is not None:
        doc["task"]["yN"] = t.yN.tolist()
    if t.ydotN is not None:
        doc["task"]["ydotN"] = t.ydotN.tolist()
    if weights is not None:
        doc["solver"] = {"weights": [weights.force, weights.accel, weights.time]}
    return doc


# -- output ------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return f"{float(v):.6f}"


def write_csv(path, header, columns):
    """Write equal-length columns with six-decimal numbers."""
    path = Path(path)
    rows = zip(*columns)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _apply_overrides(sf: ScenarioFile, args) -> ScenarioFile:
    s, z, w = sf.scenario, sf.modes, sf.weights
    if getattr(args, "knots", None) is not None:
        if args.knots < 2:
            raise ScenarioFileError("--knots: must be >= 2")
        z = ModeSequence(z.modes, tuple([args.knots] * len(z.modes)))
    if getattr(args, "weights", None) is not None:
        try:
            w = Weights.parse(args.weights)
        except ValueError as err:
            raise ScenarioFileError(f"--weights: {err}") from None
    if getattr(args, "alpha_max", None) is not None:
        if not args.alpha_max >= s.task.alpha_bounds[0]:
            raise ScenarioFileError("--alpha-max: must be >= the lower alpha bound")
        s = with_alpha_max(s, args.alpha_max)
    dt = sf.sim_dt
    if getattr(args, "dt", None) is not None:
        if not 0 < args.dt <= 1e-3:
            raise ScenarioFileError("--dt: must be in (0, 0.001]")
        dt = args.dt
    return replace(sf, scenario=s, modes=z, weights=w, sim_dt=dt)


def _plan_columns(traj, sched):
    alpha = np.empty(traj.n_knots)
    K = np.empty(traj.n_knots)
    B = np.empty(traj.n_knots)
    n = traj.normal / np.linalg.norm(traj.normal)
    for i, t in enumerate(traj.t):
        seg = sched.segments[traj.mode_index[i]]
        K[i], B[i] = seg.K, seg.B
        alpha[i] = np.sqrt(seg.K / seg.M)
    return [traj.t, traj.normal_force(), traj.y @ n, traj.ydot @ n, traj.c @ n, traj.cdot @ n, alpha, K, B, traj.k, traj.l]


PLAN_HEADER = ["time", "force", "pos", "vel", "ee_pos", "ee_vel", "alpha", "K", "B", "mode_k", "mode_l"]


def cmd_plan(args) -> int:
    sf = _apply_overrides(load_scenario(args.scenario), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        traj, sched, sol = plan(sf.scenario, sf.modes, sf.weights, sf.options)
    except PlanningError as err:
        _write_json(out / "summary.json", {"status": err.solution.status, "diagnostics": err.diagnostics})
        print(f"plan failed: {err}", file=sys.stderr)
        return EXIT_SOLVER
    write_csv(out / "plan.csv", PLAN_HEADER, _plan_columns(traj, sched))
    segs = sched.segments
    write_csv(
        out / "schedule.csv",
        ["t_start", "K", "B", "M", "mode_k", "mode_l"],
        [[g.t for g in segs], [g.K for g in segs], [g.B for g in segs], [g.M for g in segs],
         [g.mode.k for g in segs], [g.mode.l for g in segs]],
    )
    summary = {
        "status": sol.status,
        "peak_force": traj.peak_force(),
        "contact_duration": traj.contact_duration(),
        "alpha": [{"stage": int(l), "alpha": float(a)} for l, a in zip(traj.stage_l, traj.alpha)],
        "objective": sol.objective_value,
        "max_violation": sol.max_violation,
        "wall_time": sol.wall_time,
    }
    _write_json(out / "summary.json", summary)
    print(f"{sol.status}: peak force {traj.peak_force():.6f} N, contact {traj.contact_duration():.6f} s")
    return EXIT_OK


def _ablation_columns(trace, traj, s):
    return [trace.t, trace.gap, planned_force(traj, s, trace.t), trace.force]


ABLATION_HEADER = ["time", "pos_error", "force_plan", "force_measured"]


def cmd_ablate(args) -> int:
    sf = _apply_overrides(load_scenario(args.scenario), args)
    s, z = sf.scenario, sf.modes
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        traj, sched, _ = plan(s, z, sf.weights, sf.options)
        traj_a, _ = plan_impact_agnostic(s, z, opts=sf.options)
    except PlanningError as err:
        print(f"plan failed: {err}", file=sys.stderr)
        return EXIT_SOLVER
    aware = simulate_rollout(traj, sched, s, sf.sim_dt)
    agn = simulate_rollout(traj_a, agnostic_schedule(traj_a, z, s.task.alpha_bounds[1]), s, sf.sim_dt)
    comp = simulate_compliance_only(sf.compliance_stiffness, s, sf.sim_dt, sf.virtual_mass)
    write_csv(out / "force_impact_aware.csv", ABLATION_HEADER, _ablation_columns(aware, traj, s))
    write_csv(out / "force_impact_agnostic.csv", ABLATION_HEADER, _ablation_columns(agn, traj_a, s))
    write_csv(out / "compliance_baseline.csv", ["time", "force"], [comp.t, comp.force])
    summary = {
        "impact_aware": {"outcome": detect_contact_outcome(aware), "peak_force": aware.peak_force(),
                         "planned_peak": traj.peak_force(), "contact_duration": traj.contact_duration()},
        "impact_agnostic": {"outcome": detect_contact_outcome(agn), "peak_force": agn.peak_force(),
                            "planned_peak": traj_a.peak_force(), "contact_duration": traj_a.contact_duration()},
        "compliance": {"outcome": detect_contact_outcome(comp), "peak_force": comp.peak_force(),
                       "stiffness": sf.compliance_stiffness},
    }
    _write_json(out / "summary.json", summary)
    for name, d in summary.items():
        print(f"{name}: {d['outcome']}, peak {d['peak_force']:.6f} N")
    return EXIT_OK


def _grid(text: str, flag: str) -> list:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ScenarioFileError(f"{flag}: expected comma-separated numbers") from None
    if not vals:
        raise ScenarioFileError(f"{flag}: grid must be non-empty")
    return vals


def cmd_sweep(args) -> int:
    sf = _apply_overrides(load_scenario(args.scenario), args)
    workspaces = _grid(args.workspaces, "--workspaces")
    goals = _grid(args.goals, "--goals")
    if sf.scenario.task.yN is None:
        raise ScenarioFileError("task.yN: a sweep over goals needs a position target")
    res = sweep(sf.scenario, workspaces, goals, sf.modes, sf.weights, sf.options)
    out_csv = Path(args.out)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    cols = ["workspace", "goal", "alpha_neg", "alpha_pos", "peak_force", "contact_duration", "status"]
    write_csv(out_csv, cols, [[getattr(r, c) for r in res.rows] for c in cols])
    for r in res.rows:
        name = f"{out_csv.stem}_profile_{r.workspace:g}_{r.goal:g}.csv".replace("-", "m")
        write_csv(out_csv.with_name(name), ["time", "force"], [r.time, r.force])
        print(f"ws {r.workspace:.6f} goal {r.goal:.6f}: {r.status}, alpha ({r.alpha_neg:.6f}, {r.alpha_pos:.6f})")
    return EXIT_OK if all(r.status == "converged" for r in res.rows) else EXIT_SOLVER


def cmd_fit(args) -> int:
    path = Path(args.samples)
    try:
        with path.open() as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise ScenarioFileError(f"{path}: {err.strerror}") from None
    if not rows or [c.strip() for c in rows[0]] != ["time", "pos"]:
        raise ScenarioFileError(f"{path}: line 1: expected header 'time,pos'")
    data = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            data.append([float(row[0]), float(row[1])])
        except (ValueError, IndexError):
            raise ScenarioFileError(f"{path}: line {i}: expected two numbers") from None
    try:
        fit = fit_rolling_friction(data)
    except ValueError as err:
        raise ScenarioFileError(f"{path}: {err}") from None
    t_last = data[-1][0]
    print(f"v0 {fit.v0:.6f}")
    print(f"decel {fit.decel:.6f}")
    print(f"r_squared {fit.r_squared:.6f}")
    for dt in (0.1, 0.2, 0.5):
        print(f"predict t={t_last + dt:.6f} pos {float(fit.predict(t_last + dt)):.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="impactplan", description="Impact-aware contact planning.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("scenario", help="scenario JSON file")
        sp.add_argument("--out", default=out_default, help=f"output location (default: {out_default})")
        sp.add_argument("--dt", type=float, help="simulation step in seconds (<= 0.001)")
        sp.add_argument("--knots", type=int, help="knots per mode, overriding the file")
        sp.add_argument("--weights", help="objective weights w_f,w_a,w_T")
        sp.add_argument("--alpha-max", type=float, dest="alpha_max", help="upper bound on alpha")

    common(sub.add_parser("plan", help="plan an impact-aware trajectory"), "out")
    common(sub.add_parser("ablate", help="compare impact-aware, impact-agnostic and compliance-only"), "out")
    sp = sub.add_parser("sweep", help="plan over a grid of workspaces and goals")
    common(sp, "sweep.csv")
    sp.add_argument("--workspaces", required=True, help="comma-separated retreat depths in m")
    sp.add_argument("--goals", required=True, help="comma-separated goal positions in m")
    sp = sub.add_parser("fit", help="fit a rolling-friction model to time,pos samples")
    sp.add_argument("samples", help="CSV with header time,pos")
    return p


_COMMANDS = {"plan": cmd_plan, "ablate": cmd_ablate, "sweep": cmd_sweep, "fit": cmd_fit}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return _COMMANDS[args.command](args)
    except ScenarioFileError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
