"""Planning entry points: impact-aware plans, the agnostic ablation and sweeps."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..contact import alpha_to_gains
from ..core import ImpedanceSchedule, ImpedanceSegment, ModeSequence, Scenario, Trajectory
from ..nlp.solver import Solution, SolverOptions, solve
from ..scenarios import halt_push_modes, with_goal, with_workspace
from .transcription import Transcription, Weights

# The agnostic baseline plans forces without a transmission model and, like
# complementarity-based planners, barely prices the force profile. The small
# force weight only regularises the otherwise flat force directions.
AGNOSTIC_WEIGHTS = Weights(force=1e-3, accel=0.1, time=1.0)


class PlanningError(RuntimeError):
    """Solver did not converge; carries the solution and per-block violations."""

    def __init__(self, solution: Solution, diagnostics: dict):
        worst = sorted(diagnostics.items(), key=lambda kv: -kv[1])[:3]
        detail = ", ".join(f"{k}={v:.2e}" for k, v in worst)
        super().__init__(f"solver status {solution.status}; largest violations: {detail}")
        self.solution = solution
        self.diagnostics = diagnostics


def extract_trajectory(tr: Transcription, x) -> Trajectory:
    L = tr.layout
    v = L.unpack(np.asarray(x, float))
    modes = tr.z.knot_modes()
    return Trajectory(
        y=v["y"].copy(),
        ydot=v["ydot"].copy(),
        c=v["c"].copy(),
        cdot=v["cdot"].copy(),
        cddot=v["cddot"].copy(),
        f=v["f"].copy(),
        fdot=v["fdot"].copy(),
        fddot=v["fddot"].copy(),
        dt=v["dt"].copy(),
        alpha=v["alpha"].copy(),
        f_d=v["f_d"].copy(),
        stage_l=L.stage_l.copy(),
        mode_index=tr.z.knot_mode_index(),
        k=np.array([m.k for m in modes]),
        l=np.array([m.l for m in modes]),
        normal=tr.normal.copy(),
        mass=tr.mass,
        transmission=tr.impact_aware,
    )


def impedance_schedule(traj: Trajectory, z: ModeSequence, alpha_free: float) -> ImpedanceSchedule:
    """One segment per mode, starting at the mode's first knot.

    Contact stages use their optimised rate; free motion uses ``alpha_free``.
    Gains follow the critically damped map with the object mass.
    """
    segs = []
    stage = 0
    for j, m in enumerate(z.modes):
        first = int(np.nonzero(traj.mode_index == j)[0][0])
        if m.in_contact:
            a = float(traj.alpha[stage])
            stage += 1
        else:
            a = alpha_free
        K, B = alpha_to_gains(a, traj.mass)
        segs.append(ImpedanceSegment(t=float(traj.t[first]), K=K, B=B, M=traj.mass, mode=m))
    return ImpedanceSchedule(tuple(segs))


def _solve(tr: Transcription, opts: SolverOptions | None, x0=None):
    problem = tr.problem()
    sol = solve(problem, tr.warm_start() if x0 is None else x0, opts)
    if not sol.converged:
        raise PlanningError(sol, tr.diagnostics(sol.x_star))
    return sol


def plan(
    s: Scenario,
    z: ModeSequence,
    weights: Weights | None = None,
    opts: SolverOptions | None = None,
    *,
    x0=None,
):
    """Impact-aware plan. Returns ``(Trajectory, ImpedanceSchedule, Solution)``.

    ``x0`` replaces the rollout warm start, e.g. with the solution of a
    neighbouring scenario that has the same mode sequence.

    Raises
    ------
    PlanningError
        If the solver does not converge.
    """
    tr = Transcription(s, z, weights, impact_aware=True)
    sol = _solve(tr, opts, x0)
    traj = extract_trajectory(tr, sol.x_star)
    sched = impedance_schedule(traj, z, s.task.alpha_bounds[1])
    return traj, sched, sol


def plan_impact_agnostic(s: Scenario, z: ModeSequence, weights: Weights | None = None, opts: SolverOptions | None = None):
    """Ablation baseline without the force transmission model.

    Forces are free within ``f_max`` during contact. Returns ``(Trajectory, Solution)``.
    """
    tr = Transcription(s, z, weights or AGNOSTIC_WEIGHTS, impact_aware=False)
    sol = _solve(tr, opts)
    return extract_trajectory(tr, sol.x_star), sol


def agnostic_schedule(traj: Trajectory, z: ModeSequence, alpha: float) -> ImpedanceSchedule:
    """Constant stiff gains: the agnostic plan carries no compliance of its own."""
    K, B = alpha_to_gains(alpha, traj.mass)
    segs = []
    for j, m in enumerate(z.modes):
        first = int(np.nonzero(traj.mode_index == j)[0][0])
        segs.append(ImpedanceSegment(t=float(traj.t[first]), K=K, B=B, M=traj.mass, mode=m))
    return ImpedanceSchedule(tuple(segs))


# -- independent re-check -----------------------------------------------------


def verify_plan(traj: Trajectory, s: Scenario, z: ModeSequence, impact_aware: bool = True) -> dict:
    """Re-evaluate every transcription constraint knot by knot from the trajectory.

    Written separately from the transcription code so that the check does
    not share its bookkeeping. Returns the largest absolute violation per
    constraint family.
    """
    from ..contact import cdds_accel, cdds_propagate
    from ..geometry import signed_distance
    from .transcription import BREAK_FORCE, SEPARATION_MARGIN, friction_cone_check

    task, ws = s.task, s.workspace
    n = traj.n_knots
    nrm = s.normal()
    g_pt = s.contact_offset()
    M = s.object.mass
    k, l = traj.k, traj.l
    stage_of_mode = []
    cnt = 0
    for m in z.modes:
        stage_of_mode.append(cnt if m.in_contact else -1)
        cnt += int(m.in_contact)
    stage = np.array(stage_of_mode)[traj.mode_index]
    out: dict = {}

    def note(name, v):
        out[name] = max(out.get(name, 0.0), float(np.max(np.abs(v))))

    tol_lo = lambda v, lo: max(lo - v, 0.0)  # noqa: E731
    note("initial_state", np.concatenate([traj.y[0] - task.y0, traj.ydot[0] - task.ydot0]))
    if task.yN is not None:
        note("final_state", traj.y[-1] - task.yN)
    if task.ydotN is not None:
        note("final_state", traj.ydot[-1] - task.ydotN)
    for i in range(n):
        for a in range(s.nu):
            note("workspace_box", tol_lo(traj.c[i, a], ws.lower[a]) + tol_lo(ws.upper[a], traj.c[i, a]))
            note("accel_bounds", max(abs(traj.cddot[i, a]) - task.accel_max, 0.0))
            note("force_bounds", max(abs(traj.f[i, a]) - task.f_max, 0.0))
        note("dt_bounds", tol_lo(traj.dt[i], task.dt_bounds[0]) + tol_lo(task.dt_bounds[1], traj.dt[i]))
        if k[i] == 0:
            note("free_force_zero", np.concatenate([traj.f[i], traj.fdot[i], traj.fddot[i]]))
            p = s.ee_point(traj.c[i], traj.y[i])
            note("separation", tol_lo(signed_distance(s.object.surface, p), SEPARATION_MARGIN))
        else:
            note("contact_location", traj.c[i] - traj.y[i] - g_pt)
            inside, w = friction_cone_check(traj.f[i], nrm, task.friction_mu)
            note("friction_cone", np.maximum(-w, 0.0))
            if impact_aware:
                st = stage[i]
                a_, fd_ = traj.alpha[st], traj.f_d[st] * nrm
                note("force_accel", traj.fddot[i] - cdds_accel(traj.f[i], traj.fdot[i], a_, fd_))
                if i == 0 or k[i - 1] == 0:
                    note("force_start", np.concatenate([traj.f[i], traj.fdot[i]]))
            if i > 0 and l[i - 1] == -1 and l[i] == 1:
                note("stage_boundary", traj.ydot[i] @ nrm)
            if i + 1 < n and k[i + 1] == 0:
                note("contact_break", max(traj.f[i] @ traj.f[i] - BREAK_FORCE**2, 0.0))
    for st, a_ in enumerate(traj.alpha):
        note("alpha_bounds", tol_lo(a_, task.alpha_bounds[0]) + tol_lo(task.alpha_bounds[1], a_))
    for i in range(n - 1):
        h = traj.dt[i]
        note("object_velocity", traj.ydot[i + 1] - traj.ydot[i] - h * (traj.f[i] + traj.f[i + 1]) / (2 * M))
        note("object_position", traj.y[i + 1] - traj.y[i] - h * (traj.ydot[i] + traj.ydot[i + 1]) / 2)
        if k[i] == k[i + 1]:
            note("ee_velocity", traj.cdot[i + 1] - traj.cdot[i] - h * (traj.cddot[i] + traj.cddot[i + 1]) / 2)
            note("ee_position", traj.c[i + 1] - traj.c[i] - h * (traj.cdot[i] + traj.cdot[i + 1]) / 2)
        else:
            note("ee_position_skip", traj.c[i + 1] - traj.c[i] - h * traj.cdot[i])
        if impact_aware and k[i] == 1 and k[i + 1] == 1:
            st = stage[i]
            f1, fd1 = cdds_propagate(traj.f[i], traj.fdot[i], traj.alpha[st], traj.f_d[st] * nrm, h)
            note("force_ode", np.concatenate([traj.f[i + 1] - f1, traj.fdot[i + 1] - fd1]))
    return out


def momentum_residual(traj: Trajectory) -> float:
    """Relative mismatch between the object's momentum change and the trapezoidal impulse."""
    dp = traj.mass * (traj.ydot[-1] - traj.ydot[0])
    impulse = np.sum(0.5 * traj.dt[:-1, None] * (traj.f[:-1] + traj.f[1:]), axis=0)
    scale = max(float(np.linalg.norm(dp)), 1e-12)
    return float(np.linalg.norm(dp - impulse) / scale)


# -- sweeps -----------------------------------------------------------------------


@dataclass
class SweepRow:
    workspace: float
    goal: float
    alpha_neg: float
    alpha_pos: float
    peak_force: float
    contact_duration: float
    status: str
    time: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    force: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)


@dataclass
class SweepResult:
    rows: list

    def converged(self) -> list:
        return [r for r in self.rows if r.status == "converged"]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def _sweep_threads(n_jobs: int) -> int:
    cap = os.environ.get("IMPACTPLAN_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_jobs))


def sweep(
    s: Scenario,
    workspaces,
    goals,
    z: ModeSequence | None = None,
    weights: Weights | None = None,
    opts: SolverOptions | None = None,
) -> SweepResult:
    """Plan the halt-push task over a (workspace, goal) grid.

    Cells are solved by continuation: for each goal, workspaces run from the
    smallest up, each started from the previous converged cell (a plan for a
    tighter workspace stays feasible in a looser one), and the first cell of
    a goal starts from the previous goal's first cell. Goals
    are independent chains when ``IMPACTPLAN_THREADS`` allows more than one
    thread; then each chain's first cell starts from the rollout warm start.
    Rows come out in workspace-major order. A failed row is recorded with
    its solver status and does not seed its successor.
    """
    workspaces, goals = [float(w) for w in workspaces], [float(g) for g in goals]
    if not workspaces or not goals:
        raise ValueError("workspaces and goals must be non-empty")
    z = z or halt_push_modes()
    ws_order = sorted(range(len(workspaces)), key=lambda i: workspaces[i])
    nan = float("nan")

    def run(w, g, x0):
        sc = with_goal(with_workspace(s, w), g)
        try:
            traj, _, sol = plan(sc, z, weights, opts, x0=x0)
        except PlanningError as err:
            return SweepRow(w, g, nan, nan, nan, nan, err.solution.status), None
        fn = traj.normal_force()
        row = SweepRow(
            workspace=w,
            goal=g,
            alpha_neg=traj.stage_alpha(-1),
            alpha_pos=traj.stage_alpha(1),
            peak_force=float(np.max(fn)),
            contact_duration=traj.contact_duration(),
            status=sol.status,
            time=traj.t.copy(),
            force=fn,
        )
        return row, sol.x_star

    def chain(g, seed=None):
        out, x0, head = {}, seed, None
        for i in ws_order:
            row, x = run(workspaces[i], g, x0)
            out[i] = row
            if x is not None:
                x0 = x
                head = x if head is None else head
        return out, head

    threads = _sweep_threads(len(goals))
    if threads == 1:
        chains, seed = [], None
        for g in goals:
            rows, head = chain(g, seed)
            chains.append(rows)
            seed = head if head is not None else seed
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chains = [r for r, _ in pool.map(chain, goals)]
    rows = [chains[j][i] for i in range(len(workspaces)) for j in range(len(goals))]
    return SweepResult(rows)


def with_alpha_max(s: Scenario, alpha_max: float) -> Scenario:
    task = replace(s.task, alpha_bounds=(s.task.alpha_bounds[0], float(alpha_max)))
    return replace(s, task=task)


__all__ = [
    "AGNOSTIC_WEIGHTS",
    "PlanningError",
    "SweepResult",
    "SweepRow",
    "agnostic_schedule",
    "extract_trajectory",
    "impedance_schedule",
    "momentum_residual",
    "plan",
    "plan_impact_agnostic",
    "sweep",
    "verify_plan",
    "with_alpha_max",
]
