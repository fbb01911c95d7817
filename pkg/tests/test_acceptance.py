"""Acceptance suite: one test per criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v``. Each test name carries its
criterion number. Reference numbers from the original experiments are
checked where the criterion asks for them.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from impactplan.contact import ForceState, cdds_closed_form, cdds_step
from impactplan.nlp import CONVERGED, NlpProblem, ad, solve
from impactplan.planner import (
    Transcription,
    agnostic_schedule,
    friction_cone_check,
    momentum_residual,
    plan,
    plan_impact_agnostic,
    sweep,
    verify_plan,
)
from impactplan.scenarios import halt_push_modes, halt_push_scenario, halting_modes, halting_scenario
from impactplan.sim import (
    detect_contact_outcome,
    fit_rolling_friction,
    simulate_compliance_only,
    simulate_rollout,
)

FIXTURE = Path(__file__).resolve().parent / "fixtures" / "rolling_noisy.csv"

# Reference values for the sweep, matched within a factor of two.
REFERENCE_ALPHA_NEG_WS = {0.10: 7.72, 0.50: 2.23}
REFERENCE_ALPHA_NEG_GOAL = {0.8: 2.23, 0.4: 1.75}


def within_factor(value, ref, factor=2.0):
    return ref / factor <= value <= ref * factor


# 1 ---------------------------------------------------------------------------


def test_c01_cdds_oracle():
    start = time.perf_counter()
    f_d = 100.0
    for alpha in (1.0, 5.0, 10.0, 20.0):
        t = np.linspace(0.0, 2.0, 201)
        ref = cdds_closed_form(alpha, f_d, t)
        state, stepped = ForceState(0.0, 0.0), [0.0]
        for h in np.diff(t):
            state = cdds_step(state, alpha, f_d, h)
            stepped.append(state.f)
        stepped = np.array(stepped)
        assert np.max(np.abs(stepped - ref)) <= 1e-9 * f_d
        assert np.all(ref <= f_d) and np.all(stepped <= f_d * (1 + 1e-12))
        # exact value of the rule-of-thumb settling point, 1 - 4 e^-3
        f_ts = cdds_closed_form(alpha, f_d, 3.0 / alpha)
        assert abs(f_ts - (1 - 4 * np.exp(-3.0)) * f_d) <= 1e-6
        assert round(f_ts / f_d, 4) == 0.8009
    assert time.perf_counter() - start < 1.0


# 2 ---------------------------------------------------------------------------


def _planner_functions():
    cases = [
        Transcription(halting_scenario(), halting_modes()),
        Transcription(halt_push_scenario(), halt_push_modes()),
        Transcription(halting_scenario(), halting_modes(), impact_aware=False),
    ]
    for tr in cases:
        p = tr.problem()
        for fn in (p.objective, p.eq_constraints, p.ineq_constraints):
            yield p, tr.warm_start(), fn


def _values(fn, x):
    return np.atleast_1d(np.asarray(fn(x), float)).ravel()


def test_c02_gradient_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for p, x0, fn in _planner_functions():
        D = p.x_scale
        cj = ad.CompressedJacobian(fn, x0)
        for k in range(100):
            x = np.clip(x0 + 0.05 * D * rng.standard_normal(x0.size), p.lower, p.upper)
            _, J = cj(x)
            if k == 0:
                # the column-compressed Jacobian used by the solver equals the dense one
                assert np.allclose(J, ad.jacobian(fn, x), rtol=0, atol=1e-12)
                # full central differences, h = 1e-6 (1 + |x|)
                for j in rng.choice(x.size, 40, replace=False):
                    h = 1e-6 * (1 + abs(x[j]))
                    e = np.zeros_like(x)
                    e[j] = h
                    fd = (_values(fn, x + e) - _values(fn, x - e)) / (2 * h)
                    err = np.max(np.abs(J[:, j] - fd), initial=0.0) / max(1.0, np.max(np.abs(fd), initial=0.0))
                    worst = max(worst, err)
            v = D * rng.standard_normal(x.size)
            h = 1e-6
            fd = (_values(fn, x + h * v) - _values(fn, x - h * v)) / (2 * h)
            err = np.max(np.abs(J @ v - fd), initial=0.0) / max(1.0, np.max(np.abs(fd), initial=0.0))
            worst = max(worst, err)
    assert worst <= 1e-5
    assert time.perf_counter() - start < 30.0


# 3 ---------------------------------------------------------------------------


def test_c03_solver_oracle():
    start = time.perf_counter()
    inf = np.inf
    cases = [
        (NlpProblem(1, [1.0], [inf], lambda x: x[0] ** 2), [3.0], [1.0]),
        (
            NlpProblem(2, -inf, inf, lambda x: x[0] ** 2 + x[1] ** 2, eq_constraints=lambda x: ad.stack([x[0] + x[1] - 2])),
            [0.0, 0.0],
            [1.0, 1.0],
        ),
        (NlpProblem(2, -inf, inf, lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2), [-1.2, 1.0], [1.0, 1.0]),
    ]
    for problem, x0, x_star in cases:
        sol = solve(problem, np.array(x0))
        assert sol.status == CONVERGED
        assert np.max(np.abs(sol.x_star - x_star)) <= 1e-5
    assert time.perf_counter() - start < 5.0


# 4 ---------------------------------------------------------------------------


def test_c04_halting_reproduction():
    s, z = halting_scenario(), halting_modes()
    start = time.perf_counter()
    traj, _, sol = plan(s, z)
    elapsed = time.perf_counter() - start
    assert sol.status == CONVERGED
    assert np.max(np.abs(traj.ydot[-1])) <= 1e-3
    assert 0.5 <= traj.contact_duration() <= 1.5
    assert max(verify_plan(traj, s, z).values()) <= 1e-4
    assert elapsed <= 10.0


# 5 ---------------------------------------------------------------------------


def test_c05_ablation():
    s, z = halting_scenario(), halting_modes()
    start = time.perf_counter()
    traj, sched, _ = plan(s, z)
    traj_a, sol_a = plan_impact_agnostic(s, z)
    aware = simulate_rollout(traj, sched, s)
    agn = simulate_rollout(traj_a, agnostic_schedule(traj_a, z, s.task.alpha_bounds[1]), s)
    elapsed = time.perf_counter() - start
    assert sol_a.status == CONVERGED
    assert traj_a.contact_duration() <= 0.3
    assert traj_a.peak_force() >= 3 * traj.peak_force()
    assert detect_contact_outcome(aware) == "maintained"
    assert detect_contact_outcome(agn) == "rebound"
    assert elapsed <= 30.0


# 6 ---------------------------------------------------------------------------


def test_c06_compliance_baseline(aware_trace):
    s = halting_scenario()
    start = time.perf_counter()
    comp = simulate_compliance_only(13600.0, s)
    elapsed = time.perf_counter() - start
    peak = comp.peak_force()
    assert 600.0 <= peak <= 760.0
    assert peak == pytest.approx(2 * np.sqrt(13600.0 * 20.0) * 0.65, rel=0.01)
    assert peak / aware_trace.peak_force() >= 5.0
    assert elapsed <= 10.0


# 7 ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def sweeps():
    s = halt_push_scenario()
    start = time.perf_counter()
    by_ws = sweep(s, [0.10, 0.12, 0.20, 0.50], [0.8])
    by_goal = sweep(s, [0.50], [0.8, 0.6, 0.4])
    return by_ws, by_goal, time.perf_counter() - start


def test_c07_sweep_runtime_and_convergence(sweeps):
    by_ws, by_goal, elapsed = sweeps
    assert len(by_ws.converged()) == 4 and len(by_goal.converged()) == 3
    assert elapsed <= 120.0


def test_c07_sweep_alpha_neg_non_increasing_with_workspace(sweeps):
    a = sweeps[0].column("alpha_neg")
    assert np.all(np.diff(a) <= 1e-9)


def test_c07_sweep_alpha_pos_saturates(sweeps):
    a = sweeps[0].column("alpha_pos")
    assert np.all(np.abs(a - 20.0) <= 1e-3), a


def test_c07_sweep_peak_force_decreases_with_goal(sweeps):
    peaks = sweeps[1].column("peak_force")
    assert np.all(np.diff(peaks) < 0), peaks


def test_c07_sweep_reference_alpha_values(sweeps):
    by_ws, by_goal, _ = sweeps
    got_ws = dict(zip(by_ws.column("workspace"), by_ws.column("alpha_neg")))
    got_goal = dict(zip(by_goal.column("goal"), by_goal.column("alpha_neg")))
    misses = [(w, got_ws[w], ref) for w, ref in REFERENCE_ALPHA_NEG_WS.items() if not within_factor(got_ws[w], ref)]
    misses += [(g, got_goal[g], ref) for g, ref in REFERENCE_ALPHA_NEG_GOAL.items() if not within_factor(got_goal[g], ref)]
    assert not misses, misses


# 8 ---------------------------------------------------------------------------


def test_c08_physical_bookkeeping(halting, aware_plan, agnostic_plan, aware_trace, agnostic_trace, compliance_trace):
    s, _ = halting
    push, _, _ = plan(halt_push_scenario(), halt_push_modes())
    for traj in (aware_plan[0], agnostic_plan[0], push):
        assert momentum_residual(traj) <= 1e-3
        for i in traj.contact_knots():
            inside, _ = friction_cone_check(traj.f[i], s.normal(), s.task.friction_mu)
            assert inside
    assert compliance_trace.energy_balance() <= 0.02
    for trace in (aware_trace, agnostic_trace, compliance_trace):
        assert np.all(trace.force >= 0.0)
        assert np.all(trace.force[trace.gap > 0] == 0.0)


# 9 ---------------------------------------------------------------------------


def test_c09_jump_map_admissibility(halting, aware_plan):
    s, z = halting
    traj, _, sol = aware_plan
    assert sol.status == CONVERGED
    make = [i for i in range(traj.n_knots - 1) if traj.k[i] == 0 and traj.k[i + 1] == 1]
    assert len(make) == 1
    i = make[0]
    jump = np.linalg.norm(traj.cdot[i + 1] - traj.cdot[i])
    accel = np.max(np.abs(traj.cddot))
    assert jump > accel * s.task.dt_bounds[1]
    # bounds are enforced by projection: no violation at all
    assert accel <= s.task.accel_max
    viol = verify_plan(traj, s, z)
    assert viol["accel_bounds"] == 0.0
    assert max(viol.values()) <= 1e-4


# 10 --------------------------------------------------------------------------


def test_c10_friction_fit():
    t = np.linspace(0.0, 0.5, 26)
    fit = fit_rolling_friction(np.column_stack([t, 0.65 * t - 0.5 * 0.05 * t**2]))
    assert abs(fit.v0 - 0.65) <= 1e-8
    assert abs(fit.decel - 0.05) <= 1e-8
    assert abs(fit.r_squared - 1.0) <= 1e-8
    data = np.loadtxt(FIXTURE, delimiter=",", skiprows=1)
    noisy = fit_rolling_friction(data)
    assert np.isfinite(noisy.r_squared)
    print(f"noisy fixture r_squared {noisy.r_squared:.6f}")
