import numpy as np
import pytest

from impactplan.core import FREE, ModeSequence, Scenario, Task
from impactplan.planner import plan
from impactplan.scenarios import halting_scenario
from impactplan.sim import (
    detect_contact_outcome,
    fit_rolling_friction,
    simulate_compliance_only,
    simulate_rollout,
)


def test_compliance_peak_follows_damper_law():
    s = halting_scenario()
    tr = simulate_compliance_only(2000.0, s)
    assert tr.peak_force() == pytest.approx(2 * np.sqrt(2000 * 20) * 0.65, rel=0.02)


def test_compliance_object_at_rest():
    s = halting_scenario(speed=0.0)
    tr = simulate_compliance_only(13600.0, s)
    assert np.all(tr.force == 0)


def test_parked_end_effector_misses():
    s = halting_scenario()
    tr = simulate_compliance_only(13600.0, s, ee_position=-5.0)
    assert detect_contact_outcome(tr) == "missed"


def test_trace_invariants(compliance_trace, aware_trace, agnostic_trace):
    for tr in (compliance_trace, aware_trace, agnostic_trace):
        assert np.all(np.diff(tr.t) > 0)
        assert np.all(tr.force >= 0)
        assert np.all(tr.force[tr.gap > 0] == 0)


def test_rollout_deterministic(halting, aware_plan, aware_trace):
    traj, sched, _ = aware_plan
    again = simulate_rollout(traj, sched, halting[0])
    assert np.array_equal(again.force, aware_trace.force)
    assert np.array_equal(again.y, aware_trace.y)


def test_rollout_rejects_coarse_step(halting, aware_plan):
    traj, sched, _ = aware_plan
    with pytest.raises(ValueError):
        simulate_rollout(traj, sched, halting[0], dt=2e-3)


def test_rollout_rejects_mismatched_schedule(halting, aware_plan, agnostic_plan):
    traj, _, _ = aware_plan
    from impactplan.core import ImpedanceSchedule

    with pytest.raises(ValueError, match="mismatch"):
        simulate_rollout(traj, ImpedanceSchedule(aware_plan[1].segments[:1]), halting[0])


def test_grid_refinement(halting, aware_plan, compliance_trace, aware_trace):
    s = halting[0]
    fine = simulate_compliance_only(13600.0, s, dt=5e-4)
    assert abs(fine.peak_force() - compliance_trace.peak_force()) < 0.01 * compliance_trace.peak_force()
    traj, sched, _ = aware_plan
    fine = simulate_rollout(traj, sched, s, dt=5e-4)
    assert abs(fine.peak_force() - aware_trace.peak_force()) < 0.01 * aware_trace.peak_force()


def test_free_motion_rollout_is_uniform():
    s0 = halting_scenario()
    task = Task(y0=[0.2], ydot0=[0.1], ydotN=[0.1])
    s = Scenario(s0.object, s0.workspace, task)
    z = ModeSequence((FREE,), (10,))
    traj, sched, _ = plan(s, z)
    tr = simulate_rollout(traj, sched, s)
    assert np.all(tr.force == 0)
    assert np.allclose(tr.y, 0.2 + 0.1 * tr.t, atol=1e-9)


def test_fit_noiseless_recovery():
    t = np.linspace(0, 0.5, 26)
    fit = fit_rolling_friction(np.column_stack([t, 0.65 * t - 0.025 * t**2]))
    assert fit.v0 == pytest.approx(0.65, abs=1e-8)
    assert fit.decel == pytest.approx(0.05, abs=1e-8)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_constant_positions():
    t = np.linspace(0, 1, 6)
    fit = fit_rolling_friction(np.column_stack([t, np.full_like(t, 0.3)]))
    assert fit.v0 == pytest.approx(0.0, abs=1e-12)
    assert fit.decel == pytest.approx(0.0, abs=1e-12)
    assert fit.r_squared == 1.0


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_rolling_friction([[0, 0], [1, 1], [2, 2], [3, 3]])
    with pytest.raises(ValueError):
        fit_rolling_friction([[0, 0]] * 5)
    with pytest.raises(ValueError):
        fit_rolling_friction([[0, 0], [2, 1], [1, 1], [3, 3], [4, 4]])


def test_fit_prediction_stops_at_rest():
    t = np.linspace(0, 1, 11)
    fit = fit_rolling_friction(np.column_stack([t, 0.5 * t - 0.25 * t**2]))
    assert fit.predict(1.0) == pytest.approx(0.25)
    assert fit.predict(5.0) == pytest.approx(0.5 * 1.0 - 0.25 * 1.0)
    assert fit.velocity(0.0) == pytest.approx(0.5)


def test_noisy_fit_r_squared_distribution():
    # slow rolling object under 5 mm position noise over a 0.5 s window
    t = np.linspace(0, 0.5, 51)
    r2 = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        p = 0.1 + 0.06 * t - 0.025 * t**2 + rng.normal(0, 0.005, t.size)
        r2.append(fit_rolling_friction(np.column_stack([t, p])).r_squared)
    assert 0.5 <= np.median(r2) <= 0.9
    assert np.all(np.array(r2) <= 1.0)
