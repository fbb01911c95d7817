import numpy as np
import pytest

from impactplan.contact import cdds_closed_form, cdds_propagate
from impactplan.core import ABSORB, FREE, PUSH, ModeSequence, Scenario, Task
from impactplan.planner import (
    Transcription,
    TranscriptionError,
    Weights,
    friction_cone_check,
    initial_guess,
    make_layout,
    plan,
    plan_impact_agnostic,
    transcribe,
    verify_plan,
)
from impactplan.scenarios import halt_push_modes, halting_scenario


def at_rest_scenario():
    s = halting_scenario()
    return Scenario(s.object, s.workspace, Task(y0=[0.2], ydot0=[0.0], yN=[0.2], ydotN=[0.0]))


def test_layout_counts():
    assert make_layout(1, ModeSequence((FREE,), (3,))).n_vars == 27
    L = make_layout(1, halt_push_modes())
    assert L.n_stages == 2
    assert L.n_vars == 270 + 4


def test_layout_offsets_dense():
    L = make_layout(2, halt_push_modes(4))
    idx = sorted(L.index(name, i, a) for name in ("y", "ydot", "c", "cdot", "cddot", "f", "fdot", "fddot")
                 for i in range(L.n_knots) for a in range(2))
    idx += [L.index("dt", i) for i in range(L.n_knots)]
    idx += [L.index("alpha", j) for j in range(2)] + [L.index("f_d", j) for j in range(2)]
    assert sorted(idx) == list(range(L.n_vars))


def test_transcribe_rejects_bad_sequences(halting):
    s, _ = halting
    with pytest.raises(TranscriptionError):
        transcribe(s, ModeSequence((FREE, PUSH, ABSORB), (5, 5, 5)))
    with pytest.raises(TranscriptionError):
        transcribe(Scenario(s.object, s.workspace, s.task, spatial_dim=2), ModeSequence((FREE,), (5,)))


def test_free_knots_have_zero_force(halting):
    s, z = halting
    tr = Transcription(s, z)
    L = tr.layout
    for i in np.nonzero(np.array([m.k for m in z.knot_modes()]) == 0)[0]:
        for name in ("f", "fdot", "fddot"):
            j = L.index(name, i)
            assert tr.lower[j] == tr.upper[j] == 0.0


def test_initial_guess_rules(halting):
    s, z = halting
    x = initial_guess(s, z)
    L = make_layout(1, z)
    v = L.unpack(x)
    assert v["ydot"][0, 0] == s.task.ydot0[0]
    assert np.all(v["dt"] == pytest.approx(sum(s.task.dt_bounds) / 2))
    for name in ("f", "fdot", "fddot"):
        assert np.all(v[name] == 0)
    assert np.allclose(v["alpha"], np.sqrt(np.prod(s.task.alpha_bounds)))
    assert np.array_equal(x, initial_guess(s, z))


def test_friction_cone_examples():
    inside, w = friction_cone_check([0, 10], [0, 1], 0.5)
    assert inside and w == pytest.approx([5, 5])
    inside, w = friction_cone_check([6, 10], [0, 1], 0.5)
    assert not inside and w == pytest.approx([11, -1])
    inside, w = friction_cone_check([0, 0], [0, 1], 0.5)
    assert inside and w == pytest.approx([0, 0])
    with pytest.raises(ValueError):
        friction_cone_check([1, 1], [0, 0], 0.5)


def test_weights_parse():
    assert Weights.parse("1,0.1,1") == Weights(1.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        Weights.parse("1,2")


def test_at_rest_task_needs_no_force():
    s = at_rest_scenario()
    z = ModeSequence((FREE,), (10,))
    traj, _, sol = plan(s, z)
    assert np.all(traj.f == 0)
    lo = s.task.dt_bounds[0]
    assert sol.objective_value == pytest.approx(Weights().time * lo * z.n_knots, rel=1e-6)
    traj, sol = plan_impact_agnostic(s, ModeSequence((FREE, ABSORB), (10, 10)))
    assert np.max(np.abs(traj.f)) < 1e-3


def test_force_profile_follows_transmission(aware_plan):
    traj, _, _ = aware_plan
    kc = traj.contact_knots()
    t0 = traj.t[kc[0]]
    alpha, f_d = traj.alpha[0], traj.f_d[0]
    ref = cdds_closed_form(alpha, f_d, traj.t[kc] - t0)
    assert np.max(np.abs(traj.f[kc, 0] - ref)) <= 1e-3 * f_d
    f, fd = cdds_propagate(traj.f[kc[:-1], 0], traj.fdot[kc[:-1], 0], alpha, f_d, traj.dt[kc[:-1]])
    assert np.allclose(f, traj.f[kc[1:], 0], atol=1e-3 * f_d)


def test_plan_passes_independent_recheck(aware_plan, halting):
    traj, _, _ = aware_plan
    s, z = halting
    viol = verify_plan(traj, s, z)
    assert max(viol.values()) <= 1e-4, viol


def test_planar_halting_forces_inside_cone():
    from impactplan.core import ObjectModel, Workspace
    from impactplan.scenarios import box_object, halting_modes

    b = box_object()
    obj = ObjectModel(b.mass, b.inertia, b.surface, b.contact_point, np.array([1.0, 0.0]))
    task = Task(y0=[0.2, 0.0], ydot0=[-0.65, 0.0], ydotN=[0.0, 0.0])
    s = Scenario(obj, Workspace([-0.5, -0.5], [1.0, 0.5]), task, spatial_dim=2)
    z = halting_modes()
    traj, _, _ = plan(s, z)
    assert np.all(np.abs(traj.ydot[-1]) <= 1e-3)
    for i in traj.contact_knots():
        inside, w = friction_cone_check(traj.f[i], obj.contact_normal, task.friction_mu)
        assert inside or np.min(w) > -1e-6
    assert max(verify_plan(traj, s, z).values()) <= 1e-4
