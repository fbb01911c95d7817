import dataclasses

import numpy as np
import pytest

from impactplan.core import ABSORB, FREE, PUSH, Mode, ModeSequence, Scenario, Workspace, validate_scenario
from impactplan.scenarios import box_object, halting_modes, halting_scenario


def test_valid_scenario_has_no_violations():
    assert validate_scenario(halting_scenario()) == []


def test_zero_mass_reported():
    s = halting_scenario()
    obj = dataclasses.replace(s.object, mass=0.0)
    assert validate_scenario(Scenario(obj, s.workspace, s.task)) == ["object.mass must be > 0"]


def test_degenerate_workspace_reported():
    s = halting_scenario()
    ws = Workspace([0.3], [0.3])
    assert validate_scenario(Scenario(s.object, ws, s.task)) == ["workspace.lower < workspace.upper violated on axis 0"]


def test_contact_point_off_surface_reported():
    s = halting_scenario()
    obj = dataclasses.replace(box_object(), contact_point=np.array([-0.25, 0.0]))
    (msg,) = validate_scenario(Scenario(obj, s.workspace, s.task))
    assert msg.startswith("object.contact_point")


def test_mode_coupling():
    assert Mode(*FREE).is_valid() and Mode(*ABSORB).is_valid() and Mode(*PUSH).is_valid()
    assert not Mode(0, 1).is_valid()
    assert not Mode(1, 0).is_valid()


def test_mode_sequence_checks():
    assert halting_modes().violations() == []
    bad = ModeSequence((FREE, PUSH, ABSORB), (10, 10, 10))
    assert any("may not follow" in v for v in bad.violations())
    assert ModeSequence((FREE, FREE), (3, 3)).violations()
    assert ModeSequence((), ()).violations() == ["modes must be non-empty"]
    assert ModeSequence((FREE,), (1,)).violations()


def test_trajectory_invariants(aware_plan, halting):
    traj, sched, _ = aware_plan
    s, z = halting
    assert traj.violations(s.task) == []
    assert np.all((traj.k == 1) | (traj.l == 0))
    assert len(sched.segments) == len(z.modes)
    for seg in sched.segments:
        assert seg.B == pytest.approx(2 * np.sqrt(seg.M * seg.K), rel=1e-9)
        if seg.mode.in_contact:
            assert seg.K > 0
