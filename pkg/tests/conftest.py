"""Shared fixtures. Plans and rollouts are solved once per session."""

import numpy as np
import pytest

from impactplan.planner import plan, plan_impact_agnostic, agnostic_schedule
from impactplan.scenarios import halting_modes, halting_scenario
from impactplan.sim import simulate_compliance_only, simulate_rollout


@pytest.fixture(scope="session")
def halting():
    s = halting_scenario()
    z = halting_modes()
    return s, z


@pytest.fixture(scope="session")
def aware_plan(halting):
    s, z = halting
    traj, sched, sol = plan(s, z)
    return traj, sched, sol


@pytest.fixture(scope="session")
def agnostic_plan(halting):
    s, z = halting
    traj, sol = plan_impact_agnostic(s, z)
    return traj, agnostic_schedule(traj, z, s.task.alpha_bounds[1]), sol


@pytest.fixture(scope="session")
def aware_trace(halting, aware_plan):
    traj, sched, _ = aware_plan
    return simulate_rollout(traj, sched, halting[0])


@pytest.fixture(scope="session")
def agnostic_trace(halting, agnostic_plan):
    traj, sched, _ = agnostic_plan
    return simulate_rollout(traj, sched, halting[0])


@pytest.fixture(scope="session")
def compliance_trace(halting):
    return simulate_compliance_only(13600.0, halting[0])


@pytest.fixture
def rng():
    return np.random.default_rng(0)
