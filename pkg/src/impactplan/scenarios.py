"""Reference scenarios: a 20 kg box sliding towards the robot on a table.

The object approaches along -x; the robot meets its -x face, whose inward
normal is +x. The end-effector box is ``[-workspace, reach]`` along x, so
``workspace`` is how far the robot can yield while absorbing the object.
By default the object starts with its contact face at the end-effector's
rest position, the origin.
"""

from __future__ import annotations

import numpy as np

from .core import ABSORB, FREE, PUSH, ModeSequence, ObjectModel, Scenario, Task, Workspace
from .geometry import box_points, spline_from_points

HALF_SIZE = 0.2  # m, half edge of the box cross-section
REACH = 1.0  # m, end-effector limit on the far side


def box_object(mass: float = 20.0, half_size: float = HALF_SIZE) -> ObjectModel:
    surface = spline_from_points(box_points(half_size))
    inertia = mass * (2 * half_size) ** 2 / 6.0
    return ObjectModel(
        mass=mass,
        inertia=inertia,
        surface=surface,
        contact_point=np.array([-half_size, 0.0]),
        contact_normal=np.array([1.0]),
    )


def halting_scenario(
    speed: float = 0.65,
    workspace: float = 0.5,
    mass: float = 20.0,
    start: float = HALF_SIZE,
    **task_kw,
) -> Scenario:
    """Bring an object moving at ``speed`` to rest."""
    task = Task(y0=[start], ydot0=[-speed], ydotN=[0.0], **task_kw)
    return Scenario(
        object=box_object(mass),
        workspace=Workspace([-workspace], [REACH]),
        task=task,
        spatial_dim=1,
    )


def halt_push_scenario(
    goal: float = 0.8,
    workspace: float = 0.5,
    speed: float = 0.4,
    mass: float = 20.0,
    start: float = HALF_SIZE,
    **task_kw,
) -> Scenario:
    """Stop the object, then push it back to ``goal``."""
    task = Task(y0=[start], ydot0=[-speed], yN=[goal], **task_kw)
    return Scenario(
        object=box_object(mass),
        workspace=Workspace([-workspace], [REACH]),
        task=task,
        spatial_dim=1,
    )


def with_workspace(s: Scenario, workspace: float) -> Scenario:
    lower = s.workspace.lower.copy()
    lower[0] = -workspace
    return Scenario(s.object, Workspace(lower, s.workspace.upper), s.task, s.spatial_dim)


def with_goal(s: Scenario, goal: float) -> Scenario:
    t = s.task
    yN = np.array(t.yN if t.yN is not None else t.y0, dtype=float)
    yN[0] = goal
    task = Task(t.y0, t.ydot0, yN, t.ydotN, t.friction_mu, t.f_max, t.alpha_bounds, t.dt_bounds, t.accel_max)
    return Scenario(s.object, s.workspace, task, s.spatial_dim)


def halting_modes(knots: int = 10) -> ModeSequence:
    return ModeSequence.uniform([FREE, ABSORB], knots)


def halt_push_modes(knots: int = 10) -> ModeSequence:
    return ModeSequence.uniform([FREE, ABSORB, PUSH], knots)
