"""Domain value types shared across the planner, simulator and CLI.

Conventions
-----------
* ``nu`` is the spatial dimension of the task (1 or 2). Object pose ``y`` and
  end-effector position ``c`` are ``nu``-vectors in the world frame; the
  object only translates, so the contact point ``g_pt`` moves rigidly with it.
* Motion takes place on a table. Gravity is carried by the table support and
  does not enter the horizontal dynamics.
* ``contact_normal`` is the inward surface normal at ``g_pt``: the direction
  in which the end-effector pushes the object. For ``nu == 1`` only its first
  component (``+1`` or ``-1``) is used.
* A mode is ``(k, l)``: contact state ``k`` (0 free, 1 contact) and control
  stage ``l`` (-1 absorbing, +1 pushing, 0 for free motion).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import SurfaceSpline, signed_distance
from .nlp import ad

FREE = (0, 0)
ABSORB = (1, -1)
PUSH = (1, 1)


def _vec(x) -> np.ndarray:
    a = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ObjectModel:
    mass: float
    inertia: float
    surface: SurfaceSpline
    contact_point: np.ndarray
    contact_normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "contact_point", _vec(self.contact_point))
        object.__setattr__(self, "contact_normal", _vec(self.contact_normal))


@dataclass(frozen=True, eq=False)
class Workspace:
    """Box approximation of the end-effector's reachable set."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _vec(self.lower))
        object.__setattr__(self, "upper", _vec(self.upper))


@dataclass(frozen=True)
class Mode:
    k: int
    l: int  # noqa: E741

    @property
    def in_contact(self) -> bool:
        return self.k == 1

    def is_valid(self) -> bool:
        if self.k == 0:
            return self.l == 0
        return self.k == 1 and self.l in (-1, 1)

    def __str__(self):
        return f"({self.k},{self.l:+d})" if self.k else "(0,0)"


@dataclass(frozen=True)
class ModeSequence:
    modes: tuple
    knots_per_mode: tuple

    def __post_init__(self):
        modes = tuple(m if isinstance(m, Mode) else Mode(*m) for m in self.modes)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "knots_per_mode", tuple(int(n) for n in self.knots_per_mode))

    @classmethod
    def uniform(cls, modes, knots: int = 10) -> "ModeSequence":
        modes = list(modes)
        return cls(tuple(modes), tuple([knots] * len(modes)))

    @property
    def n_knots(self) -> int:
        return sum(self.knots_per_mode)

    def __len__(self):
        return len(self.modes)

    def knot_modes(self) -> list[Mode]:
        out = []
        for m, n in zip(self.modes, self.knots_per_mode):
            out.extend([m] * n)
        return out

    def knot_mode_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.modes)), self.knots_per_mode)

    def violations(self) -> list[str]:
        out = []
        if not self.modes:
            out.append("modes must be non-empty")
        if len(self.modes) != len(self.knots_per_mode):
            out.append("modes and knots_per_mode differ in length")
        for j, m in enumerate(self.modes):
            if not m.is_valid():
                out.append(f"modes[{j}] = {m} is not a valid (k, l) pair")
        for j, n in enumerate(self.knots_per_mode):
            if n < 2:
                out.append(f"knots_per_mode[{j}] must be >= 2")
        for j in range(1, len(self.modes)):
            if self.modes[j] == self.modes[j - 1]:
                out.append(f"modes[{j}] repeats modes[{j - 1}]")
            if self.modes[j - 1] == Mode(*PUSH) and self.modes[j] == Mode(*ABSORB):
                out.append(f"modes[{j}]: stage -1 may not follow stage +1 within one contact")
        return out


@dataclass(frozen=True, eq=False)
class Task:
    y0: np.ndarray
    ydot0: np.ndarray
    yN: np.ndarray | None = None
    ydotN: np.ndarray | None = None
    friction_mu: float = 0.5
    f_max: float = 500.0
    alpha_bounds: tuple = (0.5, 20.0)
    dt_bounds: tuple = (0.005, 0.2)
    accel_max: float = 10.0  # end-effector acceleration limit, m/s^2

    def __post_init__(self):
        object.__setattr__(self, "y0", _vec(self.y0))
        object.__setattr__(self, "ydot0", _vec(self.ydot0))
        if self.yN is not None:
            object.__setattr__(self, "yN", _vec(self.yN))
        if self.ydotN is not None:
            object.__setattr__(self, "ydotN", _vec(self.ydotN))
        object.__setattr__(self, "alpha_bounds", tuple(float(a) for a in self.alpha_bounds))
        object.__setattr__(self, "dt_bounds", tuple(float(a) for a in self.dt_bounds))


@dataclass(frozen=True, eq=False)
class Scenario:
    object: ObjectModel
    workspace: Workspace
    task: Task
    spatial_dim: int = 1

    @property
    def nu(self) -> int:
        return self.spatial_dim

    def normal(self) -> np.ndarray:
        """Inward contact normal restricted to the task dimension."""
        return np.asarray(self.object.contact_normal[: self.nu], float)

    def contact_offset(self) -> np.ndarray:
        """Contact point in the object frame, restricted to the task dimension."""
        return np.asarray(self.object.contact_point[: self.nu], float)

    def ee_point(self, c, y):
        """End-effector location in the object's cross-section frame.

        For ``nu == 1`` the end-effector moves on the line through the
        contact point parallel to the motion axis.
        """
        rel = c - y
        if self.nu == 2:
            return rel
        height = np.full(np.shape(ad.value(rel)), self.object.contact_point[1])
        return ad.concatenate([rel, height], axis=-1)


@dataclass
class Trajectory:
    """Planner output. Per-knot arrays have a leading axis of length ``N``."""

    y: np.ndarray
    ydot: np.ndarray
    c: np.ndarray
    cdot: np.ndarray
    cddot: np.ndarray
    f: np.ndarray
    fdot: np.ndarray
    fddot: np.ndarray
    dt: np.ndarray
    alpha: np.ndarray
    f_d: np.ndarray
    stage_l: np.ndarray
    mode_index: np.ndarray
    k: np.ndarray
    l: np.ndarray  # noqa: E741
    t: np.ndarray = field(init=False)
    normal: np.ndarray | None = None
    mass: float = 1.0
    transmission: bool = True  # forces obey the transmission ODE

    def __post_init__(self):
        self.t = np.concatenate([[0.0], np.cumsum(self.dt[:-1])])

    @property
    def n_knots(self) -> int:
        return len(self.dt)

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    def normal_force(self) -> np.ndarray:
        if self.normal is None:
            return np.linalg.norm(self.f, axis=1)
        return self.f @ self.normal

    def contact_knots(self) -> np.ndarray:
        return np.nonzero(self.k == 1)[0]

    def contact_window(self) -> tuple[float, float]:
        idx = self.contact_knots()
        if idx.size == 0:
            return (np.nan, np.nan)
        return float(self.t[idx[0]]), float(self.t[idx[-1]])

    def contact_duration(self) -> float:
        a, b = self.contact_window()
        return 0.0 if np.isnan(a) else b - a

    def peak_force(self) -> float:
        return float(np.max(np.linalg.norm(self.f, axis=1)))

    def stage_alpha(self, l: int) -> float:  # noqa: E741
        idx = np.nonzero(self.stage_l == l)[0]
        return float(self.alpha[idx[0]]) if idx.size else float("nan")

    def violations(self, task: Task, tol: float = 1e-9) -> list[str]:
        out = []
        lo, hi = task.dt_bounds
        if np.any(self.dt < lo - tol) or np.any(self.dt > hi + tol):
            out.append("dt outside bounds")
        if np.any(np.abs(self.f[self.k == 0]) > tol):
            out.append("non-zero force at a free-motion knot")
        if self.alpha.size:
            a_lo, a_hi = task.alpha_bounds
            if np.any(self.alpha < a_lo - tol) or np.any(self.alpha > a_hi + tol):
                out.append("alpha outside bounds")
        if np.any(np.diff(self.t) <= 0):
            out.append("time not strictly increasing")
        if np.any((self.k == 0) & (self.l != 0)):
            out.append("free-motion knot with non-zero stage")
        return out


@dataclass(frozen=True)
class ImpedanceSegment:
    t: float
    K: float
    B: float
    M: float
    mode: Mode


@dataclass(frozen=True)
class ImpedanceSchedule:
    """Piecewise-constant impedance gains; segment ``j`` starts at ``segments[j].t``."""

    segments: tuple

    def at(self, t: float) -> ImpedanceSegment:
        seg = self.segments[0]
        for s in self.segments:
            if s.t <= t + 1e-12:
                seg = s
            else:
                break
        return seg

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.segments])


def validate_scenario(s: Scenario) -> list[str]:
    """Describe every violated invariant; an empty list means valid."""
    out = []
    obj, ws, task = s.object, s.workspace, s.task
    nu = s.spatial_dim
    if nu not in (1, 2):
        out.append("spatial_dim must be 1 or 2")
        return out
    if not obj.mass > 0:
        out.append("object.mass must be > 0")
    if not obj.inertia >= 0:
        out.append("object.inertia must be >= 0")
    if obj.contact_point.shape != (2,):
        out.append("object.contact_point must be a 2-vector")
    else:
        d = abs(signed_distance(obj.surface, obj.contact_point))
        if d > 1e-6:
            out.append(f"object.contact_point is {d:.3g} m off the surface (limit 1e-6)")
    if obj.contact_normal.shape != (nu,):
        out.append(f"object.contact_normal must have dimension {nu}")
    elif abs(np.linalg.norm(obj.contact_normal) - 1.0) > 1e-9:
        out.append("object.contact_normal must be a unit vector")
    if ws.lower.shape != (nu,) or ws.upper.shape != (nu,):
        out.append(f"workspace bounds must have dimension {nu}")
    else:
        for ax in range(nu):
            if not ws.lower[ax] < ws.upper[ax]:
                out.append(f"workspace.lower < workspace.upper violated on axis {ax}")
    for name in ("y0", "ydot0", "yN", "ydotN"):
        v = getattr(task, name)
        if v is not None and v.shape != (nu,):
            out.append(f"task.{name} must have dimension {nu}")
    if task.yN is None and task.ydotN is None:
        out.append("task needs at least one of yN, ydotN")
    if not task.friction_mu >= 0:
        out.append("task.friction_mu must be >= 0")
    if not task.f_max > 0:
        out.append("task.f_max must be > 0")
    a_lo, a_hi = task.alpha_bounds
    if not a_lo > 0:
        out.append("task.alpha_bounds lower must be > 0")
    if not a_lo <= a_hi:
        out.append("task.alpha_bounds must satisfy lower <= upper")
    t_lo, t_hi = task.dt_bounds
    if not t_lo > 0:
        out.append("task.dt_bounds lower must be > 0")
    if not t_lo <= t_hi:
        out.append("task.dt_bounds must satisfy lower <= upper")
    if not task.accel_max > 0:
        out.append("task.accel_max must be > 0")
    return out
