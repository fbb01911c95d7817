"""Rollout simulator for planned trajectories and the rolling-friction estimator.

Motion is simulated along the contact normal. The end-effector is the
impedance law itself, without inertia of its own: out of contact it obeys

    B (c_ref' - e') + K (c_ref - e) = 0,

and in contact it rides on the object face while pushing with
``K (c_ref - e) + B (c_ref' - e')``, clamped at zero because it cannot pull.
The object is a point mass on a frictionless table. Integration is
semi-implicit Euler on a uniform grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contact import cdds_propagate
from .core import ImpedanceSchedule, ImpedanceSegment, Mode, Scenario, Trajectory

MAINTAIN_GAP = 1e-3  # m, largest gap still counted as contact
REBOUND_GAP = 5e-3  # m, gap that counts as the object being driven away
REST_SPEED = 0.01  # m/s, object considered stopped
TOUCH_TOL = 1e-9  # m
SETTLE_TIME = 1.0  # s, simulated past the plan horizon


@dataclass
class SimTrace:
    """Uniformly sampled rollout. Positions are coordinates along the contact normal."""

    t: np.ndarray
    y: np.ndarray  # object position
    ydot: np.ndarray
    e: np.ndarray  # end-effector position
    edot: np.ndarray
    ref: np.ndarray  # impedance reference position
    force: np.ndarray  # normal contact force on the object, N
    gap: np.ndarray  # face-to-end-effector distance, m
    damper_power: np.ndarray  # W
    mass: float

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def peak_force(self) -> float:
        return float(np.max(self.force)) if self.force.size else 0.0

    def kinetic_energy(self) -> np.ndarray:
        return 0.5 * self.mass * self.ydot**2

    def dissipated(self) -> float:
        """Energy removed by the damper over the whole trace, J."""
        return float(np.sum(self.damper_power) * self.dt)

    def energy_balance(self) -> float:
        """Relative mismatch between the object's kinetic-energy loss and the damper dissipation."""
        ke_loss = float(self.kinetic_energy()[0] - self.kinetic_energy()[-1])
        scale = max(abs(ke_loss), 1e-12)
        return abs(ke_loss - self.dissipated()) / scale


def _hermite(p0, v0, p1, v1, h, tau):
    s = tau / h
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    pos = h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1
    d00 = (6 * s**2 - 6 * s) / h
    d10 = 3 * s**2 - 4 * s + 1
    d01 = (-6 * s**2 + 6 * s) / h
    d11 = 3 * s**2 - 2 * s
    vel = d00 * p0 + d10 * v0 + d01 * p1 + d11 * v1
    return pos, vel


class _Reference:
    """Impedance reference and gains interpolated from a plan.

    Between knots the end-effector path is the cubic Hermite through the
    knot positions and velocities, except across a contact change where the
    plan holds the pre-switch velocity. The planned force follows the exact
    transmission response within a contact stage. When the plan carries a
    transmission model its force is fed forward as an offset ``f / K`` of
    the reference, so that perfect tracking reproduces the planned force.
    """

    def __init__(self, traj: Trajectory, sched: ImpedanceSchedule, s: Scenario, feedforward: bool):
        n = s.normal()
        n = n / np.linalg.norm(n)
        self.t = traj.t
        self.h = traj.dt
        self.c = traj.c @ n
        self.cd = traj.cdot @ n
        self.f = traj.f @ n
        self.fd = traj.fdot @ n
        self.k = traj.k
        self.stage = np.full(traj.n_knots, -1)
        stage = -1
        for i, k in enumerate(traj.k):
            if k == 1 and (i == 0 or traj.mode_index[i] != traj.mode_index[i - 1]):
                stage += 1
            if k == 1:
                self.stage[i] = stage
        self.alpha = traj.alpha
        self.f_d = traj.f_d
        self.transmission = traj.transmission
        self.sched = sched
        self.feedforward = feedforward

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    def __call__(self, tq: float, touching: bool):
        """Return ``(c_ref, c_ref', K, B)`` at time ``tq``."""
        if tq >= self.horizon:
            seg = self.sched.at(self.horizon)
            return self.c[-1], 0.0, seg.K, seg.B
        i = int(np.clip(np.searchsorted(self.t, tq, side="right") - 1, 0, len(self.t) - 2))
        tau, h = tq - self.t[i], self.h[i]
        ki, kj = self.k[i], self.k[i + 1]
        seg = self.sched.at(tq)
        if ki == kj:
            c, cd = _hermite(self.c[i], self.cd[i], self.c[i + 1], self.cd[i + 1], h, tau)
        elif kj == 1 and touching:
            # contact arrived early: switch to the post-impact reference
            c = self.c[i + 1] - (h - tau) * self.cd[i + 1]
            cd = self.cd[i + 1]
            seg = self.sched.at(self.t[i + 1])
        else:
            c, cd = self.c[i] + tau * self.cd[i], self.cd[i]
        if self.feedforward:
            c = c + self._force(i, tau) / seg.K
        return c, cd, seg.K, seg.B

    def _force(self, i: int, tau: float) -> float:
        ki, kj, h = self.k[i], self.k[i + 1], self.h[i]
        if ki == 1 and kj == 1:
            if self.transmission:
                st = self.stage[i]
                return float(cdds_propagate(self.f[i], self.fd[i], self.alpha[st], self.f_d[st], tau)[0])
            return self.f[i] + (self.f[i + 1] - self.f[i]) * tau / h
        if ki == 1:
            return self.f[i] * (1.0 - tau / h)
        return 0.0

    def force(self, tq: float) -> float:
        """Planned normal force at time ``tq``; zero past the horizon."""
        if tq >= self.horizon:
            return 0.0
        i = int(np.clip(np.searchsorted(self.t, tq, side="right") - 1, 0, len(self.t) - 2))
        return self._force(i, tq - self.t[i])


def _check_schedule(traj: Trajectory, sched: ImpedanceSchedule) -> None:
    """One segment per mode, starting at the mode's first knot."""
    starts = np.nonzero(np.diff(traj.mode_index, prepend=-1))[0]
    segs = sched.segments
    if len(segs) != len(starts) or any(
        abs(seg.t - traj.t[i]) > 1e-9 or seg.mode.k != traj.k[i] for seg, i in zip(segs, starts)
    ):
        raise ValueError("schedule/trajectory mismatch")


def planned_force(traj: Trajectory, s: Scenario, t) -> np.ndarray:
    """Planned normal force sampled at times ``t`` with the rollout's interpolation."""
    sched = ImpedanceSchedule((ImpedanceSegment(0.0, 1.0, 1.0, traj.mass, Mode(0, 0)),))
    ref = _Reference(traj, sched, s, feedforward=False)
    return np.array([ref.force(float(tq)) for tq in np.atleast_1d(t)])


def _integrate(reference, s: Scenario, y0: float, v0: float, e0: float, t_end: float, dt: float) -> SimTrace:
    n = s.normal()
    n = n / np.linalg.norm(n)
    g = float(s.contact_offset() @ n)
    M = s.object.mass
    steps = int(np.floor(t_end / dt + 1e-9)) + 1
    out = {k: np.zeros(steps) for k in ("y", "ydot", "e", "edot", "ref", "force", "gap", "damper_power")}
    t = np.arange(steps) * dt
    y, v, e = float(y0), float(v0), float(e0)
    edot = 0.0
    for k in range(steps):
        face = y + g
        gap = face - e
        touching = gap <= TOUCH_TOL
        cr, cdr, K, B = reference(t[k], touching)
        f = 0.0
        if touching:
            f = max(0.0, K * (cr - face) + B * (cdr - v))
        if f > 0.0:
            edot = v
        else:
            edot = cdr + (K / B) * (cr - e)
        out["y"][k], out["ydot"][k], out["e"][k], out["edot"][k] = y, v, e, edot
        out["ref"][k], out["force"][k], out["gap"][k] = cr, f, max(gap, 0.0)
        v_new = v + dt * f / M
        if f > 0.0:
            # work of the damper force over the step, at the mean object velocity
            out["damper_power"][k] = B * (v - cdr) * (0.5 * (v + v_new) - cdr)
        else:
            out["damper_power"][k] = B * (edot - cdr) ** 2
        v = v_new
        y += dt * v
        if f > 0.0:
            e = y + g
        else:
            # the end-effector cannot pass through the face
            e = min(e + dt * edot, y + g)
    return SimTrace(t=t, mass=M, **out)


def simulate_rollout(
    traj: Trajectory,
    sched: ImpedanceSchedule,
    s: Scenario,
    dt: float = 1e-3,
    settle: float = SETTLE_TIME,
    feedforward: bool | None = None,
) -> SimTrace:
    """Track a plan with its impedance schedule.

    Parameters
    ----------
    dt : float
        Integration step, at most 1 ms.
    settle : float
        Time simulated after the plan horizon, holding the final reference.
    feedforward : bool, optional
        Offset the reference by the planned force. Defaults to whether the
        plan carries a transmission model; an impact-agnostic plan has no
        map from force to impedance reference and only tracks motion.

    Raises
    ------
    ValueError
        On ``dt > 1 ms`` or a schedule that does not fit the trajectory.
    """
    if not 0 < dt <= 1e-3 + 1e-15:
        raise ValueError("dt must be in (0, 1 ms]")
    if traj.n_knots < 2:
        raise ValueError("schedule/trajectory mismatch")
    _check_schedule(traj, sched)
    ff = traj.transmission if feedforward is None else feedforward
    ref = _Reference(traj, sched, s, ff)
    n = s.normal() / np.linalg.norm(s.normal())
    y0 = float(s.task.y0 @ n)
    v0 = float(s.task.ydot0 @ n)
    e0 = ref(0.0, False)[0]
    return _integrate(ref, s, y0, v0, e0, traj.horizon + settle, dt)


def simulate_compliance_only(
    K: float,
    s: Scenario,
    dt: float = 1e-3,
    virtual_mass: float | None = None,
    duration: float = 2.0,
    ee_position: float = 0.0,
) -> SimTrace:
    """Hold a fixed reference and let the object collide with a compliant end-effector.

    The damping is critical for ``virtual_mass``, which defaults to the
    object mass.
    """
    if not K > 0:
        raise ValueError("K must be > 0")
    Mv = s.object.mass if virtual_mass is None else float(virtual_mass)
    if not Mv > 0:
        raise ValueError("virtual_mass must be > 0")
    B = 2.0 * np.sqrt(Mv * K)

    def reference(t, touching):
        return ee_position, 0.0, K, B

    n = s.normal() / np.linalg.norm(s.normal())
    return _integrate(reference, s, float(s.task.y0 @ n), float(s.task.ydot0 @ n), ee_position, duration, dt)


def detect_contact_outcome(trace: SimTrace) -> str:
    """Classify a rollout as ``"maintained"``, ``"rebound"`` or ``"missed"``.

    A gap reopening past 5 mm after first touch is a rebound. Otherwise
    contact is maintained if, from first touch until the object speed falls
    below 1 cm/s, the gap never exceeds 1 mm. The remaining case, a gap
    between 1 and 5 mm while the object still moves, also counts as a
    rebound since contact was lost.
    """
    if trace.t.size == 0:
        raise ValueError("empty trace")
    touch = np.nonzero(trace.gap <= TOUCH_TOL)[0]
    if touch.size == 0:
        return "missed"
    k0 = touch[0]
    if np.max(trace.gap[k0:]) > REBOUND_GAP:
        return "rebound"
    slow = np.nonzero(np.abs(trace.ydot[k0:]) < REST_SPEED)[0]
    k1 = k0 + slow[0] if slow.size else len(trace.t) - 1
    if np.max(trace.gap[k0 : k1 + 1]) <= MAINTAIN_GAP:
        return "maintained"
    return "rebound"


def max_gap_after_touch(trace: SimTrace) -> float:
    touch = np.nonzero(trace.gap <= TOUCH_TOL)[0]
    return float(np.max(trace.gap[touch[0] :])) if touch.size else float("nan")


# -- rolling friction --------------------------------------------------------


@dataclass(frozen=True)
class FrictionFit:
    """Constant-deceleration motion model ``p(t) = p0 + v0 t - a t^2 / 2``."""

    v0: float
    decel: float
    r_squared: float
    p0: float = 0.0
    t0: float = 0.0

    def velocity(self, t) -> np.ndarray:
        tau = np.asarray(t, float) - self.t0
        return self.v0 - self.decel * tau

    def predict(self, t) -> np.ndarray:
        """Position by integrating the fitted deceleration forward from ``t0``.

        Rolling friction brings the object to rest; it stays there once the
        velocity reaches zero.
        """
        tau = np.asarray(t, float) - self.t0
        if self.decel > 0 and self.v0 > 0:
            tau = np.minimum(tau, self.v0 / self.decel)
        return self.p0 + self.v0 * tau - 0.5 * self.decel * tau**2


def fit_rolling_friction(samples) -> FrictionFit:
    """Least-squares fit of a constant-deceleration model to ``(t, position)`` samples.

    Time is measured from the first sample. The deceleration is constrained
    to be non-negative. ``r_squared`` is 1 when the positions do not vary
    and the fit is exact.

    Raises
    ------
    ValueError
        On fewer than 5 samples, unordered times or all-equal times.
    """
    data = np.asarray(samples, float)
    if data.ndim != 2 or data.shape[1] != 2 or len(data) < 5:
        raise ValueError("need at least 5 (t, position) samples")
    t, p = data[:, 0], data[:, 1]
    if np.any(np.diff(t) < 0):
        raise ValueError("samples must be time-ordered")
    if np.ptp(t) == 0:
        raise ValueError("degenerate design matrix: all sample times are equal")
    t0 = float(t[0])
    tau = t - t0
    A = np.column_stack([np.ones_like(tau), tau, -0.5 * tau**2])
    coef = np.linalg.lstsq(A, p, rcond=None)[0]
    if coef[2] < 0:
        # the bound decel >= 0 is active: the best fit is a straight line
        coef = np.append(np.linalg.lstsq(A[:, :2], p, rcond=None)[0], 0.0)
    p0, v0, a = coef
    resid = p - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((p - p.mean()) ** 2))
    if ss_tot <= 1e-30 * max(1.0, float(p @ p)):
        r2 = 1.0 if ss_res <= 1e-24 * max(1.0, float(p @ p)) else -np.inf
    else:
        r2 = 1.0 - ss_res / ss_tot
    return FrictionFit(v0=float(v0), decel=float(a), r_squared=float(r2), p0=float(p0), t0=t0)
