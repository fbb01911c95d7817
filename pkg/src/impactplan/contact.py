"""Impact mechanics and the critically damped force-transmission system.

The transmission system drives the contact force ``f`` towards a desired
force ``f_d`` through

    f'' + 2 alpha f' + alpha^2 f = alpha^2 f_d,

i.e. a mass-spring-damper with unit damping ratio. Matching its natural
frequency to an impedance ``(M, K, B)`` gives ``alpha = sqrt(K / M)`` and
``B = 2 sqrt(M K)``.

Restitution is not modelled by a coefficient here: for reference, a
coefficient of 1 is a perfectly elastic collision and 0 a perfectly
inelastic one; the two contact stages (absorbing, then pushing) take its
place in the planner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nlp import ad

# alpha * t at which the zero-state step response first reaches 95% of f_d.
# The rule of thumb t_s = 3 / alpha used by settling_time corresponds to
# about 80% (see ``cdds_closed_form(1, 1, 3)``).
EXACT_SETTLING_5PCT = 4.743864518390580


@dataclass(frozen=True)
class ImpactParams:
    M: float
    K: float
    B: float

    def __post_init__(self):
        if not (self.M > 0 and self.K > 0 and self.B >= 0):
            raise ValueError("need M > 0, K > 0, B >= 0")

    @classmethod
    def critically_damped(cls, M: float, K: float) -> "ImpactParams":
        return cls(M, K, 2.0 * np.sqrt(M * K))

    @property
    def alpha(self) -> float:
        return float(np.sqrt(self.K / self.M))

    @property
    def omega_n(self) -> float:
        return self.alpha

    @property
    def zeta(self) -> float:
        return self.B / (2.0 * np.sqrt(self.M * self.K))


@dataclass(frozen=True)
class ForceState:
    f: float
    fdot: float


def _positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")


def impact_energy(M: float, v_minus: float, v_plus: float) -> float:
    """Kinetic energy removed by an impact: ``M (v-^2 - v+^2) / 2``."""
    _positive(M=M)
    return 0.5 * M * (v_minus**2 - v_plus**2)


def impulse_velocity_jump(M: float, lam: float, dt: float, v_minus: float) -> float:
    """Post-impact velocity from the impulse ``lam * dt``."""
    _positive(M=M)
    if dt < 0:
        raise ValueError("dt must be >= 0")
    return v_minus + lam * dt / M


def damper_dissipation(samples, B: float) -> float:
    """Trapezoidal estimate of the energy ``int B xdot^2 dt`` over ``(t, xdot)`` samples."""
    s = np.asarray(samples, dtype=float)
    if s.ndim != 2 or len(s) < 2:
        raise ValueError("need at least 2 (t, xdot) samples")
    if B < 0:
        raise ValueError("B must be >= 0")
    t, v = s[:, 0], s[:, 1]
    if np.any(np.diff(t) < 0):
        raise ValueError("samples must be time-ordered")
    return float(B * np.trapezoid(v * v, t))


def stiffness_to_alpha(K: float, M: float) -> float:
    _positive(K=K, M=M)
    return float(np.sqrt(K / M))


def alpha_to_gains(alpha, M: float):
    """Critically damped impedance ``(K, B)`` for transmission rate ``alpha``."""
    _positive(alpha=alpha, M=M)
    K = alpha * alpha * M
    B = 2.0 * alpha * M
    return K, B


def settling_time(alpha: float) -> float:
    """Rule-of-thumb settling time ``3 / alpha``."""
    _positive(alpha=alpha)
    return 3.0 / alpha


def cdds_propagate(f, fdot, alpha, f_d, dt):
    """Exact state transition of the transmission ODE over ``dt``.

    Works elementwise on floats, arrays or dual numbers, so the planner's
    dynamics constraints and the simulator share one discretisation.
    """
    e0 = f - f_d
    a = fdot + alpha * e0
    decay = ad.exp(-alpha * dt)
    f1 = f_d + (e0 + a * dt) * decay
    fdot1 = (fdot - alpha * a * dt) * decay
    return f1, fdot1


def cdds_accel(f, fdot, alpha, f_d):
    """Second derivative implied by the ODE."""
    return alpha * alpha * (f_d - f) - 2.0 * alpha * fdot


def cdds_step(state: ForceState, alpha: float, f_d: float, dt: float) -> ForceState:
    _positive(alpha=alpha, dt=dt)
    f1, fd1 = cdds_propagate(state.f, state.fdot, alpha, f_d, dt)
    return ForceState(float(f1), float(fd1))


def cdds_closed_form(alpha: float, f_d: float, t):
    """Zero-state step response ``f_d (1 - (1 + alpha t) e^{-alpha t})``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    out = f_d * (1.0 - (1.0 + alpha * t) * np.exp(-alpha * t))
    return float(out) if out.ndim == 0 else out
