"""Impact-aware multi-mode trajectory planning.

Plans halting and pushing of a moving object by jointly optimising contact
timing, contact-force profiles shaped by a critically damped transmission
system, and the impedance stiffness that realises them. A rollout simulator
checks plans against compliance-only and impact-agnostic baselines.
"""

from .contact import (
    ImpactParams,
    alpha_to_gains,
    cdds_closed_form,
    cdds_propagate,
    cdds_step,
    settling_time,
    stiffness_to_alpha,
)
from .core import (
    ABSORB,
    FREE,
    PUSH,
    ImpedanceSchedule,
    ImpedanceSegment,
    Mode,
    ModeSequence,
    ObjectModel,
    Scenario,
    Task,
    Trajectory,
    Workspace,
    validate_scenario,
)
from .planner import PlanningError, Weights, plan, plan_impact_agnostic, sweep
from .sim import (
    FrictionFit,
    SimTrace,
    detect_contact_outcome,
    fit_rolling_friction,
    simulate_compliance_only,
    simulate_rollout,
)

__all__ = [
    "ABSORB",
    "FREE",
    "PUSH",
    "FrictionFit",
    "ImpactParams",
    "ImpedanceSchedule",
    "ImpedanceSegment",
    "Mode",
    "ModeSequence",
    "ObjectModel",
    "PlanningError",
    "Scenario",
    "SimTrace",
    "Task",
    "Trajectory",
    "Weights",
    "Workspace",
    "alpha_to_gains",
    "cdds_closed_form",
    "cdds_propagate",
    "cdds_step",
    "detect_contact_outcome",
    "fit_rolling_friction",
    "plan",
    "plan_impact_agnostic",
    "settling_time",
    "simulate_compliance_only",
    "simulate_rollout",
    "stiffness_to_alpha",
    "sweep",
    "validate_scenario",
]
