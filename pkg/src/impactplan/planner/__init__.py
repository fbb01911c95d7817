"""Impact-aware multi-mode trajectory planning."""

from .api import (
    AGNOSTIC_WEIGHTS,
    PlanningError,
    SweepResult,
    SweepRow,
    agnostic_schedule,
    extract_trajectory,
    impedance_schedule,
    momentum_residual,
    plan,
    plan_impact_agnostic,
    sweep,
    verify_plan,
    with_alpha_max,
)
from .transcription import (
    BREAK_FORCE,
    SEPARATION_MARGIN,
    Transcription,
    TranscriptionError,
    TranscriptionLayout,
    Weights,
    friction_cone_check,
    initial_guess,
    make_layout,
    transcribe,
)

__all__ = [
    "AGNOSTIC_WEIGHTS",
    "BREAK_FORCE",
    "PlanningError",
    "SEPARATION_MARGIN",
    "SweepResult",
    "SweepRow",
    "Transcription",
    "TranscriptionError",
    "TranscriptionLayout",
    "Weights",
    "agnostic_schedule",
    "extract_trajectory",
    "friction_cone_check",
    "impedance_schedule",
    "initial_guess",
    "make_layout",
    "momentum_residual",
    "plan",
    "plan_impact_agnostic",
    "sweep",
    "transcribe",
    "verify_plan",
    "with_alpha_max",
]
