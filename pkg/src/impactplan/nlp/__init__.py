"""Generic smooth NLP machinery: forward-mode AD and an augmented-Lagrangian solver."""

from .ad import Dual, gradient, jacobian
from .solver import CONVERGED, INFEASIBLE, MAX_ITER, NlpProblem, Solution, SolverOptions, kkt_residual, solve

__all__ = [
    "CONVERGED",
    "Dual",
    "INFEASIBLE",
    "MAX_ITER",
    "NlpProblem",
    "Solution",
    "SolverOptions",
    "gradient",
    "jacobian",
    "kkt_residual",
    "solve",
]
