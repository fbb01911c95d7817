import numpy as np
import pytest

from impactplan.nlp import CONVERGED, NlpProblem, SolverOptions, kkt_residual, solve
from impactplan.nlp import ad


def active_bound():
    return NlpProblem(1, [1.0], [np.inf], lambda x: x[0] ** 2)


def equality_qp():
    return NlpProblem(
        2, -np.inf, np.inf, lambda x: x[0] ** 2 + x[1] ** 2, eq_constraints=lambda x: ad.stack([x[0] + x[1] - 2])
    )


def rosenbrock():
    return NlpProblem(2, -np.inf, np.inf, lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2)


def test_active_bound():
    sol = solve(active_bound(), np.array([3.0]))
    assert sol.status == CONVERGED
    assert sol.x_star == pytest.approx([1.0], abs=1e-5)
    assert sol.objective_value == pytest.approx(1.0, abs=1e-5)


def test_equality_qp():
    sol = solve(equality_qp(), np.array([0.0, 0.0]))
    assert sol.status == CONVERGED
    assert sol.x_star == pytest.approx([1.0, 1.0], abs=1e-5)
    assert sol.eq_multipliers == pytest.approx([2.0], abs=1e-4)


def test_rosenbrock():
    sol = solve(rosenbrock(), np.array([-1.2, 1.0]))
    assert sol.status == CONVERGED
    assert sol.x_star == pytest.approx([1.0, 1.0], abs=1e-5)


def test_inequality_and_kkt_check():
    # min (x-2)^2 + (y-1)^2 s.t. x^2 + y^2 <= 1
    p = NlpProblem(
        2,
        -np.inf,
        np.inf,
        lambda x: (x[0] - 2) ** 2 + (x[1] - 1) ** 2,
        ineq_constraints=lambda x: ad.stack([1 - x[0] ** 2 - x[1] ** 2]),
    )
    sol = solve(p, np.array([0.0, 0.0]))
    assert sol.status == CONVERGED
    assert sol.x_star == pytest.approx(np.array([2, 1]) / np.sqrt(5), abs=1e-5)
    assert kkt_residual(p, sol.x_star, sol.eq_multipliers, sol.ineq_multipliers) <= 1e-5
    assert sol.max_violation <= 1e-6


def test_deterministic():
    a = solve(rosenbrock(), np.array([-1.2, 1.0]))
    b = solve(rosenbrock(), np.array([-1.2, 1.0]))
    assert np.array_equal(a.x_star, b.x_star) and a.iterations == b.iterations


def test_start_outside_bounds_is_clamped():
    sol = solve(active_bound(), np.array([-5.0]))
    assert sol.status == CONVERGED
    assert sol.x_star == pytest.approx([1.0], abs=1e-5)


def test_iteration_cap():
    sol = solve(rosenbrock(), np.array([-1.2, 1.0]), SolverOptions(max_outer=1, max_inner=2))
    assert sol.status != CONVERGED


def test_infeasible_reported():
    p = NlpProblem(
        1, -np.inf, np.inf, lambda x: x[0] ** 2, eq_constraints=lambda x: ad.stack([x[0] ** 2 + 1])
    )
    sol = solve(p, np.array([0.5]))
    assert sol.status != CONVERGED
