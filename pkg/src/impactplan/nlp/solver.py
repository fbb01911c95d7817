"""Augmented-Lagrangian solver for smooth bound-constrained NLPs.

Problem form::

    min f(x)  s.t.  h(x) = 0,  g(x) >= 0,  lower <= x <= upper

The outer loop updates multipliers and the penalty (PHR scheme); each inner
subproblem is a bound-constrained minimisation by a structured quasi-Newton
method with a projected line search. All derivatives come from forward-mode
AD on the user's functions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.linalg import cho_factor, cho_solve

from . import ad

CONVERGED = "converged"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"
LAMBDA_MAX = 1e8


def _empty(x):
    return np.zeros(0)


@dataclass
class NlpProblem:
    """A smooth NLP. Constraint functions return 1-D vectors (possibly empty)."""

    n_vars: int
    lower: np.ndarray
    upper: np.ndarray
    objective: Callable
    eq_constraints: Callable = _empty
    ineq_constraints: Callable = _empty
    x_scale: np.ndarray | None = None
    obj_scale: float = 1.0  # the solver minimises objective / obj_scale
    sparse: bool = False  # compress Jacobian columns by a detected sparsity pattern

    def __post_init__(self):
        self.lower = np.broadcast_to(np.asarray(self.lower, float), (self.n_vars,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, float), (self.n_vars,)).copy()
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if not self.obj_scale > 0:
            raise ValueError("obj_scale must be positive")
        if self.x_scale is None:
            self.x_scale = np.ones(self.n_vars)
        self.x_scale = np.broadcast_to(np.asarray(self.x_scale, float), (self.n_vars,)).copy()

    def evaluate(self, x):
        """Values of (f, h, g) at ``x`` without derivatives."""
        return (
            float(np.asarray(self.objective(x)).ravel()[0]),
            np.atleast_1d(np.asarray(self.eq_constraints(x), float)).ravel(),
            np.atleast_1d(np.asarray(self.ineq_constraints(x), float)).ravel(),
        )

    def derivatives(self, x):
        """Values and first derivatives of (f, h, g)."""
        if self.sparse:
            if not hasattr(self, "_jacs"):
                self._jacs = [ad.CompressedJacobian(fn, x) for fn in (self.objective, self.eq_constraints, self.ineq_constraints)]
            (f, df), (h, dh), (g, dg) = (jac(x) for jac in self._jacs)
        else:
            f, df = ad.value_and_jacobian(self.objective, x)
            h, dh = ad.value_and_jacobian(self.eq_constraints, x)
            g, dg = ad.value_and_jacobian(self.ineq_constraints, x)
        return float(f[0]), df[0], h, dh, g, dg


@dataclass
class SolverOptions:
    feas_tol: float = 1e-6
    opt_tol: float = 1e-6
    max_outer: int = 50
    max_inner: int = 500
    initial_penalty: float = 10.0
    penalty_growth: float = 10.0
    max_penalty: float = 1e10
    verbose: bool = False


@dataclass
class Solution:
    x_star: np.ndarray
    objective_value: float
    status: str
    max_violation: float
    stationarity: float
    iterations: int
    wall_time: float
    eq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ineq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def max_violation(h, g) -> float:
    v = 0.0
    if h.size:
        v = max(v, float(np.max(np.abs(h))))
    if g.size:
        v = max(v, float(np.max(np.maximum(-g, 0.0))))
    return v


def kkt_residual(problem: NlpProblem, x, lam, mu) -> float:
    """Projected-gradient norm of the Lagrangian, scaled by the objective gradient.

    Multipliers follow the convention ``L = f - lam.h - mu.g`` with ``mu >= 0``.
    Measured in the variables ``x / x_scale`` with the objective divided by
    ``obj_scale``, i.e. in the units the solver works in.
    """
    D = problem.x_scale
    _, df, _, dh, _, dg = problem.derivatives(x)
    df = df * D / problem.obj_scale
    grad = df.copy()
    if lam.size:
        grad -= (dh * D).T @ lam
    if mu.size:
        grad -= (dg * D).T @ mu
    z = x / D
    proj = np.clip(z - grad, problem.lower / D, problem.upper / D) - z
    return float(np.max(np.abs(proj), initial=0.0)) / (1.0 + float(np.max(np.abs(df), initial=0.0)))


@dataclass
class _InnerResult:
    z: np.ndarray
    nit: int
    B: np.ndarray


@dataclass
class _AlParts:
    val: float
    grad: np.ndarray
    J: np.ndarray  # equality rows and active inequality rows
    df: np.ndarray
    A: np.ndarray  # all constraint rows, equalities first
    w: np.ndarray  # first-order multiplier estimates for the rows of A


def _al_parts(problem, x, lam, mu, rho) -> _AlParts:
    """AL value, gradient and the pieces of its structured Hessian model at ``x``."""
    f, df, h, dh, g, dg = problem.derivatives(x)
    s = problem.obj_scale
    val = f / s
    grad = df / s
    rows = []
    shift = np.zeros(0)
    w_h = np.zeros(0)
    if h.size:
        val += float(-lam @ h + 0.5 * rho * h @ h)
        w_h = lam - rho * h
        grad = grad - dh.T @ w_h
        rows.append(dh)
    if g.size:
        shift = np.maximum(mu - rho * g, 0.0)
        val += float((shift @ shift - mu @ mu) / (2.0 * rho))
        grad = grad - dg.T @ shift
        rows.append(dg[shift > 0])
    J = np.vstack(rows) if rows else np.zeros((0, problem.n_vars))
    n = problem.n_vars
    A = np.vstack([np.reshape(dh, (h.size, n)), np.reshape(dg, (g.size, n))])
    return _AlParts(val, grad, J, df / s, A, np.concatenate([w_h, shift]))


def _al_value(problem, x, lam, mu, rho) -> float:
    f, h, g = problem.evaluate(x)
    val = f / problem.obj_scale
    if h.size:
        val += float(-lam @ h + 0.5 * rho * h @ h)
    if g.size:
        shift = np.maximum(mu - rho * g, 0.0)
        val += float((shift @ shift - mu @ mu) / (2.0 * rho))
    return val


def _inner_solve(problem, z, lam, mu, rho, gtol, max_iter, B=None) -> _InnerResult:
    """Minimise the AL over the box by a structured quasi-Newton method.

    Works in ``z = x / x_scale``. The model Hessian is ``rho J^T J`` (the
    penalty's Gauss-Newton part, recomputed every step) plus a damped BFGS
    matrix ``B`` for the Lagrangian curvature. ``B`` does not depend on the
    penalty, so the caller passes it on between outer iterations. Bounds
    are handled by the projected-Newton active set and an Armijo search
    along the projection arc.
    """
    D = problem.x_scale
    lo, hi = problem.lower / D, problem.upper / D
    fixed = lo == hi
    n = z.size

    def parts(z):
        p = _al_parts(problem, z * D, lam, mu, rho)
        p.grad, p.J, p.df, p.A = p.grad * D, p.J * D, p.df * D, p.A * D
        return p

    cur = parts(z)
    val, grad, J = cur.val, cur.grad, cur.J
    fresh = B is None
    B = np.eye(n) * 1e-3 if fresh else B
    nit = 0
    for nit in range(1, max_iter + 1):
        pg = np.clip(z - grad, lo, hi) - z
        if np.max(np.abs(pg), initial=0.0) <= gtol:
            nit -= 1
            break
        eps = min(1e-3, float(np.max(np.abs(pg))))
        active = fixed | ((z - lo <= eps) & (grad > 0)) | ((hi - z <= eps) & (grad < 0))
        free = ~active
        d = np.zeros(n)
        # near-active variables go straight onto the bound they press against
        d[active] = np.where(grad[active] > 0, lo[active], hi[active]) - z[active]
        if free.any():
            Jf = sparse.csr_matrix(J[:, free])
            H = rho * (Jf.T @ Jf).toarray() + B[np.ix_(free, free)]
            reg = 0.0
            while True:
                try:
                    factor = cho_factor(H + reg * np.eye(H.shape[0]))
                    break
                except np.linalg.LinAlgError:
                    reg = max(1e-8, 10.0 * reg)
            d[free] = -cho_solve(factor, grad[free])
        t = 1.0
        for _ in range(40):
            z_new = np.clip(z + t * d, lo, hi)
            step = z_new - z
            dec = float(grad @ step)
            val_new = _al_value(problem, z_new * D, lam, mu, rho)
            if np.isfinite(val_new) and val_new <= val + 1e-4 * dec:
                break
            t *= 0.5
        else:
            break
        new = parts(z_new)
        # Structured secant (Dennis, Gay and Welsch): the BFGS matrix learns the
        # Lagrangian curvature, with the multiplier estimates held at the new point.
        yv = new.df - cur.df - (new.A - cur.A).T @ new.w
        if nit == 1 and fresh:
            # Shanno-Phua scaling of the initial matrix from the first step
            sy = float(step @ yv)
            if sy > 0:
                B = np.eye(n) * (float(yv @ yv) / sy)
        Bs = B @ step
        sBs = float(step @ Bs)
        if sBs > 1e-300:
            sy = float(step @ yv)
            theta = 1.0 if sy >= 0.2 * sBs else 0.8 * sBs / (sBs - sy)
            r = theta * yv + (1.0 - theta) * Bs
            B = B - np.outer(Bs, Bs) / sBs + np.outer(r, r) / float(step @ r)
        z, cur = z_new, new
        val, grad, J = cur.val, cur.grad, cur.J
        if np.max(np.abs(step)) < 1e-14:
            break
    return _InnerResult(z=z, nit=nit, B=B)


def solve(problem: NlpProblem, x0, opts: SolverOptions | None = None) -> Solution:
    """Minimise ``problem`` from ``x0`` by the augmented-Lagrangian method."""
    opts = opts or SolverOptions()
    t_start = time.perf_counter()
    lo, hi = problem.lower, problem.upper
    D = problem.x_scale
    x = np.clip(np.asarray(x0, float).ravel(), lo, hi)
    _, h, g = problem.evaluate(x)
    lam = np.zeros(h.size)
    mu = np.zeros(g.size)
    rho = opts.initial_penalty
    prev_viol = max_violation(h, g)
    status = MAX_ITER
    outer = 0
    stall = 0
    B = None
    viol = prev_viol
    stat = np.inf
    for outer in range(1, opts.max_outer + 1):
        inner_tol = max(opts.opt_tol * 0.1, min(1e-3, 10.0 ** (-outer - 1)))
        res = _inner_solve(problem, x / D, lam, mu, rho, inner_tol, opts.max_inner, B)
        B = res.B
        x = np.clip(res.z * D, lo, hi)
        _, h, g = problem.evaluate(x)
        viol = max_violation(h, g)
        # safeguarded first-order multiplier updates
        lam = np.clip(lam - rho * h, -LAMBDA_MAX, LAMBDA_MAX)
        mu = np.clip(mu - rho * g, 0.0, LAMBDA_MAX)
        stat = kkt_residual(problem, x, lam, mu)
        if opts.verbose:
            print(f"outer {outer:3d}  viol {viol:.3e}  stat {stat:.3e}  rho {rho:.1e}  inner {res.nit}")
        if viol <= opts.feas_tol and stat <= opts.opt_tol:
            status = CONVERGED
            break
        if viol > 0.25 * prev_viol and viol > opts.feas_tol:
            if rho >= opts.max_penalty:
                stall += 1
                if stall >= 3:
                    status = INFEASIBLE
                    break
            rho = min(rho * opts.penalty_growth, opts.max_penalty)
        prev_viol = min(prev_viol, viol) if viol > opts.feas_tol else viol

    f = problem.evaluate(x)[0]
    return Solution(
        x_star=x,
        objective_value=f,
        status=status,
        max_violation=viol,
        stationarity=stat,
        iterations=outer,
        wall_time=time.perf_counter() - t_start,
        eq_multipliers=lam,
        ineq_multipliers=mu,
    )
