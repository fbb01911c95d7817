"""Forward-mode automatic differentiation with array-valued dual numbers.

A :class:`Dual` carries a value array ``val`` of any shape together with its
Jacobian ``jac`` of shape ``val.shape + (n,)`` with respect to ``n`` seed
variables. Seeding all variables at once gives the full Jacobian of a
vector function in a single forward pass.

Domain code is written against the helpers in this module (``sqrt``,
``exp``, ``concatenate``...) which accept plain floats/arrays as well as
duals, so one code path serves evaluation and differentiation.
"""

from __future__ import annotations

import numpy as np


class NonFiniteError(FloatingPointError):
    """Raised when a dual computation produces a non-finite value."""


class Dual:
    """Array of dual numbers: value plus Jacobian w.r.t. the seed vector."""

    __slots__ = ("val", "jac")
    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, val, jac):
        self.val = np.asarray(val, dtype=float)
        self.jac = np.asarray(jac, dtype=float)

    @classmethod
    def seed(cls, x, directions=None) -> "Dual":
        """Independent variables; ``directions`` (n, p) defaults to the identity."""
        x = np.asarray(x, dtype=float).ravel()
        jac = np.eye(x.size) if directions is None else np.asarray(directions, float)
        return cls(x.copy(), jac)

    @property
    def shape(self):
        return self.val.shape

    @property
    def nvars(self) -> int:
        return self.jac.shape[-1]

    def __len__(self):
        return len(self.val)

    def __repr__(self):
        return f"Dual(val={self.val!r}, nvars={self.nvars})"

    def __getitem__(self, idx):
        return Dual(self.val[idx], self.jac[idx])

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        val = self.val.reshape(shape)
        return Dual(val, self.jac.reshape(val.shape + (self.nvars,)))

    def sum(self, axis=None):
        if axis is None:
            axes = tuple(range(self.val.ndim))
        else:
            axes = (axis,) if np.isscalar(axis) else tuple(axis)
            axes = tuple(a % self.val.ndim for a in axes)
        return Dual(self.val.sum(axis=axes), self.jac.sum(axis=axes))

    # arithmetic -----------------------------------------------------------

    def __neg__(self):
        return Dual(-self.val, -self.jac)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, _bjac(self, other.val) + _bjac(other, self.val))
        other = np.asarray(other, dtype=float)
        return Dual(self.val + other, _bjac(self, other))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.val * other.val,
                self.jac * other.val[..., None] + other.jac * self.val[..., None],
            )
        other = np.asarray(other, dtype=float)
        return Dual(self.val * other, self.jac * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * other.reciprocal()
        other = np.asarray(other, dtype=float)
        return Dual(self.val / other, self.jac / other[..., None])

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self):
        inv = 1.0 / self.val
        return Dual(inv, -self.jac * (inv * inv)[..., None])

    def __pow__(self, p):
        if isinstance(p, Dual):
            return exp(p * log(self))
        p = float(p)
        if p == 2.0:
            return self * self
        return Dual(self.val**p, self.jac * (p * self.val ** (p - 1.0))[..., None])

    # comparisons act on values only (used for branch selection)
    def __lt__(self, other):
        return self.val < value(other)

    def __le__(self, other):
        return self.val <= value(other)

    def __gt__(self, other):
        return self.val > value(other)

    def __ge__(self, other):
        return self.val >= value(other)

    def __float__(self):
        return float(self.val)


def _bjac(d: Dual, other_val) -> np.ndarray:
    """Jacobian of ``d`` broadcast to the shape of ``d.val + other_val``."""
    shape = np.broadcast_shapes(d.val.shape, np.shape(other_val))
    if shape == d.val.shape:
        return d.jac
    return np.broadcast_to(d.jac, shape + (d.nvars,))


def value(x):
    """Strip derivative information."""
    return x.val if isinstance(x, Dual) else np.asarray(x, dtype=float)


def is_dual(x) -> bool:
    return isinstance(x, Dual)


def _unary(x, f, df):
    if isinstance(x, Dual):
        v = f(x.val)
        return Dual(v, x.jac * df(x.val, v)[..., None])
    return f(np.asarray(x, dtype=float))


def sqrt(x):
    return _unary(x, np.sqrt, lambda a, v: 0.5 / v)


def exp(x):
    return _unary(x, np.exp, lambda a, v: v)


def log(x):
    return _unary(x, np.log, lambda a, v: 1.0 / a)


def sin(x):
    return _unary(x, np.sin, lambda a, v: np.cos(a))


def cos(x):
    return _unary(x, np.cos, lambda a, v: -np.sin(a))


def square(x):
    return x * x


def smooth_min(a, b, eps: float = 1e-6):
    """Differentiable min: ``(a + b - sqrt((a - b)^2 + eps^2)) / 2``."""
    d = a - b
    return 0.5 * (a + b - sqrt(d * d + eps * eps))


def asdual(x, nvars: int) -> Dual:
    if isinstance(x, Dual):
        return x
    x = np.asarray(x, dtype=float)
    return Dual(x, np.zeros(x.shape + (nvars,)))


def concatenate(parts, axis: int = 0):
    """Concatenate a mix of duals and plain arrays."""
    parts = list(parts)
    duals = [p for p in parts if isinstance(p, Dual)]
    if not duals:
        return np.concatenate([np.asarray(p, dtype=float) for p in parts], axis=axis)
    n = duals[0].nvars
    parts = [asdual(p, n) for p in parts]
    axis = axis % parts[0].val.ndim
    return Dual(
        np.concatenate([p.val for p in parts], axis=axis),
        np.concatenate([p.jac for p in parts], axis=axis),
    )


def stack(parts, axis: int = 0):
    parts = list(parts)
    duals = [p for p in parts if isinstance(p, Dual)]
    if not duals:
        return np.stack([np.asarray(p, dtype=float) for p in parts], axis=axis)
    n = duals[0].nvars
    parts = [asdual(p, n) for p in parts]
    axis = axis % (parts[0].val.ndim + 1)
    return Dual(
        np.stack([p.val for p in parts], axis=axis),
        np.stack([p.jac for p in parts], axis=axis),
    )


def dot_last(a, b):
    """Inner product over the last axis (``sum(a * b, -1)``)."""
    prod = a * b
    if isinstance(prod, Dual):
        return prod.sum(axis=-1)
    return np.sum(prod, axis=-1)


def check_finite(x) -> None:
    if isinstance(x, Dual):
        ok = np.all(np.isfinite(x.val)) and np.all(np.isfinite(x.jac))
    else:
        ok = np.all(np.isfinite(x))
    if not ok:
        raise NonFiniteError("non-finite value encountered during differentiation")


def gradient(fn, x) -> np.ndarray:
    """Exact gradient of a scalar function by forward-mode propagation."""
    out = fn(Dual.seed(x))
    if not isinstance(out, Dual):
        return np.zeros(np.size(x))
    check_finite(out)
    return out.jac.reshape(-1, out.nvars)[0].copy() if out.val.size == 1 else out.jac.copy()


def jacobian(fn, x) -> np.ndarray:
    """Jacobian ``(m, n)`` of a vector function."""
    x = np.asarray(x, dtype=float).ravel()
    out = fn(Dual.seed(x))
    if not isinstance(out, Dual):
        return np.zeros((np.size(out), x.size))
    check_finite(out)
    return out.jac.reshape(-1, x.size)


def value_and_jacobian(fn, x, directions=None):
    """Value and Jacobian of ``fn`` at ``x``; with ``directions`` the product ``J @ directions``."""
    x = np.asarray(x, dtype=float).ravel()
    out = fn(Dual.seed(x, directions))
    p = x.size if directions is None else np.shape(directions)[1]
    if not isinstance(out, Dual):
        out = asdual(out, p)
    check_finite(out)
    return out.val.ravel(), out.jac.reshape(-1, p)


def sparsity_pattern(fn, x, trials: int = 3, seed: int = 0) -> np.ndarray:
    """Structural nonzeros of the Jacobian, from dense evaluations at random points near ``x``."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float).ravel()
    scale = 1.0 + np.abs(x)
    pat = None
    for _ in range(trials):
        xr = x + 0.1 * scale * rng.standard_normal(x.size)
        _, J = value_and_jacobian(fn, xr)
        nz = J != 0
        pat = nz if pat is None else pat | nz
    return pat


def color_columns(pattern) -> np.ndarray:
    """Greedy grouping of columns that share no nonzero row."""
    pattern = np.asarray(pattern, bool)
    m, n = pattern.shape
    colors = np.full(n, -1)
    used = []  # rows touched by each color
    order = np.argsort(-pattern.sum(axis=0), kind="stable")
    for j in order:
        col = pattern[:, j]
        for c, rows in enumerate(used):
            if not np.any(rows & col):
                colors[j] = c
                rows |= col
                break
        else:
            colors[j] = len(used)
            used.append(col.copy())
    return colors


class CompressedJacobian:
    """Jacobian evaluation with one seed direction per column color.

    The pattern is detected once, numerically; each later call costs a
    forward pass with ``n_colors`` directions instead of ``n``.
    """

    def __init__(self, fn, x, trials: int = 3):
        self.fn = fn
        self.pattern = sparsity_pattern(fn, x, trials)
        self.colors = color_columns(self.pattern)
        n = self.pattern.shape[1]
        self.n_colors = int(self.colors.max()) + 1 if n else 0
        self.directions = np.zeros((n, self.n_colors))
        self.directions[np.arange(n), self.colors] = 1.0
        self.rows, self.cols = np.nonzero(self.pattern)

    def __call__(self, x):
        m, n = self.pattern.shape
        if self.n_colors == 0 or m == 0:
            return value_and_jacobian(self.fn, x)
        val, JS = value_and_jacobian(self.fn, x, self.directions)
        J = np.zeros((val.size, n))
        J[self.rows, self.cols] = JS[self.rows, self.colors[self.cols]]
        return val, J
