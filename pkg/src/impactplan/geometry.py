"""Closed cubic-spline cross-sections with signed distance queries."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .nlp import ad

N_DENSE = 256
NEWTON_ITERS = 20
_LAST_QUERY = threading.local()


class GeometryError(ValueError):
    pass


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def _self_intersects(poly: np.ndarray) -> bool:
    n = len(poly)
    segs = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    lo = np.minimum(poly, np.roll(poly, -1, axis=0))
    hi = np.maximum(poly, np.roll(poly, -1, axis=0))
    for i in range(n):
        # bounding-box prefilter, skip adjacent segments
        cand = np.nonzero(
            np.all(lo[i + 2 :] <= hi[i], axis=1) & np.all(hi[i + 2 :] >= lo[i], axis=1)
        )[0] + i + 2
        for j in cand:
            if i == 0 and j == n - 1:
                continue
            if _segments_intersect(*segs[i], *segs[j]):
                return True
    return False


@dataclass(frozen=True, eq=False)
class SurfaceSpline:
    """Periodic C2 cubic through ``control_points`` (chord-length parameter).

    The parameter runs over ``[0, period)``; ``samples`` holds a dense polygon
    used for the inside test and to seed closest-point refinement.
    """

    control_points: np.ndarray
    spline: CubicSpline = field(repr=False)
    period: float
    samples: np.ndarray = field(repr=False)
    sample_params: np.ndarray = field(repr=False)
    orientation: float = 1.0

    def __call__(self, u, nu: int = 0) -> np.ndarray:
        return self.spline(np.mod(u, self.period), nu)

    def eval3(self, u):
        """Position, first and second derivative in one pass over the pieces."""
        u = np.mod(u, self.period)
        bp = self.spline.x
        c = self.spline.c  # (4, pieces, 2), highest power first
        k = np.clip(np.searchsorted(bp, u, side="right") - 1, 0, len(bp) - 2)
        t = (u - bp[k])[..., None]
        c3, c2, c1, c0 = c[0, k], c[1, k], c[2, k], c[3, k]
        p = ((c3 * t + c2) * t + c1) * t + c0
        d1 = (3.0 * c3 * t + 2.0 * c2) * t + c1
        d2 = 6.0 * c3 * t + 2.0 * c2
        return p, d1, d2

    def arc_length(self, n: int = 4096) -> float:
        u = np.linspace(0.0, self.period, n + 1)
        return float(np.sum(np.linalg.norm(np.diff(self(u), axis=0), axis=1)))

    def contains(self, p) -> np.ndarray:
        """Winding-number inside test against the dense polygon."""
        p = np.atleast_2d(np.asarray(p, float))
        poly = self.samples
        nxt = np.roll(poly, -1, axis=0)
        x, y = p[:, 0:1], p[:, 1:2]
        up = (poly[:, 1] <= y) & (nxt[:, 1] > y)
        down = (poly[:, 1] > y) & (nxt[:, 1] <= y)
        cross = (nxt[:, 0] - poly[:, 0]) * (y - poly[:, 1]) - (x - poly[:, 0]) * (nxt[:, 1] - poly[:, 1])
        winding = np.sum(up & (cross > 0), axis=1) - np.sum(down & (cross < 0), axis=1)
        return winding != 0


def spline_from_points(points, n_dense: int = N_DENSE) -> SurfaceSpline:
    """Build a closed periodic cubic spline through ``points`` in order."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError("points must be an (n, 2) array")
    if len(pts) < 4:
        raise GeometryError("too few points: a closed spline needs at least 4")
    seg = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1)
    diff = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    np.fill_diagonal(diff, np.inf)
    if np.min(diff) <= 1e-9:
        raise GeometryError("duplicate points")
    knots = np.concatenate([[0.0], np.cumsum(seg)])
    closed = np.vstack([pts, pts[:1]])
    spline = CubicSpline(knots, closed, bc_type="periodic")
    period = float(knots[-1])
    params = np.linspace(0.0, period, n_dense, endpoint=False)
    samples = spline(params)
    if _self_intersects(samples):
        raise GeometryError("self-intersection detected")
    area2 = np.sum(samples[:, 0] * np.roll(samples[:, 1], -1) - np.roll(samples[:, 0], -1) * samples[:, 1])
    return SurfaceSpline(
        control_points=pts,
        spline=spline,
        period=period,
        samples=samples,
        sample_params=params,
        orientation=float(np.sign(area2)),
    )


def _refine(surface: SurfaceSpline, P: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Newton on d/du |s(u) - p|^2 / 2 for many (point, seed) pairs at once.

    ``P`` and ``u`` have matching leading shape; each iterate stays inside
    its seed's bracket of one sample spacing.
    """
    h = surface.period / len(surface.sample_params)
    lo, hi = u - h, u + h
    live = np.ones(u.shape, bool)
    for _ in range(NEWTON_ITERS):
        q, d1, d2 = surface.eval3(u)
        r = q - P
        g = np.sum(r * d1, axis=-1)
        H = np.sum(d1 * d1, axis=-1) + np.sum(r * d2, axis=-1)
        live &= H > 0
        step = np.where(live, g / np.where(H > 0, H, 1.0), 0.0)
        u_new = np.clip(u - step, lo, hi)
        live &= np.abs(u_new - u) >= 1e-13 * max(1.0, surface.period)
        u = u_new
        if not live.any():
            break
    return u


def closest_points(surface: SurfaceSpline, P, tie_tol: float = 1e-6):
    """Batch version of :func:`closest_point` for an ``(m, 2)`` array."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    dist = np.sqrt(np.sum((surface.samples[None] - P[:, None]) ** 2, axis=-1))
    best3 = np.argpartition(dist, 3, axis=1)[:, :3]
    # first sample (lowest parameter) within tie_tol of the nearest one
    near = np.argmax(dist <= dist.min(axis=1, keepdims=True) + tie_tol, axis=1)
    seeds = np.column_stack([best3, near])
    u0 = surface.sample_params[seeds]
    d0 = np.take_along_axis(dist, seeds, axis=1)
    u = _refine(surface, np.repeat(P[:, None], seeds.shape[1], axis=1), u0)
    du = np.linalg.norm(surface(u) - P[:, None], axis=-1)
    worse = du > d0
    u = np.mod(np.where(worse, u0, u), surface.period)
    du = np.where(worse, d0, du)
    best = du.min(axis=1, keepdims=True)
    u_best = np.where(du <= best + tie_tol, u, np.inf).min(axis=1)
    return surface(u_best), u_best


def closest_point(surface: SurfaceSpline, p, tie_tol: float = 1e-6):
    """Closest curve point to ``p`` and its parameter in ``[0, period)``.

    Seeds from the three best dense samples. Candidates whose distance is
    within ``tie_tol`` of the best are ties, resolved by lowest parameter.
    """
    q, u = closest_points(surface, np.asarray(p, float)[None], tie_tol)
    return q[0], float(u[0])


def signed_distance(surface: SurfaceSpline, p) -> float:
    """Distance to the curve, negative inside."""
    p = np.asarray(p, dtype=float)
    q, _ = closest_point(surface, p)
    d = float(np.linalg.norm(p - q))
    return -d if surface.contains(p)[0] else d


def signed_distance_ad(surface: SurfaceSpline, p):
    """Signed distance for an ``(m, 2)`` batch that may carry dual numbers.

    The closest parameter is found on plain values and then held fixed; at
    the true minimiser the distance is stationary in the parameter, so the
    first derivative with respect to ``p`` is exact.
    """
    pv = ad.value(p)
    pv = np.atleast_2d(pv)
    key = (pv.shape, pv.tobytes())
    last = getattr(_LAST_QUERY, "entry", None)
    if last is not None and last[0] is surface and last[1] == key:
        sign, q = last[2], last[3]
    else:
        sign = np.where(surface.contains(pv), -1.0, 1.0)
        q, _ = closest_points(surface, pv)
        # a line search evaluates a point and then differentiates at it
        _LAST_QUERY.entry = (surface, key, sign, q)
    r = p - q
    return sign * ad.sqrt(ad.dot_last(r, r))


def circle_points(n: int, radius: float = 1.0, center=(0.0, 0.0)) -> np.ndarray:
    th = 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)])


def box_points(half_width: float, half_height: float | None = None) -> np.ndarray:
    """Corners and edge midpoints of an axis-aligned box, counter-clockwise from +x."""
    a = half_width
    b = a if half_height is None else half_height
    return np.array([[a, 0], [a, b], [0, b], [-a, b], [-a, 0], [-a, -b], [0, -b], [a, -b]], float)
