import numpy as np
import pytest

from impactplan.geometry import (
    GeometryError,
    box_points,
    circle_points,
    closest_point,
    signed_distance,
    signed_distance_ad,
    spline_from_points,
)
from impactplan.nlp import ad


@pytest.fixture(scope="module")
def circle():
    return spline_from_points(circle_points(8))


def brute_distance(surface, p, n=200001):
    u = np.linspace(0, surface.period, n)
    return np.min(np.linalg.norm(surface(u) - p, axis=1))


def test_interpolates_control_points(circle):
    pts = circle_points(8)
    knots = circle.spline.x[:-1]
    assert np.allclose(circle(knots), pts, atol=1e-9)
    sq = spline_from_points(box_points(0.2, 0.2)[1::2])
    assert np.allclose(sq(sq.spline.x[:-1]), box_points(0.2)[1::2], atol=1e-9)


def test_periodic_seam(circle):
    for d in range(3):
        assert np.allclose(circle(0.0, d), circle.spline(circle.period, d), atol=1e-9)


def test_construction_errors():
    with pytest.raises(GeometryError, match="too few points"):
        spline_from_points(circle_points(3))
    pts = circle_points(6)
    pts[2] = pts[1]
    with pytest.raises(GeometryError):
        spline_from_points(pts)
    bowtie = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], float)
    with pytest.raises(GeometryError):
        spline_from_points(bowtie)


def test_signed_distance_examples(circle):
    assert signed_distance(circle, [0, 0]) == pytest.approx(-brute_distance(circle, np.zeros(2)), abs=1e-6)
    assert signed_distance(circle, [0, 0]) == pytest.approx(-1.0, abs=1e-2)
    assert signed_distance(circle, [3, 0]) == pytest.approx(brute_distance(circle, np.array([3.0, 0])), abs=1e-6)
    assert signed_distance(circle, [3, 0]) == pytest.approx(2.0, abs=1e-9)
    on = circle(0.37)
    assert signed_distance(circle, on) == pytest.approx(0.0, abs=1e-6)


def test_closest_point_examples(circle):
    q, _ = closest_point(circle, [2, 0])
    assert np.allclose(q, [1, 0], atol=1e-9)
    p = circle(1.1)
    q, _ = closest_point(circle, p)
    assert np.allclose(q, p, atol=1e-6)
    # the centroid is equidistant from the whole curve: lowest parameter wins
    _, u = closest_point(circle, [0, 0], tie_tol=0.1)
    assert u == pytest.approx(0.0, abs=1e-6)


def test_random_queries_against_oracles(rng):
    surface = spline_from_points(box_points(0.2, 0.1))
    u = np.linspace(0, surface.period, 200001)
    dense = surface(u)
    for p in rng.uniform(-0.4, 0.4, size=(100, 2)):
        d = signed_distance(surface, p)
        brute = np.min(np.linalg.norm(dense - p, axis=1))
        assert abs(abs(d) - brute) <= 1e-6
        assert (d < 0) == surface.contains(p)[0]
        q, _ = closest_point(surface, p)
        assert abs(signed_distance(surface, q)) <= 1e-6
        samples = np.min(np.linalg.norm(surface.samples - p, axis=1))
        assert np.linalg.norm(q - p) <= samples + 1e-9


def test_distance_gradient(circle):
    p = np.array([[1.7, 0.4]])
    g = ad.jacobian(lambda x: signed_distance_ad(circle, x.reshape(1, 2))[0:1], p.ravel())
    h = 1e-6
    fd = [(signed_distance(circle, p[0] + h * e) - signed_distance(circle, p[0] - h * e)) / (2 * h) for e in np.eye(2)]
    assert np.allclose(g[0], fd, atol=1e-6)
