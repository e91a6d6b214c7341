"""Tests for floatlab.floating."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from floatlab.bodies import AffineImage, Ball, Polytope, WeightFn, convex_hull, measure
from floatlab.errors import EmptyFloatingBody, RootNotBracketed
from floatlab.floating import (
    FloatingSpec,
    cap_measure,
    check_floating_limit,
    deficit_via_cone_formula,
    floating_limit_prediction,
    floating_offset,
    sandwich_offsets,
    weighted_floating_body,
)
from floatlab.numerics import alpha_n, circle_directions

DISK_CAP_HALF = math.pi / 3 - math.sqrt(3) / 4


def unit_square():
    return Polytope([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])


def ellipse(a=2.0, b=1.0):
    return AffineImage(Ball(2), np.diag([a, b]), kind="ellipse")


def disk_cap(t):
    return math.acos(t) - t * math.sqrt(1 - t * t)


# --- caps and offsets --------------------------------------------------------------

def test_cap_measure_examples():
    one = WeightFn.one()
    assert cap_measure(unit_square(), one, [1.0, 0.0], 0.25) == pytest.approx(0.25, rel=1e-12)
    assert cap_measure(Ball(2), one, [1.0, 0.0], 0.5) == pytest.approx(DISK_CAP_HALF, rel=1e-9)
    assert cap_measure(Ball(2), WeightFn.const(2.0), [0.0, 1.0], 0.5) == pytest.approx(2 * DISK_CAP_HALF, rel=1e-9)


def test_cap_measure_vanishes_at_support_value():
    assert cap_measure(ellipse(), WeightFn.bump(), [1.0, 0.0], 2.0) == 0.0


def test_cap_measure_of_ball_in_space():
    # spherical cap of height 1 - t: pi (1-t)^2 (2+t) / 3
    t = 0.3
    expected = math.pi * (1 - t) ** 2 * (2 + t) / 3
    assert cap_measure(Ball(3), WeightFn.one(), [0.0, 0.0, 1.0], t) == pytest.approx(expected, rel=1e-9)


def test_floating_offset_examples():
    one = WeightFn.one()
    assert floating_offset(Ball(2), one, math.pi / 2, [0.6, 0.8]) == pytest.approx(0.0, abs=1e-10)
    assert floating_offset(Ball(2), one, DISK_CAP_HALF, [1.0, 0.0]) == pytest.approx(0.5, abs=1e-10)
    assert floating_offset(unit_square(), one, 0.25, [1.0, 0.0]) == pytest.approx(0.25, abs=1e-10)


def test_floating_offset_rejects_large_delta():
    with pytest.raises(RootNotBracketed):
        floating_offset(Ball(2), WeightFn.one(), 4.0, [1.0, 0.0])
    with pytest.raises(ValueError):
        floating_offset(Ball(2), WeightFn.one(), 0.0, [1.0, 0.0])


def test_floating_offset_inverts_cap_measure():
    body = ellipse()
    phi = WeightFn.bump()
    for v in circle_directions(7, offset=0.1):
        for delta in (1e-4, 1e-2, 0.3):
            t = floating_offset(body, phi, delta, v)
            assert cap_measure(body, phi, v, t) == pytest.approx(delta, abs=1e-9)


def test_offsets_are_monotone_and_below_support():
    body = ellipse()
    phi = WeightFn.bump()
    for v in circle_directions(9, offset=0.2):
        t_small = floating_offset(body, phi, 1e-4, v)
        t_large = floating_offset(body, phi, 1e-2, v)
        assert t_large <= t_small <= float(body.support(v))


def test_sandwich_between_unweighted_floating_bodies():
    body = Ball(2)
    phi = WeightFn(lambda x: 2 + x[..., 0], name="2+x0")
    for v in circle_directions(8, offset=0.3):
        lower, t, upper = sandwich_offsets(body, phi, 1e-3, v)
        assert lower <= t <= upper


# --- floating bodies -------------------------------------------------------------------

def test_disk_floating_body_matches_cap_root():
    delta = 1e-3
    t_exact = brentq(lambda t: disk_cap(t) - delta, 0.0, 1.0, xtol=1e-15)
    res = weighted_floating_body(
        FloatingSpec(Ball(2), WeightFn.one(), WeightFn.one(), delta, directions=circle_directions(64)))
    assert np.allclose(res.offsets, t_exact, atol=1e-9)
    assert res.directions_used == 64
    # a regular 64-gon circumscribed about the circle of radius t
    expected = math.pi - 64 * t_exact ** 2 * math.tan(math.pi / 64)
    assert res.deficit_cone == pytest.approx(expected, rel=1e-8)
    assert res.deficit_direct == pytest.approx(expected, rel=1e-8)


def test_floating_body_of_symmetric_body_is_symmetric():
    dirs = circle_directions(24, offset=0.05)
    res = weighted_floating_body(FloatingSpec(ellipse(), WeightFn.one(), WeightFn.one(), 1e-2, directions=dirs))
    verts = res.inner.vertices
    for p in verts:
        assert np.min(np.linalg.norm(verts + p, axis=1)) < 1e-8
    for v, t in zip(res.directions, res.offsets):
        assert t <= float(ellipse().support(v))


def test_odd_initial_grid_is_made_symmetric():
    spec = FloatingSpec(ellipse(), WeightFn.one(), WeightFn.one(), 1e-2, initial_directions=33, max_directions=40)
    res = weighted_floating_body(spec)
    assert res.directions_used == 34
    for u in res.directions:
        assert np.min(np.linalg.norm(res.directions + u, axis=1)) < 1e-12
    verts = res.inner.vertices
    for p in verts:
        assert np.min(np.linalg.norm(verts + p, axis=1)) < 1e-8


def test_square_floating_body_deficit():
    delta = 1e-3
    res = weighted_floating_body(FloatingSpec(unit_square(), WeightFn.one(), WeightFn.one(), delta,
                                              max_directions=2048))
    # hyperbolic corner arcs x*y = delta/2 meeting at the edge midpoints
    expected = 2 * delta * (1 + math.log(1 / (2 * delta)))
    assert res.deficit == pytest.approx(expected, rel=0.02)
    assert res.deficit_direct == pytest.approx(res.deficit_cone, rel=1e-6)


def test_large_delta_empties_the_floating_body():
    spec = FloatingSpec(Ball(2), WeightFn.one(), WeightFn.one(), 1.6, directions=circle_directions(16))
    with pytest.raises(EmptyFloatingBody):
        weighted_floating_body(spec)
    with pytest.raises(RootNotBracketed):
        weighted_floating_body(FloatingSpec(Ball(2), WeightFn.one(), WeightFn.one(), 3.5))


# --- cone formula ----------------------------------------------------------------------------

def test_cone_formula_annulus():
    value, _ = deficit_via_cone_formula(Ball(2), WeightFn.one(), Ball(2, 0.5))
    assert value == pytest.approx(math.pi * 0.75, rel=1e-12)


def test_cone_formula_with_radial_weight():
    r = 0.5
    value, _ = deficit_via_cone_formula(Ball(2), WeightFn.bump(), Ball(2, r))
    expected = 2 * math.pi * (1 / math.sqrt(1 + r * r) - 1 / math.sqrt(2))
    assert value == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_cone_formula_agrees_with_measure_difference(seed):
    rng = np.random.default_rng(seed)
    angle = rng.uniform(0, math.pi)
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    body = AffineImage(Ball(2), rot @ np.diag([2.0, 1.0]))
    radius = 0.8 * np.sqrt(rng.uniform(size=12))
    theta = rng.uniform(0, 2 * math.pi, size=12)
    inner = convex_hull(np.column_stack([radius * np.cos(theta), radius * np.sin(theta)]))
    psi = WeightFn.bump()
    value, _ = deficit_via_cone_formula(body, psi, inner)
    direct = measure(body, psi).value - measure(inner, psi).value
    assert value == pytest.approx(direct, rel=1e-6)


# --- limit theorem -----------------------------------------------------------------------------

def test_predicted_limits():
    one = WeightFn.one()
    assert alpha_n(2) == pytest.approx(0.655185, abs=1e-6)
    assert floating_limit_prediction(Ball(2), one, one) == pytest.approx(4.11688, abs=1e-5)
    assert floating_limit_prediction(ellipse(), one, one) == pytest.approx(
        alpha_n(2) * 2 * math.pi * 2 ** (1 / 3), rel=1e-8)
    assert floating_limit_prediction(unit_square(), one, one) == pytest.approx(0.0, abs=1e-12)


def test_constant_weight_rescales_limit():
    c = 2.0
    one = WeightFn.one()
    weighted = floating_limit_prediction(Ball(2), WeightFn.const(c), one)
    assert weighted == pytest.approx(c ** (-2 / 3) * floating_limit_prediction(Ball(2), one, one), rel=1e-10)
    # K^c_delta = K^1_{delta/c}
    v = np.array([1.0, 0.0])
    assert floating_offset(Ball(2), WeightFn.const(c), 1e-3, v) == pytest.approx(
        floating_offset(Ball(2), one, 1e-3 / c, v), abs=1e-10)


@pytest.mark.slow
def test_disk_floating_limit():
    one = WeightFn.one()
    report = check_floating_limit(Ball(2), one, one, [1e-3, 1e-4, 1e-5, 1e-6])
    assert report.predicted == pytest.approx(alpha_n(2) * 2 * math.pi)
    assert report.limit == pytest.approx(report.predicted, rel=0.01)
    assert [row.param for row in report.rows] == [1e-6, 1e-5, 1e-4, 1e-3]
    assert all(row.extra["directions_used"] >= 32 for row in report.rows)


@pytest.mark.slow
def test_weighted_disk_floating_limit():
    phi = WeightFn.bump()
    one = WeightFn.one()
    report = check_floating_limit(Ball(2), phi, one, [1e-3, 1e-4, 1e-5, 1e-6])
    # kappa = 1 and phi = 2^{-3/2} on the unit circle
    assert report.predicted == pytest.approx(alpha_n(2) * 2 * math.pi * 2, rel=1e-8)
    assert report.limit == pytest.approx(report.predicted, rel=0.02)
