"""Tests for floatlab.spaces."""

import math

import numpy as np
import pytest
from scipy.optimize import nnls

from floatlab.bodies import AffineImage, Ball, Polytope, affine_surface_area, convex_hull
from floatlab.errors import ImproperBody, OutOfChart
from floatlab.numerics import alpha_n
from floatlab.spaces import (
    GeometryChart,
    ModelBody,
    ambient_volume_mc,
    euclidean_polar,
    gnomonic,
    inverse_gnomonic,
    model_curvature_transfer,
    model_floating_area,
    model_floating_body_limit,
    model_measure,
    model_random_limit,
    parse_model_body,
    polar_model_body,
    spherical_mean_width,
    spherical_perimeter,
    spherical_polar_cap,
    spherical_polygon_area,
    transfer_factor,
)
from floatlab.stochastic import rng_stream

SPHERE = GeometryChart.spherical()
HYPERBOLIC = GeometryChart.hyperbolic()


def cap_floating_area(rho):
    return 2 * math.pi * math.sin(rho) / math.tan(rho) ** (1 / 3)


def hdisk_floating_area(r):
    return 2 * math.pi * math.sinh(r) * (1 / math.tanh(r)) ** (1 / 3)


# --- charts ---------------------------------------------------------------------------

def test_chart_densities():
    x = np.array([0.3, 0.4])
    assert float(SPHERE.density()(x)) == pytest.approx(1.25 ** -1.5)
    assert float(HYPERBOLIC.density()(x)) == pytest.approx(0.75 ** -1.5)
    assert float(GeometryChart.spherical(3).density()(np.array([0.0, 0.0, 1.0]))) == pytest.approx(0.25)


def test_unknown_geometry_is_rejected():
    with pytest.raises(ValueError):
        GeometryChart("elliptic")


@pytest.mark.parametrize("chart", [SPHERE, HYPERBOLIC])
def test_gnomonic_round_trip(chart):
    rng = rng_stream(0, 0, "chart")
    xbar = rng.uniform(-0.6, 0.6, size=(50, 2))
    x = inverse_gnomonic(chart, xbar)
    assert np.allclose(gnomonic(chart, x), xbar, atol=1e-14)
    if chart.kind == "spherical":
        assert np.allclose(np.sum(x * x, axis=1), 1.0)
    assert np.all(x[:, -1] > 0)


def test_hyperbolic_chart_radius_is_tanh_of_distance():
    r = 0.8
    x = np.array([math.sinh(r), 0.0, math.cosh(r)])
    assert np.allclose(gnomonic(HYPERBOLIC, x), [math.tanh(r), 0.0])
    assert float(HYPERBOLIC.distance(x, np.array([0.0, 0.0, 1.0]))) == pytest.approx(r)
    assert ModelBody.hdisk(r).body.radius == pytest.approx(math.tanh(r))


def test_spherical_distance_from_the_pole():
    rho = 0.7
    x = np.array([math.sin(rho), 0.0, math.cos(rho)])
    assert float(SPHERE.distance(x, np.array([0.0, 0.0, 1.0]))) == pytest.approx(rho)


def test_gnomonic_rejects_points_outside_the_chart():
    with pytest.raises(OutOfChart):
        gnomonic(SPHERE, np.array([0.0, 0.6, -0.8]))
    with pytest.raises(OutOfChart):
        gnomonic(SPHERE, np.array([0.0, 0.0, 2.0]))
    with pytest.raises(OutOfChart):
        inverse_gnomonic(HYPERBOLIC, np.array([1.0, 0.0]))


def test_chart_hull_is_the_model_hull():
    # model points of the chart hull are positive combinations of its vertices
    rng = rng_stream(1, 0, "chart")
    xbar = rng.uniform(-1.0, 1.0, size=(40, 2))
    hull = convex_hull(xbar, 2)
    for chart in (SPHERE, HYPERBOLIC):
        scale = 0.9 if chart.kind == "hyperbolic" else 1.0
        points = inverse_gnomonic(chart, scale * xbar / np.sqrt(2))
        corners = inverse_gnomonic(chart, scale * hull.vertices / np.sqrt(2))
        for p in points:
            _, residual = nnls(corners.T, p)
            assert residual < 1e-10


# --- model bodies ---------------------------------------------------------------------

def test_model_body_margins():
    assert model_measure(ModelBody.cap(1.4)).value < 2 * math.pi
    with pytest.raises(ImproperBody):
        ModelBody.cap(1.56)
    with pytest.raises(ImproperBody):
        ModelBody.cap(2.0)
    with pytest.raises(OutOfChart):
        ModelBody(HYPERBOLIC, Ball(2, 0.995))


def test_parse_model_body():
    cap = parse_model_body("cap rho=0.8", "spherical")
    assert cap.body.radius == pytest.approx(math.tan(0.8))
    ellipse = parse_model_body("ellipse a=0.5 b=0.3", "hyperbolic")
    assert ellipse.chart.kind == "hyperbolic"
    with pytest.raises(ValueError):
        parse_model_body("cap rho=0.8", "hyperbolic")
    with pytest.raises(ValueError):
        parse_model_body("hdisk r=0.5", "spherical")


@pytest.mark.parametrize("rho", [0.3, 0.8, 1.2])
def test_cap_area(rho):
    assert model_measure(ModelBody.cap(rho)).value == pytest.approx(2 * math.pi * (1 - math.cos(rho)), rel=1e-7)


@pytest.mark.parametrize("r", [0.3, 0.8, 2.0])
def test_hyperbolic_disk_area(r):
    assert model_measure(ModelBody.hdisk(r)).value == pytest.approx(2 * math.pi * (math.cosh(r) - 1), rel=1e-7)


@pytest.mark.parametrize("region", [Ball(2, 0.5), AffineImage(Ball(2), np.diag([0.6, 0.3])),
                                    Polytope([[-0.4, -0.2], [0.5, -0.3], [0.1, 0.6]])])
@pytest.mark.parametrize("chart", [SPHERE, HYPERBOLIC])
def test_chart_measure_matches_model_sampling(chart, region):
    estimate, stderr = ambient_volume_mc(chart, region, 200_000, rng_stream(3, 0, f"mc-{chart.kind}"))
    exact = model_measure(ModelBody(chart, region)).value
    assert abs(estimate - exact) <= 4.5 * stderr


# --- curvature ------------------------------------------------------------------------

def test_transfer_factor_is_one_at_the_origin():
    normals = np.array([[1.0, 0.0], [0.6, 0.8]])
    assert np.allclose(transfer_factor(SPHERE, np.zeros((2, 2)), normals), 1.0)
    assert np.allclose(transfer_factor(HYPERBOLIC, np.zeros((2, 2)), normals), 1.0)


def test_transfer_factor_flips_with_the_sign():
    x, n = np.array([0.3, 0.1]), np.array([0.8, 0.6])
    q, xn = float(x @ x), float(x @ n)
    assert float(transfer_factor(SPHERE, x, n)) == pytest.approx(((1 + q) / (1 + xn * xn)) ** 1.5)
    assert float(transfer_factor(HYPERBOLIC, x, n)) == pytest.approx(((1 - q) / (1 - xn * xn)) ** 1.5)


def test_geodesic_circle_curvatures():
    s = np.linspace(0.0, 2 * math.pi, 7)
    assert np.allclose(model_curvature_transfer(ModelBody.cap(0.8), s), 1 / math.tan(0.8))
    assert np.allclose(model_curvature_transfer(ModelBody.hdisk(0.8), s), 1 / math.tanh(0.8))


@pytest.mark.parametrize("rho", [0.4, 0.8, 1.2])
def test_cap_floating_area(rho):
    assert model_floating_area(ModelBody.cap(rho)) == pytest.approx(cap_floating_area(rho), rel=1e-7)


@pytest.mark.parametrize("r", [0.4, 0.8, 1.5])
def test_hyperbolic_disk_floating_area(r):
    assert model_floating_area(ModelBody.hdisk(r)) == pytest.approx(hdisk_floating_area(r), rel=1e-7)


def test_tiny_cap_is_nearly_euclidean():
    rho = 1e-3
    euclidean = affine_surface_area(Ball(2, math.tan(rho)))
    assert model_floating_area(ModelBody.cap(rho)) == pytest.approx(euclidean, rel=1e-2)


# --- polarity -------------------------------------------------------------------------

def test_polar_cap_radius_is_involutive():
    rho = 0.8
    assert spherical_polar_cap(rho) == pytest.approx(math.pi / 2 - rho)
    assert spherical_polar_cap(spherical_polar_cap(rho)) == pytest.approx(rho, abs=1e-10)
    with pytest.raises(ImproperBody):
        spherical_polar_cap(1.6)


def test_polar_model_body_of_a_cap():
    polar = polar_model_body(ModelBody.cap(0.8))
    assert polar.body.radius == pytest.approx(math.tan(math.pi / 2 - 0.8), rel=1e-12)
    twice = polar_model_body(polar)
    assert twice.body.radius == pytest.approx(math.tan(0.8), rel=1e-12)


def test_euclidean_polar_of_an_ellipse_and_square():
    polar = euclidean_polar(AffineImage(Ball(2), np.diag([2.0, 0.5])))
    assert float(polar.support(np.array([1.0, 0.0]))) == pytest.approx(0.5)
    assert float(polar.support(np.array([0.0, 1.0]))) == pytest.approx(2.0)
    square = euclidean_polar(Polytope([[-1, -1], [1, -1], [1, 1], [-1, 1]]))
    assert square.volume() == pytest.approx(2.0)


@pytest.mark.parametrize("rho", [0.3, 0.8, 1.3])
def test_spherical_mean_width_of_a_cap(rho):
    assert spherical_mean_width(ModelBody.cap(rho)) == pytest.approx(math.sin(rho) / 2, rel=1e-8)


def test_spherical_polygon_measures():
    octant = np.eye(3)
    assert spherical_polygon_area(octant) == pytest.approx(math.pi / 2)
    assert spherical_perimeter(octant) == pytest.approx(3 * math.pi / 2)
    # perimeter of a polygon plus the area of its polar is 2 pi
    assert spherical_perimeter(octant) + spherical_polygon_area(octant) == pytest.approx(2 * math.pi)


# --- limits ---------------------------------------------------------------------------

@pytest.mark.slow
def test_spherical_cap_floating_limit():
    report = model_floating_body_limit(ModelBody.cap(0.8), [1e-3, 1e-4, 1e-5, 1e-6])
    assert report.predicted == pytest.approx(alpha_n(2) * cap_floating_area(0.8), rel=1e-7)
    assert report.rel_dev < 0.02


@pytest.mark.slow
def test_hyperbolic_disk_floating_limit():
    report = model_floating_body_limit(ModelBody.hdisk(0.8), [1e-3, 1e-4, 1e-5, 1e-6])
    assert report.predicted == pytest.approx(alpha_n(2) * hdisk_floating_area(0.8), rel=1e-7)
    assert report.rel_dev < 0.02


@pytest.mark.slow
def test_spherical_cap_random_limit():
    report = model_random_limit(ModelBody.cap(0.8), [1024, 4096], replicates=200, seed=0)
    assert report.rows[-1].rel_dev < 0.05
