"""Tests for floatlab.hilbert."""

import math

import numpy as np
import pytest

from floatlab.bodies import AffineImage, Ball, Polytope, SmoothBody
from floatlab.hilbert import (
    FinslerBall,
    HilbertGeometry,
    centroaffine_surface_area,
    chord,
    density_blowup,
    finsler_norm,
    hilbert_distance,
    hilbert_floating_area,
    normalize_flavor,
    omegacp_limit,
    volume_density,
)
from floatlab.stochastic import rng_stream

DISK = Ball(2)
ELLIPSE = AffineImage(Ball(2), np.diag([2.0, 0.5]))
TRIANGLE = Polytope([[-1.0, -1.0], [2.0, -1.0], [-1.0, 2.0]])


def klein_distance(x, y):
    x, y = np.asarray(x), np.asarray(y)
    return math.acosh((1 - x @ y) / math.sqrt((1 - x @ x) * (1 - y @ y)))


def interior_points(body, count, seed):
    rng = rng_stream(seed, 0, "hilbert-test")
    lo, hi = body.bounding_box()
    pts = rng.uniform(lo, hi, size=(20 * count, 2))
    pts = pts[body.gauge(pts) < 0.9]
    return pts[:count]


# --- distance and norm ----------------------------------------------------------------

def test_distance_in_the_disk():
    assert float(hilbert_distance(DISK, np.zeros(2), np.array([0.5, 0.0]))) == pytest.approx(0.5 * math.log(3))
    assert float(hilbert_distance(DISK, np.array([0.2, 0.1]), np.array([0.2, 0.1]))) == 0.0


def test_disk_distance_is_the_klein_distance():
    pts = interior_points(DISK, 20, 1)
    for x, y in zip(pts[:10], pts[10:]):
        assert float(hilbert_distance(DISK, x, y)) == pytest.approx(klein_distance(x, y), rel=1e-10)


@pytest.mark.parametrize("body", [ELLIPSE, TRIANGLE])
def test_distance_is_symmetric_and_satisfies_the_triangle_inequality(body):
    x, y, z = (interior_points(body, 30, 2)[i::3] for i in range(3))
    dxy = hilbert_distance(body, x, y)
    assert np.allclose(dxy, hilbert_distance(body, y, x))
    assert np.all(dxy <= hilbert_distance(body, x, z) + hilbert_distance(body, z, y) + 1e-12)


def test_distance_is_affine_invariant():
    A = np.array([[1.5, 0.4], [-0.2, 0.8]])
    b = np.array([0.3, -1.0])
    image = AffineImage(TRIANGLE, A, b)
    pts = interior_points(TRIANGLE, 10, 3)
    before = hilbert_distance(TRIANGLE, pts[:5], pts[5:])
    after = hilbert_distance(image, pts[:5] @ A.T + b, pts[5:] @ A.T + b)
    assert np.allclose(before, after, rtol=1e-10)


def test_norm_in_the_disk():
    assert float(finsler_norm(DISK, np.zeros(2), np.array([0.3, 0.4]))) == pytest.approx(0.5)
    # radial direction at |x| = 1/2: 1 / (1 - |x|^2)
    assert float(finsler_norm(DISK, np.array([0.5, 0.0]), np.array([1.0, 0.0]))) == pytest.approx(4 / 3)
    assert float(finsler_norm(DISK, np.array([0.5, 0.0]), np.zeros(2))) == 0.0


def test_chord_needs_an_interior_point():
    with pytest.raises(ValueError):
        chord(DISK, np.array([2.0, 0.0]), np.array([1.0, 0.0]))


# --- unit balls and densities ---------------------------------------------------------

def test_finsler_ball_at_the_disk_center_is_the_unit_disk():
    ball = FinslerBall(DISK, np.zeros(2))
    assert float(ball.support(np.array([0.6, 0.8]))) == pytest.approx(1.0, rel=1e-8)
    assert float(ball.norm(np.array([0.0, 2.0]))) == pytest.approx(2.0)


def test_finsler_ball_constructions_agree():
    ball = FinslerBall(ELLIPSE, np.array([0.4, 0.1]))
    u = np.array([[1.0, 0.0], [0.6, 0.8], [-0.28, 0.96]])
    assert np.allclose(ball.support(u), ball.support_via_polars(u), rtol=1e-5)


def test_finsler_ball_is_planar_only():
    with pytest.raises(ValueError):
        FinslerBall(Ball(3), np.zeros(3))


def test_busemann_density_of_the_disk_is_the_klein_density():
    geom = HilbertGeometry(DISK)
    x = np.array([[0.0, 0.0], [0.3, -0.4], [0.0, 0.9]])
    expected = (1 - np.sum(x * x, axis=1)) ** -1.5
    assert np.allclose(geom.density(x), expected, rtol=1e-6)


@pytest.mark.parametrize("body", [DISK, ELLIPSE])
def test_flavors_agree_on_ellipses(body):
    x = np.array([[0.1, 0.2], [-0.5, 0.05]])
    busemann = volume_density(HilbertGeometry(body, "busemann"), x)
    holmes_thompson = volume_density(HilbertGeometry(body, "holmes-thompson"), x)
    assert np.allclose(busemann, holmes_thompson, rtol=1e-6)


def test_holmes_thompson_is_below_busemann_on_a_triangle():
    x = np.array([[0.0, 0.0], [0.5, -0.2]])
    busemann = volume_density(HilbertGeometry(TRIANGLE, "busemann"), x, rtol=1e-6)
    holmes_thompson = volume_density(HilbertGeometry(TRIANGLE, "holmes-thompson"), x, rtol=1e-6)
    assert np.all(holmes_thompson < busemann)


def test_flavor_names():
    assert normalize_flavor("Holmes_Thompson") == "holmes-thompson"
    with pytest.raises(ValueError):
        normalize_flavor("finsler")
    with pytest.raises(ValueError):
        HilbertGeometry(Ball(2, 0.5, center=[2.0, 0.0]))


# --- areas ----------------------------------------------------------------------------

def test_centroaffine_area_of_the_disk():
    assert centroaffine_surface_area(DISK) == pytest.approx(2 * math.pi, rel=1e-8)


def test_centroaffine_area_is_linear_invariant():
    sheared = AffineImage(Ball(2), np.array([[2.0, 0.3], [0.0, 0.5]]))
    assert centroaffine_surface_area(sheared) == pytest.approx(2 * math.pi, rel=1e-7)
    assert centroaffine_surface_area(SmoothBody.ellipse(1.5, 0.7)) == pytest.approx(2 * math.pi, rel=1e-4)


def test_hilbert_floating_area_of_a_centered_disk():
    lam = 0.9
    geom = HilbertGeometry(DISK)
    expected = 2 * math.pi * lam ** (2 / 3) * (1 - lam * lam) ** -0.5
    assert hilbert_floating_area(geom, Ball(2, lam)) == pytest.approx(expected, rel=1e-6)


@pytest.mark.parametrize("flavor", ["busemann", "holmes-thompson"])
@pytest.mark.parametrize("K", [Ball(2, 0.6), Ball(2, 0.3, center=[0.2, 0.1])], ids=["centered", "offset"])
def test_hilbert_floating_area_is_linear_invariant(flavor, K):
    A = np.array([[1.5, 0.4], [-0.2, 0.8]])
    area = hilbert_floating_area(HilbertGeometry(DISK, flavor), K)
    mapped = hilbert_floating_area(HilbertGeometry(AffineImage(DISK, A), flavor), AffineImage(K, A))
    assert mapped == pytest.approx(area, rel=1e-5)


def test_hilbert_floating_area_needs_an_interior_body():
    with pytest.raises(ValueError):
        hilbert_floating_area(HilbertGeometry(DISK), Ball(2, 1.0))


def test_density_blowup_at_the_disk_boundary():
    scaled, limit = density_blowup(HilbertGeometry(DISK), 0.3, [0.9, 0.99, 0.995])
    assert limit == pytest.approx(2 ** -1.5)
    assert scaled[-1] == pytest.approx(limit, rel=1e-2)
    assert abs(scaled[-1] - limit) < abs(scaled[0] - limit)


def test_omegacp_rows_for_the_disk():
    report = omegacp_limit(DISK, [0.95, 0.9], terms=1)
    assert [row.param for row in report.rows] == [0.9, 0.95]
    lam = 0.9
    expected = 2 * math.pi * lam ** (2 / 3) * math.sqrt(2 / (1 + lam))
    assert report.rows[0].normalized == pytest.approx(expected, rel=1e-6)
    assert report.predicted == pytest.approx(2 * math.pi, rel=1e-8)
    assert report.metadata["flavor"] == "busemann"
    with pytest.raises(ValueError):
        omegacp_limit(DISK, [1.0])


@pytest.mark.slow
@pytest.mark.parametrize("flavor", ["busemann", "holmes-thompson"])
def test_omegacp_limit_of_the_disk(flavor):
    report = omegacp_limit(DISK, [0.9, 0.95, 0.98, 0.99], flavor=flavor)
    assert report.rel_dev < 0.02


@pytest.mark.slow
def test_omegacp_limit_of_an_ellipse():
    report = omegacp_limit(ELLIPSE, [0.9, 0.95, 0.98, 0.99])
    assert report.limit == pytest.approx(2 * math.pi, rel=0.02)
