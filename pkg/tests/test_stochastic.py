"""Tests for floatlab.stochastic."""

import math

import numpy as np
import pytest
from scipy.stats import kstest

from floatlab.bodies import AffineImage, Ball, Polytope, WeightFn, mean_width
from floatlab.errors import EnvelopeExceeded
from floatlab.numerics import beta_n
from floatlab.spaces import ModelBody
from floatlab.stochastic import (
    DualSamplerConfig,
    MCEstimate,
    SamplerConfig,
    check_dual_limit,
    check_efron,
    check_random_limit,
    density_envelope,
    dual_limit_predictions,
    dual_random_polyhedron,
    efron_vertex_count,
    nested_deficits,
    random_limit_prediction,
    random_polytope_deficit,
    rng_stream,
    sample_halfspaces,
    sample_points,
    spherical_dual_transfer,
)


def triangle():
    return Polytope([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


# --- streams and estimates -----------------------------------------------------------

def test_rng_stream_is_keyed_by_seed_replicate_and_purpose():
    a = rng_stream(7, 3, "points").random(5)
    assert np.array_equal(a, rng_stream(7, 3, "points").random(5))
    assert not np.array_equal(a, rng_stream(7, 4, "points").random(5))
    assert not np.array_equal(a, rng_stream(8, 3, "points").random(5))
    assert not np.array_equal(a, rng_stream(7, 3, "halfspaces").random(5))


def test_mc_estimate_from_samples():
    est = MCEstimate.from_samples([1.0, 2.0, 3.0, 4.0], scale=10.0, predicted=25.0)
    assert est.mean == pytest.approx(2.5)
    assert est.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert est.normalized == pytest.approx(25.0)
    assert est.rel_dev == pytest.approx(0.0)
    assert math.isnan(MCEstimate.from_samples([1.0]).stderr)


def test_mc_estimates_agree_within_combined_error():
    a = MCEstimate(1.0, 0.1, 100)
    assert a.agrees_with(MCEstimate(1.3, 0.1, 100))
    assert not a.agrees_with(MCEstimate(1.5, 0.1, 100))


def test_sampler_config_validates():
    with pytest.raises(ValueError):
        SamplerConfig(Ball(2), WeightFn.one(), m=2)
    with pytest.raises(ValueError):
        SamplerConfig(Ball(2), WeightFn.one(), m=10, replicates=0)


# --- point sampling -------------------------------------------------------------------

def test_uniform_points_in_disk():
    pts = sample_points(Ball(2), WeightFn.one(), 4000, rng_stream(1, 0, "test"))
    assert pts.shape == (4000, 2)
    assert np.all(np.linalg.norm(pts, axis=1) <= 1.0)
    assert np.abs(pts.mean(axis=0)).max() < 0.05
    # |X|^2 is uniform on [0, 1]
    assert kstest(np.sum(pts * pts, axis=1), "uniform").pvalue > 1e-3


def test_bump_weighted_points_follow_radial_law():
    pts = sample_points(Ball(2), WeightFn.bump(), 4000, rng_stream(2, 0, "test"))
    r = np.linalg.norm(pts, axis=1)
    norm = 1 - 2 ** -0.5

    def cdf(t):
        return (1 - (1 + np.asarray(t) ** 2) ** -0.5) / norm

    assert kstest(r, cdf).pvalue > 1e-3


def test_density_envelope_bounds_the_weight():
    body = AffineImage(Ball(2), np.diag([2.0, 1.0]))
    envelope = density_envelope(body, WeightFn.bump())
    assert envelope == pytest.approx(1.01, rel=1e-9)
    assert density_envelope(body, WeightFn.const(3.0)) == 3.0


def test_sampler_rejects_a_low_envelope():
    with pytest.raises(EnvelopeExceeded):
        sample_points(Ball(2), WeightFn.bump(), 100, rng_stream(0, 0, "test"), envelope=0.5)


# --- random polytopes -----------------------------------------------------------------

def test_random_triangle_in_triangle():
    # E area(K_3) = area(K) / 12 for any triangle K
    direct, _ = efron_vertex_count(SamplerConfig(triangle(), WeightFn.one(), 3, replicates=50, seed=3))
    assert direct.mean == 3.0
    est = random_polytope_deficit(SamplerConfig(triangle(), WeightFn.one(), 3, replicates=2000, seed=3),
                                  WeightFn.one())
    assert abs(est.mean - 0.5 * 11 / 12) <= 4 * est.stderr


def test_deficit_scales_with_constant_psi():
    cfg = SamplerConfig(Ball(2), WeightFn.one(), 40, replicates=20, seed=5)
    one = random_polytope_deficit(cfg, WeightFn.one())
    three = random_polytope_deficit(cfg, WeightFn.const(3.0))
    assert three.mean == pytest.approx(3 * one.mean, rel=1e-12)


def test_deficit_is_deterministic_in_the_seed():
    cfg = SamplerConfig(Ball(2), WeightFn.one(), 30, replicates=10, seed=9)
    first = random_polytope_deficit(cfg, WeightFn.one())
    assert random_polytope_deficit(cfg, WeightFn.one()).mean == first.mean
    other = random_polytope_deficit(SamplerConfig(Ball(2), WeightFn.one(), 30, replicates=10, seed=10),
                                    WeightFn.one())
    assert other.mean != first.mean


def test_nested_deficits_decrease():
    deficits, counts = nested_deficits(Ball(2), WeightFn.bump(), WeightFn.one(), [5, 20, 80, 320],
                                       rng_stream(4, 0, "nested"))
    assert np.all(np.diff(deficits) <= 1e-15)
    assert np.all(deficits > 0)
    assert np.all(counts >= 3)


@pytest.mark.parametrize("m", [10, 100])
def test_efron_identity(m):
    direct, transformed = efron_vertex_count(SamplerConfig(Ball(2), WeightFn.one(), m, replicates=300, seed=m))
    assert direct.agrees_with(transformed, sigmas=3)


def test_random_limit_prediction_for_disk():
    expected = beta_n(2) * math.pi ** (2 / 3) * 2 * math.pi
    assert random_limit_prediction(Ball(2), WeightFn.one(), WeightFn.one()) == pytest.approx(expected, rel=1e-8)


def test_check_random_limit_report_shape():
    report = check_random_limit(Ball(2), WeightFn.one(), WeightFn.one(), [32, 16], replicates=8, seed=1)
    assert [row.param for row in report.rows] == [16.0, 32.0]
    assert report.exponent == pytest.approx(-2 / 3)
    assert report.limit_param == math.inf
    assert report.seed == 1
    assert report.rows[0].estimate > report.rows[1].estimate
    assert report.rows[1].extra["replicates"] == 8.0


# --- dual model -----------------------------------------------------------------------

def test_sampled_halfspaces_contain_the_body():
    body = AffineImage(Ball(2), np.diag([2.0, 1.0]))
    u, t = sample_halfspaces(body, 500, rng_stream(0, 0, "halfspaces"))
    h = body.support(u)
    assert np.allclose(np.linalg.norm(u, axis=1), 1.0)
    assert np.all(t >= h) and np.all(t <= h + 1)


def test_sampled_halfspaces_around_the_origin():
    u, t = sample_halfspaces(None, 100, rng_stream(0, 1, "halfspaces"), dim=3)
    assert u.shape == (100, 3)
    assert np.all((t >= 0) & (t <= 1))
    with pytest.raises(ValueError):
        sample_halfspaces(None, 10, rng_stream(0, 1, "halfspaces"))


def test_dual_predictions_for_disk():
    assert mean_width(Ball(2)).value == pytest.approx(2.0, rel=1e-12)
    width, facets = dual_limit_predictions(Ball(2))
    expected = beta_n(2) * (2 * math.pi) ** (-1 / 3) * 2 * math.pi
    assert facets == pytest.approx(expected, rel=1e-8)
    assert width == pytest.approx(2 * expected, rel=1e-8)


def test_dual_polyhedron_counts_sampled_facets_only():
    width, facets = dual_random_polyhedron(DualSamplerConfig(Ball(2), 60, replicates=10, seed=2))
    assert 3 <= facets.mean <= 60
    assert width.mean > 0


# --- spherical duality ----------------------------------------------------------------

def test_spherical_duality_pairs_agree():
    est = spherical_dual_transfer(ModelBody.cap(0.8), 40, replicates=30, seed=4)
    assert est.mismatches == 0
    assert est.hemispheres.agrees_with(est.polar, sigmas=3)
    assert est.hemispheres.mean > 0
    assert est.facets.mean == pytest.approx(est.polar_vertices.mean)


def test_spherical_duality_rejects_hyperbolic_bodies():
    with pytest.raises(ValueError):
        spherical_dual_transfer(ModelBody.hdisk(0.5), 20, replicates=2)


# --- acceptance runs ------------------------------------------------------------------

@pytest.mark.slow
def test_disk_random_polytope_limit():
    report = check_random_limit(Ball(2), WeightFn.one(), WeightFn.one(), [256, 1024, 4096], replicates=400,
                                seed=0)
    assert report.rows[-1].rel_dev < 0.05


@pytest.mark.slow
def test_efron_identity_acceptance():
    report = check_efron(Ball(2), WeightFn.one(), [10, 100, 1000], replicates=200, seed=0)
    assert all(row.extra["z"] < 3 for row in report.rows)


@pytest.mark.slow
def test_disk_dual_facet_limit():
    report = check_dual_limit(Ball(2), [4096], replicates=100, seed=0)
    assert report.rows[-1].rel_dev < 0.07
