"""
Monte Carlo engines for random polytopes.

Weighted random polytopes are convex hulls of points drawn from Phi by
rejection sampling; dual random polyhedral sets are intersections of random
halfspaces containing K drawn from the motion-invariant measure restricted to
{h_K(u) <= t <= h_K(u) + 1}. Every replicate draws from its own counter-based
Philox stream keyed by (seed, replicate, purpose), so estimates do not depend
on how replicates are spread over workers.
"""

import functools
import logging
import math
import zlib
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from floatlab.bodies import (
    ConvexBody,
    PolytopeApprox,
    WeightFn,
    affine_surface_area,
    convex_hull,
    halfspace_intersection,
    mean_width,
    measure,
)
from floatlab.distributed import run_replicates
from floatlab.errors import EnvelopeExceeded, Unbounded
from floatlab.numerics import ball_volume, beta_n, direction_grid, extrapolate_limit, sphere_area
from floatlab.report import ExperimentReport, ReportRow

logger = logging.getLogger(__name__)

# Safety factor applied to the grid maximum of phi.
ENVELOPE_FACTOR = 1.01
ENVELOPE_CHUNK = 2048
MAX_REDRAWS = 50


def rng_stream(seed: int, replicate: int, purpose: str) -> np.random.Generator:
    """Independent Philox generator for one (seed, replicate, purpose) triple."""
    key = np.random.SeedSequence([int(seed), int(replicate), zlib.crc32(purpose.encode())])
    return np.random.Generator(np.random.Philox(key))


@dataclass
class MCEstimate:
    """Replicate mean with standard error stddev / sqrt(R)."""
    mean: float
    stderr: float
    replicates: int
    normalized: Optional[float] = None
    normalized_stderr: Optional[float] = None
    predicted: Optional[float] = None

    @classmethod
    def from_samples(cls, samples: Sequence[float], scale: Optional[float] = None,
                     predicted: Optional[float] = None) -> "MCEstimate":
        values = np.asarray(samples, dtype=float)
        count = len(values)
        mean = float(np.mean(values)) if count else float("nan")
        stderr = float(np.std(values, ddof=1) / math.sqrt(count)) if count > 1 else float("nan")
        if scale is None:
            return cls(mean, stderr, count, predicted=predicted)
        return cls(mean, stderr, count, normalized=mean * scale, normalized_stderr=stderr * scale,
                   predicted=predicted)

    def agrees_with(self, other: "MCEstimate", sigmas: float = 3.0) -> bool:
        """|a - b| within ``sigmas`` combined standard errors."""
        combined = math.hypot(self.stderr, other.stderr)
        return abs(self.mean - other.mean) <= sigmas * combined

    @property
    def rel_dev(self) -> float:
        if self.normalized is None or not self.predicted:
            return float("nan")
        return abs(self.normalized - self.predicted) / abs(self.predicted)


@dataclass
class SamplerConfig:
    """
    Random polytope experiment: m points from phi / Phi(K) in K, R replicates.

    ``envelope`` bounds phi from above on K; when None it is computed from a
    grid maximum.
    """
    body: ConvexBody
    phi: WeightFn
    m: int
    replicates: int = 100
    seed: int = 0
    stream: str = "points"
    envelope: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if self.m < self.body.dim + 1:
            raise ValueError(f"m must be at least {self.body.dim + 1}, got {self.m}")
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")


@dataclass
class DualSamplerConfig:
    body: ConvexBody
    m: int
    replicates: int = 100
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be positive, got {self.m}")
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")


# ---------------------------------------------------------------------------
# Point sampling
# ---------------------------------------------------------------------------

def density_envelope(body: ConvexBody, phi: WeightFn, resolution: Optional[int] = None) -> float:
    """Upper bound M of phi on K: grid maximum over the bounding box and boundary, times 1.01."""
    if phi.constant is not None:
        return phi.constant
    if phi.bounds is not None:
        return phi.bounds[1]
    lo, hi = body.bounding_box()
    n = body.dim
    resolution = resolution or (257 if n == 2 else 49)
    axes = [np.linspace(lo[i], hi[i], resolution) for i in range(n)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    grid = grid[body.contains(grid)]
    if n == 2:
        s = np.linspace(0.0, 2 * math.pi, 4 * resolution, endpoint=False)
    else:
        theta = np.linspace(0.0, math.pi, resolution)
        phi_angle = np.linspace(0.0, 2 * math.pi, 2 * resolution, endpoint=False)
        s = np.stack(np.meshgrid(theta, phi_angle, indexing="ij"), axis=-1).reshape(-1, 2)
    edge = body.boundary(s, strict=False).point
    points = np.concatenate([grid, edge], axis=0)
    # quadrature-backed weights such as sigma_C allocate a direction grid per point
    peak = max(float(np.max(phi(points[i:i + ENVELOPE_CHUNK]))) for i in range(0, len(points), ENVELOPE_CHUNK))
    return ENVELOPE_FACTOR * peak


def sample_points(body: ConvexBody, phi: WeightFn, count: int, rng: np.random.Generator,
                  envelope: Optional[float] = None) -> np.ndarray:
    """
    ``count`` independent points with density phi / Phi(K) by rejection.

    Candidates are uniform in the bounding box and accepted with probability
    phi(x) 1[x in K] / M. Batches are sized from the acceptance rate seen so
    far, which depends only on earlier draws, so output is reproducible.

    Raises:
        EnvelopeExceeded: If phi exceeds the envelope at a candidate
    """
    M = density_envelope(body, phi) if envelope is None else float(envelope)
    lo, hi = body.bounding_box()
    n = body.dim
    chunks: List[np.ndarray] = []
    have = 0
    tried, accepted = 0, 0
    while have < count:
        need = count - have
        rate = (accepted + 1) / (tried + 2) if tried else 0.5
        batch = max(64, int(1.25 * need / rate) + 16)
        x = lo + (hi - lo) * rng.random((batch, n))
        u = rng.random(batch)
        inside = body.contains(x)
        keep = np.zeros(batch, dtype=bool)
        if np.any(inside):
            values = phi(x[inside])
            if np.any(values > M):
                raise EnvelopeExceeded(f"phi={float(np.max(values)):.6g} exceeds envelope M={M:.6g}")
            keep[inside] = u[inside] * M < values
        picked = x[keep][:need]
        chunks.append(picked)
        have += len(picked)
        tried += batch
        accepted += int(np.sum(keep))
    return np.concatenate(chunks, axis=0) if chunks else np.zeros((0, n))


def sample_point(body: ConvexBody, phi: WeightFn, rng: np.random.Generator,
                 envelope: Optional[float] = None) -> np.ndarray:
    return sample_points(body, phi, 1, rng, envelope)[0]


# ---------------------------------------------------------------------------
# Weighted random polytopes
# ---------------------------------------------------------------------------

def random_limit_prediction(body: ConvexBody, phi: WeightFn, psi: WeightFn) -> float:
    """beta_n Phi(K)^{2/(n+1)} times the integral of H^{1/(n+1)} phi^{-2/(n+1)} psi."""
    n = body.dim
    total = measure(body, phi).value

    def weight(x):
        return phi(x) ** (-2 / (n + 1)) * psi(x)

    return beta_n(n) * total ** (2 / (n + 1)) * affine_surface_area(body, WeightFn(weight, name="phi,psi"))


def vertex_limit_prediction(body: ConvexBody, phi: WeightFn) -> float:
    """Limit of E f_0(K_m) m^{-(n-1)/(n+1)} for the normalized density phi / Phi(K)."""
    n = body.dim
    total = measure(body, phi).value
    return (beta_n(n) * total ** (-(n - 1) / (n + 1))
            * affine_surface_area(body, phi, weight_power=(n - 1) / (n + 1)))


def _hull_measure(points: np.ndarray, psi: WeightFn, dim: int) -> Tuple[float, int]:
    """Psi(conv points) and the vertex count; fewer than dim + 1 points span nothing."""
    if len(points) <= dim:
        return 0.0, len(points)
    hull = convex_hull(points, dim)
    if hull.degenerate:
        return 0.0, hull.num_vertices
    return measure(hull, psi).value, hull.num_vertices


def _deficit_replicate(body, phi, psi, m, envelope, psi_total, stream, seed, replicate):
    rng = rng_stream(seed, replicate, stream)
    pts = sample_points(body, phi, m, rng, envelope)
    inner, vertices = _hull_measure(pts, psi, body.dim)
    return psi_total - inner, vertices


def random_polytope_deficit(cfg: SamplerConfig, psi: WeightFn) -> MCEstimate:
    """
    Estimate E(Psi(K) - Psi(K_m)) for the hull K_m of m points from Phi.

    The normalized value is the estimate times m^{2/(n+1)}; ``predicted`` is
    its limit.
    """
    body, n = cfg.body, cfg.body.dim
    envelope = cfg.envelope or density_envelope(body, cfg.phi)
    psi_total = measure(body, psi).value
    fn = functools.partial(_deficit_replicate, body, cfg.phi, psi, cfg.m, envelope, psi_total, cfg.stream)
    results = run_replicates(fn, cfg.replicates, cfg.seed, workers=cfg.workers)
    deficits = [r[0] for r in results]
    estimate = MCEstimate.from_samples(deficits, scale=cfg.m ** (2 / (n + 1)),
                                       predicted=random_limit_prediction(body, cfg.phi, psi))
    logger.info("m=%d: deficit=%.6g +- %.2g normalized=%.6g (R=%d)", cfg.m, estimate.mean, estimate.stderr,
                estimate.normalized, estimate.replicates)
    return estimate


def _efron_replicate(body, phi, m, envelope, phi_total, stream, seed, replicate):
    rng = rng_stream(seed, replicate, stream)
    pts = sample_points(body, phi, m, rng, envelope)
    _, f0 = _hull_measure(pts, WeightFn.one(), body.dim)
    previous, _ = _hull_measure(pts[:-1], phi, body.dim)
    return float(f0), m * (1 - previous / phi_total)


def efron_vertex_count(cfg: SamplerConfig) -> Tuple[MCEstimate, MCEstimate]:
    """
    Two estimators of E f_0(K_m): the vertex count itself and the Efron
    transform m (1 - Phi(K_{m-1}) / Phi(K)).

    Both come from the same sample in each replicate (K_{m-1} is the hull of
    the first m-1 points). Normalized by m^{-(n-1)/(n+1)}.
    """
    body, n = cfg.body, cfg.body.dim
    envelope = cfg.envelope or density_envelope(body, cfg.phi)
    phi_total = measure(body, cfg.phi).value
    fn = functools.partial(_efron_replicate, body, cfg.phi, cfg.m, envelope, phi_total, cfg.stream)
    results = run_replicates(fn, cfg.replicates, cfg.seed, workers=cfg.workers)
    scale = cfg.m ** (-(n - 1) / (n + 1))
    predicted = vertex_limit_prediction(body, cfg.phi)
    direct = MCEstimate.from_samples([r[0] for r in results], scale=scale, predicted=predicted)
    transformed = MCEstimate.from_samples([r[1] for r in results], scale=scale, predicted=predicted)
    logger.info("m=%d: E f0 direct=%.5g +- %.2g, Efron=%.5g +- %.2g", cfg.m, direct.mean, direct.stderr,
                transformed.mean, transformed.stderr)
    return direct, transformed


def nested_deficits(body: ConvexBody, phi: WeightFn, psi: WeightFn, ms: Sequence[int],
                    rng: np.random.Generator, envelope: Optional[float] = None,
                    psi_total: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Deficits and vertex counts of the hulls of the first m points of one sample.

    The hulls are nested, so the deficits are non-increasing in m.
    """
    ms = sorted(int(m) for m in ms)
    psi_total = measure(body, psi).value if psi_total is None else psi_total
    pts = sample_points(body, phi, ms[-1], rng, envelope)
    deficits, counts = [], []
    for m in ms:
        inner, f0 = _hull_measure(pts[:m], psi, body.dim)
        deficits.append(psi_total - inner)
        counts.append(f0)
    return np.array(deficits), np.array(counts, dtype=float)


def _nested_replicate(body, phi, psi, ms, envelope, psi_total, seed, replicate):
    rng = rng_stream(seed, replicate, "nested")
    return nested_deficits(body, phi, psi, ms, rng, envelope, psi_total)


def check_random_limit(body: ConvexBody, phi: WeightFn, psi: WeightFn, ms: Sequence[int],
                       replicates: int = 100, seed: int = 0, workers: int = 1, terms: int = 1,
                       predicted: Optional[float] = None, experiment: str = "random") -> ExperimentReport:
    """
    Normalized random polytope deficits over a grid of sample sizes.

    Each replicate draws max(ms) points once and measures the hulls of its
    prefixes. The limit is a weighted fit of a + b m^{-1/(n+1)}.
    """
    n = body.dim
    ms = sorted(int(m) for m in ms)
    if predicted is None:
        predicted = random_limit_prediction(body, phi, psi)
    envelope = density_envelope(body, phi)
    psi_total = measure(body, psi).value
    fn = functools.partial(_nested_replicate, body, phi, psi, ms, envelope, psi_total)
    results = run_replicates(fn, replicates, seed, workers=workers)
    deficits = np.array([r[0] for r in results])
    counts = np.array([r[1] for r in results])
    rows = []
    for k, m in enumerate(ms):
        est = MCEstimate.from_samples(deficits[:, k], scale=m ** (2 / (n + 1)), predicted=predicted)
        f0 = MCEstimate.from_samples(counts[:, k])
        logger.info("m=%d: normalized deficit %.6g +- %.2g, E f0=%.4g", m, est.normalized,
                    est.normalized_stderr, f0.mean)
        rows.append(ReportRow(param=float(m), estimate=est.mean, stderr=est.stderr, normalized=est.normalized,
                              predicted=predicted,
                              extra={"normalized_stderr": est.normalized_stderr, "f0": f0.mean,
                                     "f0_stderr": f0.stderr, "replicates": float(replicates)}))
    limit = _extrapolate_in_m(rows, n, terms)
    return ExperimentReport(experiment=experiment, rows=rows, limit=limit, predicted=predicted, seed=seed,
                            param_name="m", limit_param=float("inf"), exponent=-2 / (n + 1))


def _extrapolate_in_m(rows: List[ReportRow], n: int, terms: int) -> Optional[float]:
    if not rows:
        return None
    inv_m = np.array([1.0 / r.param for r in rows])
    values = np.array([r.normalized for r in rows])
    se = np.array([r.extra.get("normalized_stderr", float("nan")) for r in rows])
    weights = None
    if np.all(np.isfinite(se)) and np.all(se > 0):
        weights = 1.0 / se
    limit, _ = extrapolate_limit(inv_m, values, rate=1 / (n + 1), terms=terms, weights=weights)
    return limit


def check_efron(body: ConvexBody, phi: WeightFn, ms: Sequence[int], replicates: int = 200, seed: int = 0,
                workers: int = 1, experiment: str = "efron") -> ExperimentReport:
    """Vertex counts (direct and Efron-transformed) over a grid of sample sizes."""
    n = body.dim
    rows = []
    predicted = None
    for m in sorted(int(m) for m in ms):
        direct, transformed = efron_vertex_count(
            SamplerConfig(body, phi, m, replicates=replicates, seed=seed, stream=f"efron-{m}", workers=workers))
        predicted = direct.predicted
        combined = math.hypot(direct.stderr, transformed.stderr)
        rows.append(ReportRow(param=float(m), estimate=direct.mean, stderr=direct.stderr,
                              normalized=direct.normalized, predicted=predicted,
                              extra={"efron": transformed.mean, "efron_stderr": transformed.stderr,
                                     "z": abs(direct.mean - transformed.mean) / combined if combined else 0.0}))
    limit = rows[-1].normalized if rows else None
    return ExperimentReport(experiment=experiment, rows=rows, limit=limit, predicted=predicted, seed=seed,
                            param_name="m", limit_param=float("inf"), exponent=(n - 1) / (n + 1))


# ---------------------------------------------------------------------------
# Dual model
# ---------------------------------------------------------------------------

def _unit_vectors(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    g = rng.normal(size=(count, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_halfspaces(body: Optional[ConvexBody], count: int, rng: np.random.Generator,
                      dim: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    ``count`` halfspaces {x : u.x <= t} with u uniform on the sphere and t
    uniform on [h_K(u), h_K(u) + 1]. ``body=None`` stands for K = {0}.
    """
    dim = body.dim if body is not None else dim
    if dim is None:
        raise ValueError("dim is required when body is None")
    u = _unit_vectors(rng, count, dim)
    h = np.zeros(count) if body is None else body.support(u)
    return u, h + rng.random(count)


def sample_halfspace(body: Optional[ConvexBody], rng: np.random.Generator,
                     dim: Optional[int] = None) -> Tuple[np.ndarray, float]:
    u, t = sample_halfspaces(body, 1, rng, dim)
    return u[0], float(t[0])


def dual_limit_predictions(body: ConvexBody) -> Tuple[float, float]:
    """(mean width excess limit, facet count limit) of the dual model."""
    n = body.dim
    area = affine_surface_area(body, power=n / (n + 1))
    facets = beta_n(n) * (n * ball_volume(n)) ** (-(n - 1) / (n + 1)) * area
    return 2 * facets, facets


def _dual_replicate(body, m, width_k, seed, replicate):
    rng = rng_stream(seed, replicate, "halfspaces")
    n = body.dim
    normals, offsets = sample_halfspaces(body, m, rng)
    # K + B^n, approximated by its supporting halfspaces on a fine grid
    clip = direction_grid(n, 512 if n == 2 else 2048)
    all_normals = np.vstack([normals, clip])
    all_offsets = np.concatenate([offsets, body.support(clip) + 1.0])
    cell = halfspace_intersection(PolytopeApprox(n, all_normals, all_offsets), interior_point=body.interior_point)
    facets = int(np.sum(cell.active < m))
    width = mean_width(cell.vertices, nodes=8192 if n == 2 else 4096).value
    return width - width_k, facets


def dual_random_polyhedron(cfg: DualSamplerConfig) -> Tuple[MCEstimate, MCEstimate]:
    """
    Mean width excess and facet count of K^m clipped to K + B^n.

    Returns (E(W(K^m cap (K+B)) - W(K)), E f_{n-1}(K^m)) normalized by
    m^{2/(n+1)} and m^{-(n-1)/(n+1)}. Facets are counted among the m sampled
    halfspaces only.
    """
    body, n = cfg.body, cfg.body.dim
    width_k = mean_width(body, nodes=8192 if n == 2 else 4096).value
    fn = functools.partial(_dual_replicate, body, cfg.m, width_k)
    results = run_replicates(fn, cfg.replicates, cfg.seed, workers=cfg.workers)
    width_limit, facet_limit = dual_limit_predictions(body)
    width = MCEstimate.from_samples([r[0] for r in results], scale=cfg.m ** (2 / (n + 1)), predicted=width_limit)
    facets = MCEstimate.from_samples([r[1] for r in results], scale=cfg.m ** (-(n - 1) / (n + 1)),
                                     predicted=facet_limit)
    logger.info("m=%d: width excess=%.5g +- %.2g, facets=%.4g +- %.2g", cfg.m, width.mean, width.stderr,
                facets.mean, facets.stderr)
    return width, facets


def check_dual_limit(body: ConvexBody, ms: Sequence[int], replicates: int = 100, seed: int = 0,
                     workers: int = 1, experiment: str = "dual") -> ExperimentReport:
    """Facet counts of the dual model over a grid of m, with the width excess alongside."""
    n = body.dim
    rows = []
    predicted = None
    for m in sorted(int(m) for m in ms):
        width, facets = dual_random_polyhedron(DualSamplerConfig(body, m, replicates, seed, workers))
        predicted = facets.predicted
        rows.append(ReportRow(param=float(m), estimate=facets.mean, stderr=facets.stderr,
                              normalized=facets.normalized, predicted=predicted,
                              extra={"width_excess": width.mean, "width_stderr": width.stderr,
                                     "width_normalized": width.normalized, "width_predicted": width.predicted}))
    limit = rows[-1].normalized if rows else None
    return ExperimentReport(experiment=experiment, rows=rows, limit=limit, predicted=predicted, seed=seed,
                            param_name="m", limit_param=float("inf"), exponent=(n - 1) / (n + 1))


# ---------------------------------------------------------------------------
# Spherical duality
# ---------------------------------------------------------------------------

@dataclass
class DualityEstimate:
    """
    Paired estimates of E(U_1(K^m) - U_1(K)) for random hemispheres containing K.

    ``hemispheres`` intersects the sampled hemispheres and measures the
    perimeter of K^m; ``polar`` measures the area of the hull of the sampled
    poles. ``mismatches`` counts replicates where the facet count of K^m
    differs from the vertex count of the polar hull.
    """
    hemispheres: MCEstimate
    polar: MCEstimate
    facets: MCEstimate
    polar_vertices: MCEstimate
    mismatches: int
    redrawn: int
    predicted: float


def _duality_replicate(chart, polar_body, interior, u1_k, m, seed, replicate):
    from floatlab.spaces import inverse_gnomonic, spherical_perimeter, spherical_polygon_area

    density = chart.density()
    envelope = density_envelope(polar_body, density)
    for attempt in range(MAX_REDRAWS):
        rng = rng_stream(seed, replicate, f"hemispheres-{attempt}")
        w = sample_points(polar_body, density, m, rng, envelope)
        hull = convex_hull(w, 2)
        norms = np.linalg.norm(w, axis=1)
        try:
            cell = halfspace_intersection(PolytopeApprox(2, -w / norms[:, None], 1.0 / norms),
                                          interior_point=interior)
        except Unbounded:
            # K^m leaves the chart hemisphere; draw this replicate again
            continue
        u1_hemispheres = spherical_perimeter(inverse_gnomonic(chart, cell.vertices)) / (4 * math.pi)
        polar_area = spherical_polygon_area(inverse_gnomonic(chart, hull.vertices))
        u1_polar = 0.5 - polar_area / sphere_area(2)
        return u1_hemispheres - u1_k, u1_polar - u1_k, cell.num_facets, hull.num_vertices, attempt
    raise Unbounded(f"K^m did not fit in the chart after {MAX_REDRAWS} draws (m={m})")


def spherical_dual_transfer(body, m: int, replicates: int = 100, seed: int = 0,
                            workers: int = 1) -> DualityEstimate:
    """
    Random spherical polygons K^m from hemispheres H^-(x), x uniform in K°.

    ``body`` is a spherical ModelBody in S^2. The same poles feed both
    estimators: K^m is cut out of the chart by the halfplanes -w.y <= 1 (w
    the chart image of -x), and (K^m)° is the spherical hull of the poles.

    Raises:
        ImproperBody: If the body is not in an open hemisphere
    """
    from floatlab.spaces import model_floating_area, polar_model_body, spherical_mean_width

    if body.chart.kind != "spherical" or body.dim != 2:
        raise ValueError("spherical duality is implemented on S^2")
    if m < 3:
        raise ValueError(f"m must be at least 3, got {m}")
    polar = polar_model_body(body)
    u1_k = spherical_mean_width(body)
    polar_volume = measure(polar.body, body.chart.density()).value
    predicted = beta_n(2) * polar_volume ** (2 / 3) * model_floating_area(polar) / sphere_area(2)
    fn = functools.partial(_duality_replicate, body.chart, polar.body, body.body.interior_point, u1_k, m)
    results = run_replicates(fn, replicates, seed, workers=workers)
    scale = m ** (2 / 3)
    estimate = DualityEstimate(
        hemispheres=MCEstimate.from_samples([r[0] for r in results], scale=scale, predicted=predicted),
        polar=MCEstimate.from_samples([r[1] for r in results], scale=scale, predicted=predicted),
        facets=MCEstimate.from_samples([r[2] for r in results]),
        polar_vertices=MCEstimate.from_samples([r[3] for r in results]),
        mismatches=int(sum(r[2] != r[3] for r in results)),
        redrawn=int(sum(r[4] for r in results)),
        predicted=predicted,
    )
    if estimate.mismatches:
        logger.warning("%d of %d replicates have f_1(K^m) != f_0 of the polar hull", estimate.mismatches,
                       replicates)
    logger.info("m=%d: U1 excess %.6g +- %.2g (hemispheres) vs %.6g +- %.2g (polar)", m,
                estimate.hemispheres.mean, estimate.hemispheres.stderr, estimate.polar.mean,
                estimate.polar.stderr)
    return estimate


def check_spherical_duality(body, ms: Sequence[int], replicates: int = 100, seed: int = 0, workers: int = 1,
                            experiment: str = "spherical-duality") -> ExperimentReport:
    rows = []
    predicted = None
    for m in sorted(int(m) for m in ms):
        est = spherical_dual_transfer(body, m, replicates, seed, workers)
        predicted = est.predicted
        rows.append(ReportRow(param=float(m), estimate=est.hemispheres.mean, stderr=est.hemispheres.stderr,
                              normalized=est.hemispheres.normalized, predicted=predicted,
                              extra={"polar": est.polar.mean, "polar_stderr": est.polar.stderr,
                                     "facets": est.facets.mean, "mismatches": float(est.mismatches)}))
    limit = rows[-1].normalized if rows else None
    return ExperimentReport(experiment=experiment, rows=rows, limit=limit, predicted=predicted, seed=seed,
                            param_name="m", limit_param=float("inf"), exponent=-2 / 3)
