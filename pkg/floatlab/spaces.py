"""
Spherical and hyperbolic geometry through gnomonic charts.

A body on S^n (in an open hemisphere around e_{n+1}) or on the hyperboloid
model of H^n is represented by its chart image, a Euclidean convex body.
Geodesics map to lines, so hulls, halfspaces and floating bodies are
computed in the chart with the Jacobian density

    psi_n(x) = (1 + |x|^2)^{-(n+1)/2}   (spherical)
    psi_n(x) = (1 - |x|^2)^{-(n+1)/2}   (hyperbolic, Klein model)

and fed to the Euclidean engines in ``floating`` and ``stochastic``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from floatlab.bodies import (
    AffineImage,
    Ball,
    ConvexBody,
    Measured,
    Polytope,
    PolytopeApprox,
    WeightFn,
    boundary_integral,
    measure,
    parse_body,
)
from floatlab.errors import ImproperBody, OutOfChart
from floatlab.floating import check_floating_limit
from floatlab.numerics import alpha_n, beta_n, direction_grid, sphere_area
from floatlab.report import ExperimentReport
from floatlab.stochastic import (
    MCEstimate,
    SamplerConfig,
    check_random_limit,
    efron_vertex_count,
    random_polytope_deficit,
)

logger = logging.getLogger(__name__)

# Minimum height x.e_{n+1} of a spherical body above the equator.
SPHERICAL_MARGIN = 0.05
# Maximum chart radius of a hyperbolic body.
HYPERBOLIC_MARGIN = 0.99
SURFACE_TOL = 1e-9


@dataclass(frozen=True)
class GeometryChart:
    """Gnomonic chart of S^n or H^n centered at e_{n+1}."""
    kind: str
    dim: int = 2

    def __post_init__(self):
        if self.kind not in ("spherical", "hyperbolic"):
            raise ValueError(f"Unknown geometry {self.kind!r}; expected 'spherical' or 'hyperbolic'")
        if self.dim not in (2, 3):
            raise ValueError(f"Unsupported dimension: {self.dim}")

    @classmethod
    def spherical(cls, dim: int = 2) -> "GeometryChart":
        return cls("spherical", dim)

    @classmethod
    def hyperbolic(cls, dim: int = 2) -> "GeometryChart":
        return cls("hyperbolic", dim)

    @property
    def sign(self) -> float:
        """+1 on the sphere, -1 on the hyperboloid."""
        return 1.0 if self.kind == "spherical" else -1.0

    def density(self) -> WeightFn:
        """Jacobian psi_n of the inverse chart."""
        if self.dim == 2:
            return WeightFn.bump() if self.kind == "spherical" else WeightFn.klein()
        exponent = -(self.dim + 1) / 2
        return WeightFn(func=lambda x, s=self.sign, e=exponent: (1 + s * np.sum(x * x, axis=-1)) ** e,
                        name=f"{self.kind}-chart")

    def in_domain(self, xbar) -> np.ndarray:
        xbar = np.asarray(xbar, dtype=float)
        if self.kind == "spherical":
            return np.ones(xbar.shape[:-1], dtype=bool)
        return np.sum(xbar * xbar, axis=-1) < 1

    def distance(self, x, y) -> np.ndarray:
        """Geodesic distance between model points."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "spherical":
            dot = np.sum(x * y, axis=-1)
            cross = np.sqrt(np.maximum(0.0, np.sum(x * x, axis=-1) * np.sum(y * y, axis=-1) - dot * dot))
            return np.arctan2(cross, dot)
        return np.arccosh(np.maximum(1.0, -minkowski_product(x, y)))


def minkowski_product(x, y) -> np.ndarray:
    """Lorentzian product x.y - 2 x_{n+1} y_{n+1} of the hyperboloid model."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sum(x[..., :-1] * y[..., :-1], axis=-1) - x[..., -1] * y[..., -1]


def gnomonic(chart: GeometryChart, x) -> np.ndarray:
    """
    Chart image x_hat / x_{n+1} of model points.

    Raises:
        OutOfChart: If a point is off the model surface or not in the
            upper half (x_{n+1} <= 0)
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != chart.dim + 1:
        raise ValueError(f"model points need {chart.dim + 1} coordinates, got {x.shape[-1]}")
    last = x[..., -1]
    if chart.kind == "spherical":
        on_surface = np.abs(np.sum(x * x, axis=-1) - 1) <= SURFACE_TOL
    else:
        on_surface = np.abs(minkowski_product(x, x) + 1) <= SURFACE_TOL * np.maximum(1.0, last * last)
    if not np.all(on_surface):
        raise OutOfChart(f"point is not on the {chart.kind} model surface")
    if np.any(last <= 0):
        raise OutOfChart("point is outside the chart hemisphere/sheet (x_{n+1} <= 0)")
    return x[..., :-1] / last[..., None]


def inverse_gnomonic(chart: GeometryChart, xbar) -> np.ndarray:
    """
    Model point with chart image ``xbar``.

    Raises:
        OutOfChart: For hyperbolic chart points with |xbar| >= 1
    """
    xbar = np.asarray(xbar, dtype=float)
    q = np.sum(xbar * xbar, axis=-1)
    if chart.kind == "hyperbolic" and np.any(q >= 1):
        raise OutOfChart("hyperbolic chart points must lie in the open unit ball")
    scale = 1.0 / np.sqrt(1 + chart.sign * q)
    return np.concatenate([xbar * scale[..., None], scale[..., None]], axis=-1)


def _chart_reach(body: ConvexBody) -> float:
    """max |x| over the body, from support values on a direction grid."""
    dirs = direction_grid(body.dim, 720 if body.dim == 2 else 2048)
    return float(np.max(body.support(dirs)))


@dataclass
class ModelBody:
    """
    Convex body on S^n or H^n stored as its chart image.

    Raises:
        ImproperBody: Spherical body too close to the equator
        OutOfChart: Hyperbolic body reaching |x| > 0.99 in the chart
    """
    chart: GeometryChart
    body: ConvexBody
    label: str = ""

    def __post_init__(self):
        if self.body.dim != self.chart.dim:
            raise ValueError(f"chart is {self.chart.dim}-dimensional, body is {self.body.dim}-dimensional")
        reach = _chart_reach(self.body)
        if self.chart.kind == "spherical":
            height = 1.0 / math.sqrt(1 + reach * reach)
            if height < SPHERICAL_MARGIN:
                raise ImproperBody(
                    f"body reaches height {height:.4g} above the equator (need >= {SPHERICAL_MARGIN})")
        elif reach > HYPERBOLIC_MARGIN:
            raise OutOfChart(f"chart image reaches radius {reach:.6g} (need <= {HYPERBOLIC_MARGIN})")
        if not self.label:
            self.label = f"{self.chart.kind} {self.body.describe()}"

    @property
    def dim(self) -> int:
        return self.chart.dim

    @classmethod
    def cap(cls, rho: float, dim: int = 2) -> "ModelBody":
        """Spherical cap of geodesic radius rho about the pole."""
        if not 0 < rho < math.pi / 2:
            raise ImproperBody(f"cap radius must lie in (0, pi/2), got {rho}")
        return cls(GeometryChart.spherical(dim), Ball(dim, math.tan(rho), kind="cap"), label=f"cap rho={rho:g}")

    @classmethod
    def hdisk(cls, r: float, dim: int = 2) -> "ModelBody":
        """Hyperbolic ball of geodesic radius r about e_{n+1}."""
        if r <= 0:
            raise ValueError(f"radius must be positive, got {r}")
        return cls(GeometryChart.hyperbolic(dim), Ball(dim, math.tanh(r), kind="hdisk"), label=f"hdisk r={r:g}")

    def contains(self, x) -> np.ndarray:
        """Membership of model points."""
        return self.body.contains(gnomonic(self.chart, x))

    def describe(self) -> str:
        return self.label


def parse_model_body(text: str, geometry: str) -> ModelBody:
    """
    Model body from a body description and a geometry name.

    ``cap rho=..`` implies the spherical chart and ``hdisk r=..`` the
    hyperbolic one; any other description is read as the chart image.
    """
    chart = GeometryChart(geometry)
    body = parse_body(text)
    if body.kind == "cap" and chart.kind != "spherical":
        raise ValueError("cap bodies live on the sphere; use geometry = spherical")
    if body.kind == "hdisk" and chart.kind != "hyperbolic":
        raise ValueError("hdisk bodies live in hyperbolic space; use geometry = hyperbolic")
    return ModelBody(chart, body, label=f"{geometry} {text.strip()}")


# ---------------------------------------------------------------------------
# Measures and curvature
# ---------------------------------------------------------------------------

def model_measure(mbody: ModelBody, region=None, rtol: float = 1e-10) -> Measured:
    """Intrinsic volume of ``region`` (default the body) as the chart integral of psi_n."""
    region = mbody.body if region is None else region
    return measure(region, mbody.chart.density(), rtol=rtol)


def transfer_factor(chart: GeometryChart, point, normal) -> np.ndarray:
    """((1 +- |x|^2) / (1 +- (x.n)^2))^{(n+1)/2}, the chart-to-model curvature factor."""
    point = np.asarray(point, dtype=float)
    normal = np.asarray(normal, dtype=float)
    s = chart.sign
    q = np.sum(point * point, axis=-1)
    xn = np.sum(point * normal, axis=-1)
    return ((1 + s * q) / (1 + s * xn * xn)) ** ((chart.dim + 1) / 2)


def model_curvature_transfer(mbody: ModelBody, s) -> np.ndarray:
    """
    Intrinsic Gauss-Kronecker curvature at boundary parameter s.

    Raises:
        CurvatureUnavailable: At corners of a polygonal chart image
    """
    bp = mbody.body.boundary(np.asarray(s, dtype=float), strict=True)
    return bp.curvature * transfer_factor(mbody.chart, bp.point, bp.normal)


def model_floating_area(mbody: ModelBody) -> float:
    """Boundary integral of H^{1/(n+1)} (1 +- |x|^2)^{-(n-1)/2} over the chart image."""
    n = mbody.dim
    s = mbody.chart.sign

    def f(bp):
        q = np.sum(bp.point * bp.point, axis=-1)
        return np.maximum(bp.curvature, 0.0) ** (1 / (n + 1)) * (1 + s * q) ** (-(n - 1) / 2)

    return boundary_integral(mbody.body, f).value


# ---------------------------------------------------------------------------
# Limit experiments
# ---------------------------------------------------------------------------

def model_floating_body_limit(mbody: ModelBody, deltas: Sequence[float], workers: int = 1, terms: int = 1,
                              **spec_kwargs) -> ExperimentReport:
    """
    Floating body of the model body: the chart floating body with phi = psi = psi_n.

    The predicted limit of deficit / delta^{2/(n+1)} is alpha_n times the
    floating area.
    """
    psi = mbody.chart.density()
    predicted = alpha_n(mbody.dim) * model_floating_area(mbody)
    logger.info("%s: predicted floating limit %.8g", mbody.describe(), predicted)
    report = check_floating_limit(mbody.body, psi, psi, deltas, predicted=predicted, terms=terms, workers=workers,
                                  experiment=f"{mbody.chart.kind}-floating", **spec_kwargs)
    report.metadata["body"] = mbody.describe()
    return report


@dataclass
class ModelRandomEstimate:
    """Volume deficit and vertex count of a random model polytope."""
    deficit: MCEstimate
    vertices: MCEstimate


def model_random_polytope(mbody: ModelBody, m: int, replicates: int = 100, seed: int = 0,
                          workers: int = 1) -> ModelRandomEstimate:
    """
    Hull of m random points, uniform in the intrinsic volume of the body.

    Chart points are drawn with density psi_n / Psi_n(K) and their Euclidean
    hull is the chart image of the intrinsic hull. The deficit limit is
    beta_n vol(K)^{2/(n+1)} times the floating area; the vertex count limit
    is beta_n vol(K)^{-(n-1)/(n+1)} times the floating area.
    """
    psi = mbody.chart.density()
    cfg = SamplerConfig(mbody.body, psi, m, replicates=replicates, seed=seed, workers=workers)
    deficit = random_polytope_deficit(cfg, psi)
    vertices, _ = efron_vertex_count(cfg)
    return ModelRandomEstimate(deficit, vertices)


def model_random_limit(mbody: ModelBody, ms: Sequence[int], replicates: int = 100, seed: int = 0,
                       workers: int = 1, terms: int = 1) -> ExperimentReport:
    n = mbody.dim
    psi = mbody.chart.density()
    volume = model_measure(mbody).value
    predicted = beta_n(n) * volume ** (2 / (n + 1)) * model_floating_area(mbody)
    report = check_random_limit(mbody.body, psi, psi, ms, replicates=replicates, seed=seed, workers=workers,
                                terms=terms, predicted=predicted, experiment=f"{mbody.chart.kind}-random")
    report.metadata["body"] = mbody.describe()
    return report


# ---------------------------------------------------------------------------
# Spherical polarity
# ---------------------------------------------------------------------------

def spherical_polar_cap(rho: float) -> float:
    """Radius of the polar of a cap of radius rho (a cap about the antipode)."""
    if not 0 < rho < math.pi / 2:
        raise ImproperBody(f"cap radius must lie in (0, pi/2), got {rho}")
    return math.pi / 2 - rho


def euclidean_polar(body: ConvexBody) -> ConvexBody:
    """
    Polar body {y : x.y <= 1 for all x in K} of a body with 0 in its interior.

    Exact for centered balls, their linear images and polytopes; other
    planar bodies get the inscribed polygon through u / h_K(u) on a fine grid.
    """
    if not bool(body.contains(np.zeros(body.dim), tol=-1e-12)):
        raise ValueError("the origin must be interior to the body")
    if isinstance(body, Ball) and np.allclose(body.center, 0.0):
        return Ball(body.dim, 1.0 / body.radius)
    if (isinstance(body, AffineImage) and isinstance(body.base, Ball) and np.allclose(body.b, 0.0)
            and np.allclose(body.base.center, 0.0)):
        return AffineImage(Ball(body.dim, 1.0 / body.base.radius), np.linalg.inv(body.A).T)
    if isinstance(body, Polytope):
        return Polytope(body.normals / body.offsets[:, None])
    if body.dim != 2:
        raise ValueError(f"no polar construction for {body.describe()} in dimension {body.dim}")
    dirs = direction_grid(2, 2048)
    return Polytope(dirs / body.support(dirs)[:, None])


def _antipodal(body: ConvexBody) -> ConvexBody:
    if isinstance(body, Ball):
        return Ball(body.dim, body.radius, -body.center)
    if isinstance(body, AffineImage):
        return AffineImage(body.base, -body.A, -body.b)
    if isinstance(body, Polytope):
        return Polytope(-body.vertices())
    return body.affine(-np.eye(body.dim))


def polar_model_body(mbody: ModelBody) -> ModelBody:
    """
    Chart body of the antipode of the spherical polar K°.

    K° lies around -e_{n+1}; its antipodal image has chart -(K_bar)*, so the
    returned body is the reflected Euclidean polar of the chart image.
    """
    if mbody.chart.kind != "spherical":
        raise ValueError("polarity is defined for spherical bodies")
    return ModelBody(mbody.chart, _antipodal(euclidean_polar(mbody.body)), label=f"polar of {mbody.describe()}")


def spherical_mean_width(mbody: ModelBody) -> float:
    """U_1(K) = 1/2 - vol(K°) / vol(S^n)."""
    polar = polar_model_body(mbody)
    return 0.5 - model_measure(polar).value / sphere_area(mbody.dim)


def spherical_polygon_area(points) -> float:
    """
    Area of a convex spherical polygon on S^2 with vertices in cyclic order.

    Sums the solid angles of the fan triangles from the first vertex.
    """
    p = np.asarray(points, dtype=float)
    if len(p) < 3:
        return 0.0
    a = p[0]
    b, c = p[1:-1], p[2:]
    triple = np.abs(np.einsum("j,ij->i", a, np.cross(b, c)))
    denom = 1 + b @ a + np.sum(b * c, axis=1) + c @ a
    return float(np.sum(2 * np.arctan2(triple, denom)))


def spherical_perimeter(points) -> float:
    """Length of the closed geodesic polygon through the points in order."""
    p = np.asarray(points, dtype=float)
    q = np.roll(p, -1, axis=0)
    cross = np.linalg.norm(np.cross(p, q), axis=1)
    return float(np.sum(np.arctan2(cross, np.sum(p * q, axis=1))))


# ---------------------------------------------------------------------------
# Ambient Monte Carlo
# ---------------------------------------------------------------------------

def ambient_volume_mc(chart: GeometryChart, region, samples: int,
                      rng: np.random.Generator) -> Tuple[float, float]:
    """
    Intrinsic volume of a chart region by sampling the model surface.

    Spherical: uniform points on S^n. Hyperbolic (n=2): uniform points in a
    geodesic disk around e_3 that covers the region. Returns (estimate,
    standard error).
    """
    if chart.kind == "spherical":
        g = rng.normal(size=(samples, chart.dim + 1))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        upper = g[:, -1] > 0
        inside = np.zeros(samples, dtype=bool)
        inside[upper] = region.contains(g[upper, :-1] / g[upper, -1:])
        total = sphere_area(chart.dim)
    else:
        if chart.dim != 2:
            raise ValueError("ambient sampling of hyperbolic space is implemented for n=2")
        reach = min(_chart_reach(region.as_body() if isinstance(region, PolytopeApprox) else region),
                    HYPERBOLIC_MARGIN)
        radius = math.atanh(reach) * 1.01
        total = 2 * math.pi * (math.cosh(radius) - 1)
        rho = np.arccosh(1 + rng.random(samples) * (math.cosh(radius) - 1))
        theta = 2 * math.pi * rng.random(samples)
        x = np.column_stack([np.sinh(rho) * np.cos(theta), np.sinh(rho) * np.sin(theta), np.cosh(rho)])
        inside = region.contains(gnomonic(chart, x))
    p = float(np.mean(inside))
    return p * total, math.sqrt(p * (1 - p) / samples) * total
