"""
Experiment orchestration and planar best approximation.

``run`` turns an ExperimentConfig into an ExperimentReport by dispatching to
the geometry modules, then writes the CSV/SVG/msgpack artifacts. The second
half of the module computes near-optimal inscribed and circumscribed
m-gons by dynamic programming over a curvature-adapted boundary
discretization, used for the best-approximation exponent study.
"""

import logging
import math
import os
import time
import traceback
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from floatlab.bodies import ConvexBody, WeightFn, affine_surface_area, convex_hull, measure, parse_body
from floatlab.config import ExperimentConfig, parse_weight
from floatlab.errors import BudgetTooSmall, ConfigError, ExperimentError, FloatlabError
from floatlab.floating import _radial_integral, check_floating_limit
from floatlab.hilbert import HilbertGeometry, hilbert_floating_area, omegacp_limit
from floatlab.numerics import alpha_n, beta_n, gauss_nodes
from floatlab.report import ExperimentReport, ReportRow, dump_report, emit_csv, emit_svg
from floatlab.spaces import model_floating_body_limit, model_random_limit, parse_model_body
from floatlab.stochastic import check_dual_limit, check_efron, check_random_limit, check_spherical_duality

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi

NODES_PER_VERTEX = 64
DP_STARTS = 4
EDGE_ORDER = 12


# ---------------------------------------------------------------------------
# Best approximation
# ---------------------------------------------------------------------------

@dataclass
class PolygonApproximation:
    """
    Near-optimal m-gon for the weighted symmetric difference.

    ``vertices`` are in counterclockwise order; ``node_indices`` are the
    boundary nodes the polygon touches (its vertices when inscribed, its
    tangency points when circumscribed).
    """
    vertices: np.ndarray
    dist: float
    mode: str
    nodes: int
    node_indices: np.ndarray

    @property
    def m(self) -> int:
        return len(self.vertices)


@dataclass
class BoundaryNodes:
    theta: np.ndarray       # unwrapped polar angles about center, increasing
    points: np.ndarray
    normals: np.ndarray
    normal_angle: np.ndarray
    center: np.ndarray


def _polar_curve(body: ConvexBody, theta: np.ndarray, center: np.ndarray) -> np.ndarray:
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return center + body.radial(u, center)[..., None] * u


def boundary_nodes(body: ConvexBody, count: int, psi: Optional[WeightFn] = None) -> BoundaryNodes:
    """
    ``count`` boundary points equidistributed in kappa^{1/3} psi^{1/3} ds.

    The curve is followed by its polar angle about the interior point;
    curvature and normals come from central differences, which is all the
    node placement needs.
    """
    if body.dim != 2:
        raise ValueError("best approximation is implemented in the plane")
    z = np.asarray(body.interior_point, dtype=float)
    dense = max(4096, 4 * count) if psi is None or psi.constant is not None else 4096
    theta = np.linspace(0.0, TWO_PI, dense, endpoint=False)
    h = 1e-4
    p0 = _polar_curve(body, theta, z)
    p_plus = _polar_curve(body, theta + h, z)
    p_minus = _polar_curve(body, theta - h, z)
    d1 = (p_plus - p_minus) / (2 * h)
    d2 = (p_plus - 2 * p0 + p_minus) / (h * h)
    speed = np.linalg.norm(d1, axis=1)
    kappa = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed ** 3
    # flat stretches still get nodes
    kappa = kappa + 1e-3 * np.mean(kappa)
    density = kappa ** (1 / 3) * speed
    if psi is not None and psi.constant is None:
        density = density * psi(p0) ** (1 / 3)
    step = TWO_PI / dense
    closed = np.append(density, density[0])
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * (closed[1:] + closed[:-1]) * step)])
    targets = cumulative[-1] * np.arange(count) / count
    node_theta = np.interp(targets, cumulative, np.append(theta, TWO_PI))

    points = _polar_curve(body, node_theta, z)
    tangent = (_polar_curve(body, node_theta + h, z) - _polar_curve(body, node_theta - h, z)) / (2 * h)
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    normals = np.column_stack([tangent[:, 1], -tangent[:, 0]])
    normal_angle = np.unwrap(np.arctan2(normals[:, 1], normals[:, 0]))
    return BoundaryNodes(node_theta, points, normals, normal_angle, z)


def _cap_cost(body: ConvexBody, psi: WeightFn, z: np.ndarray, lo: np.ndarray, hi: np.ndarray,
              outer: Callable[[np.ndarray], np.ndarray], inner: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    theta, w = gauss_nodes(lo, hi, EDGE_ORDER)
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    r0, r1 = inner(u), outer(u)
    return np.sum(w * _radial_integral(psi, z, u, r0, r1, 2), axis=-1)


def _inscribed_costs(body: ConvexBody, nodes: BoundaryNodes, psi: WeightFn, width: int) -> np.ndarray:
    """cost[i, g-1] = psi-measure cut off K by the chord from node i to node i+g."""
    count = len(nodes.theta)
    z = nodes.center
    cost = np.full((count, width), np.inf)
    idx = np.arange(count)
    for g in range(1, width + 1):
        j = (idx + g) % count
        span = nodes.theta[j] + TWO_PI * ((idx + g) // count) - nodes.theta
        ok = span < math.pi - 1e-9
        if not np.any(ok):
            break
        i_ok, j_ok = idx[ok], j[ok]
        edge = nodes.points[j_ok] - nodes.points[i_ok]
        nu = np.column_stack([edge[:, 1], -edge[:, 0]])
        d = np.sum((nodes.points[i_ok] - z) * nu, axis=1)

        def chord(u, nu=nu, d=d):
            return d[:, None] / np.sum(u * nu[:, None, :], axis=-1)

        cost[i_ok, g - 1] = _cap_cost(body, psi, z, nodes.theta[i_ok], nodes.theta[i_ok] + span[ok],
                                      outer=lambda u: body.radial(u, z), inner=chord)
    return np.maximum(cost, 0.0)


def _circumscribed_costs(body: ConvexBody, nodes: BoundaryNodes, psi: WeightFn,
                         width: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    cost[i, g-1] = psi-measure of the corner between the tangents at nodes
    i and i+g, outside K. Also returns the corner points.
    """
    count = len(nodes.theta)
    z = nodes.center
    cost = np.full((count, width), np.inf)
    corners = np.full((count, width, 2), np.nan)
    idx = np.arange(count)
    for g in range(1, width + 1):
        j = (idx + g) % count
        wraps = (idx + g) // count
        turn = nodes.normal_angle[j] - nodes.normal_angle + wraps * TWO_PI
        ok = (turn > 1e-12) & (turn < math.pi - 1e-9)
        if not np.any(ok):
            break
        i_ok, j_ok = idx[ok], j[ok]
        n_i, n_j = nodes.normals[i_ok], nodes.normals[j_ok]
        h_i = np.sum(n_i * nodes.points[i_ok], axis=1)
        h_j = np.sum(n_j * nodes.points[j_ok], axis=1)
        det = n_i[:, 0] * n_j[:, 1] - n_j[:, 0] * n_i[:, 1]
        corner = np.column_stack([(h_i * n_j[:, 1] - h_j * n_i[:, 1]) / det,
                                  (n_i[:, 0] * h_j - n_j[:, 0] * h_i) / det])
        theta_i = nodes.theta[i_ok]
        theta_j = nodes.theta[j_ok] + TWO_PI * wraps[ok]
        rel = corner - z
        theta_c = theta_i + np.mod(np.arctan2(rel[:, 1], rel[:, 0]) - theta_i, TWO_PI)
        theta_c = np.clip(theta_c, theta_i, theta_j)

        def tangent_line(n, h):
            reach = h - n @ z

            def outer(u):
                return reach[:, None] / np.sum(u * n[:, None, :], axis=-1)

            return outer

        def radial(u):
            return body.radial(u, z)

        first = _cap_cost(body, psi, z, theta_i, theta_c, outer=tangent_line(n_i, h_i), inner=radial)
        second = _cap_cost(body, psi, z, theta_c, theta_j, outer=tangent_line(n_j, h_j), inner=radial)
        cost[i_ok, g - 1] = first + second
        corners[i_ok, g - 1] = corner
    return np.maximum(cost, 0.0), corners


def _cyclic_path(cost: np.ndarray, m: int, start: int) -> Tuple[float, np.ndarray]:
    """
    Cheapest closed chain of m edges through node ``start``.

    Returns the cost and the chosen nodes in increasing cyclic order from
    ``start``.
    """
    count, width = cost.shape
    rolled = np.roll(cost, -start, axis=0)
    positions = np.arange(count + 1)
    gaps = np.arange(1, width + 1)
    previous = positions[:, None] - gaps[None, :]
    valid = previous >= 0
    previous = np.where(valid, previous, 0)
    edge = np.where(valid, rolled[np.minimum(previous, count - 1), gaps - 1], np.inf)
    best = np.full(count + 1, np.inf)
    best[0] = 0.0
    choices = np.empty((m, count + 1), dtype=np.int32)
    for k in range(m):
        total = best[previous] + edge
        choice = np.argmin(total, axis=1)
        best = total[positions, choice]
        choices[k] = choice
    if not np.isfinite(best[count]):
        return math.inf, np.zeros(0, dtype=int)
    path = []
    p = count
    for k in range(m - 1, -1, -1):
        p -= int(gaps[choices[k, p]])
        path.append(p)
    return float(best[count]), (np.array(path[::-1]) + start) % count


def best_polygon_area(K: ConvexBody, m: int, psi: Optional[WeightFn] = None, mode: str = "inscribed",
                      nodes_per_vertex: int = NODES_PER_VERTEX, starts: int = DP_STARTS) -> PolygonApproximation:
    """
    Near-optimal m-gon minimizing the psi-measure of K symmetric-difference P.

    Inscribed polygons have their vertices on B = nodes_per_vertex * m
    boundary nodes and each edge costs the cap it cuts off; circumscribed
    polygons are bounded by tangent lines at the nodes and each pair of
    consecutive tangents costs the corner it adds. A cyclic dynamic program
    finds the cheapest chain of m edges for a few start nodes within the
    first block of B/m nodes.

    Raises:
        BudgetTooSmall: If m < 3
        ValueError: Non-planar body, unknown mode, or a circumscribed
            polygon for a body with corners
    """
    if m < 3:
        raise BudgetTooSmall(f"need at least 3 vertices, got {m}")
    if mode not in ("inscribed", "circumscribed"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "circumscribed" and not K.smooth:
        raise ValueError("circumscribed approximation needs a smooth body")
    psi = psi or WeightFn.one()
    count = nodes_per_vertex * m
    width = min(count - 1, int(math.ceil(2 * count / m)))
    nodes = boundary_nodes(K, count, psi)
    if mode == "inscribed":
        cost = _inscribed_costs(K, nodes, psi, width)
        corners = None
    else:
        cost, corners = _circumscribed_costs(K, nodes, psi, width)

    block = int(math.ceil(1.25 * count / m))
    candidates = np.unique(np.linspace(0, block, max(1, starts), endpoint=False).astype(int))
    best_dist, best_path = math.inf, np.zeros(0, dtype=int)
    for start in candidates:
        dist, path = _cyclic_path(cost, m, int(start))
        logger.debug("m=%d start=%d: dist=%.12g", m, start, dist)
        if dist < best_dist:
            best_dist, best_path = dist, path
    if not np.isfinite(best_dist):
        raise FloatlabError(f"no admissible {mode} {m}-gon on {count} boundary nodes")

    if mode == "inscribed":
        vertices = nodes.points[best_path]
    else:
        gaps = (np.roll(best_path, -1) - best_path) % count
        vertices = corners[best_path, gaps - 1]
    logger.info("%s %d-gon of %s: dist=%.10g (B=%d)", mode, m, K.describe(), best_dist, count)
    return PolygonApproximation(vertices, best_dist, mode, count, best_path)


def polygon_distance(K: ConvexBody, vertices, psi: Optional[WeightFn] = None, mode: str = "inscribed") -> float:
    """psi-measure of K \\ P (inscribed) or P \\ K (circumscribed) for the hull P of ``vertices``."""
    psi = psi or WeightFn.one()
    polygon = measure(convex_hull(np.asarray(vertices, dtype=float), 2), psi).value
    body = measure(K, psi).value
    return body - polygon if mode == "inscribed" else polygon - body


def approximation_functional(K: ConvexBody, psi: Optional[WeightFn] = None) -> float:
    """Boundary integral of kappa^{1/3} psi^{1/3}, the body-dependent factor of dist * m^2."""
    return affine_surface_area(K, psi, power=1 / 3, weight_power=1 / 3)


def best_approximation_study(K: ConvexBody, ms: Sequence[int], psi: Optional[WeightFn] = None,
                             mode: str = "inscribed", compare: Optional[ConvexBody] = None,
                             experiment: str = "bestapprox") -> ExperimentReport:
    """
    dist(K, m) * m^2 over a grid of vertex budgets.

    The fitted log-log slope goes to metadata["slope"]. With ``compare``
    each row also carries the ratio (dist_K / dist_compare) divided by the
    cube of the functional ratio, which tends to 1.
    """
    psi = psi or WeightFn.one()
    ms = sorted(int(m) for m in ms)
    functional_ratio = None
    if compare is not None:
        functional_ratio = approximation_functional(K, psi) / approximation_functional(compare, psi)
    rows: List[ReportRow] = []
    for m in ms:
        approx = best_polygon_area(K, m, psi, mode)
        extra = {"nodes": float(approx.nodes)}
        if compare is not None:
            other = best_polygon_area(compare, m, psi, mode)
            extra["compare_dist"] = other.dist
            extra["ratio"] = approx.dist / other.dist / functional_ratio ** 3
        rows.append(ReportRow(param=float(m), estimate=approx.dist, stderr=float("nan"),
                              normalized=approx.dist * m * m, extra=extra))
    report = ExperimentReport(experiment=f"{experiment}-{mode}", rows=rows, limit=None, predicted=None,
                              param_name="m", limit_param=float("inf"), exponent=-2.0)
    if len(rows) >= 2:
        slope, _ = np.polyfit(np.log(ms), np.log([r.estimate for r in rows]), 1)
        report.metadata["slope"] = float(slope)
        logger.info("log-log slope of dist in m: %.4f", slope)
    report.metadata["functional"] = approximation_functional(K, psi)
    if functional_ratio is not None:
        report.metadata["functional_ratio"] = functional_ratio
    return report


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _weights(config: ExperimentConfig, sigma: Optional[WeightFn] = None) -> Tuple[WeightFn, WeightFn]:
    return parse_weight(config.phi, hilbert_density=sigma), parse_weight(config.psi, hilbert_density=sigma)


def _floating(config: ExperimentConfig) -> ExperimentReport:
    phi, psi = _weights(config)
    return check_floating_limit(parse_body(config.body), phi, psi, config.grid, terms=config.terms_or(1),
                                workers=config.workers, rtol=config.rtol, max_directions=config.max_directions)


def _random(config: ExperimentConfig) -> ExperimentReport:
    phi, psi = _weights(config)
    return check_random_limit(parse_body(config.body), phi, psi, config.sample_sizes, replicates=config.replicates,
                              seed=config.seed, workers=config.workers, terms=config.terms_or(1))


def _efron(config: ExperimentConfig) -> ExperimentReport:
    phi, _ = _weights(config)
    return check_efron(parse_body(config.body), phi, config.sample_sizes, replicates=config.replicates,
                       seed=config.seed, workers=config.workers)


def _dual(config: ExperimentConfig) -> ExperimentReport:
    return check_dual_limit(parse_body(config.body), config.sample_sizes, replicates=config.replicates,
                            seed=config.seed, workers=config.workers)


def _model(config: ExperimentConfig) -> ExperimentReport:
    mbody = parse_model_body(config.body, config.kind)
    if config.quantity == "floating":
        return model_floating_body_limit(mbody, config.grid, workers=config.workers, terms=config.terms_or(1),
                                         rtol=config.rtol, max_directions=config.max_directions)
    if config.quantity == "random":
        return model_random_limit(mbody, config.sample_sizes, replicates=config.replicates, seed=config.seed,
                                  workers=config.workers, terms=config.terms_or(1))
    return check_spherical_duality(mbody, config.sample_sizes, replicates=config.replicates, seed=config.seed,
                                   workers=config.workers)


def _hilbert(config: ExperimentConfig) -> ExperimentReport:
    """
    Floating body or random polytope of K in the Hilbert geometry of the ambient domain.

    The weights default to phi = psi = sigma_C, where the limits are alpha_n
    and beta_n times Omega_C(K). Other weights are compared with the
    weighted Euclidean prediction.
    """
    geom = HilbertGeometry(parse_body(config.ambient), config.flavor)
    K = parse_body(config.body)
    sigma = geom.weight()
    phi, psi = _weights(config, sigma)
    intrinsic = phi is sigma and psi is sigma
    area = hilbert_floating_area(geom, K)
    n = K.dim
    if config.quantity == "floating":
        predicted = alpha_n(n) * area if intrinsic else None
        report = check_floating_limit(K, phi, psi, config.grid, predicted=predicted,
                                      terms=config.terms_or(1), workers=config.workers, experiment="hilbert-floating",
                                      rtol=config.rtol, max_directions=config.max_directions)
    else:
        predicted = beta_n(n) * geom.volume(K) ** (2 / (n + 1)) * area if intrinsic else None
        report = check_random_limit(K, phi, psi, config.sample_sizes, replicates=config.replicates,
                                    seed=config.seed, workers=config.workers, terms=config.terms_or(1),
                                    predicted=predicted, experiment="hilbert-random")
    report.metadata.update({"flavor": geom.flavor, "ambient": config.ambient, "hilbert_floating_area": area,
                            "phi": config.phi, "psi": config.psi})
    return report


def _omegacp(config: ExperimentConfig) -> ExperimentReport:
    report = omegacp_limit(parse_body(config.ambient), config.grid, flavor=config.flavor,
                           terms=config.terms_or(2))
    report.metadata["ambient"] = config.ambient
    return report


def _bestapprox(config: ExperimentConfig) -> ExperimentReport:
    sigma = None
    if config.psi.split()[0].lower() == "sigma":
        sigma = HilbertGeometry(parse_body(config.ambient), config.flavor).weight()
    psi = parse_weight(config.psi, hilbert_density=sigma)
    compare = parse_body(config.compare) if config.compare else None
    return best_approximation_study(parse_body(config.body), config.sample_sizes, psi, config.mode, compare)


EXPERIMENTS: Dict[str, Callable[[ExperimentConfig], ExperimentReport]] = {
    "floating": _floating,
    "random": _random,
    "efron": _efron,
    "dual": _dual,
    "spherical": _model,
    "hyperbolic": _model,
    "hilbert": _hilbert,
    "omegacp": _omegacp,
    "bestapprox": _bestapprox,
}


def _module_of(exc: BaseException) -> str:
    """Innermost floatlab module in the traceback of ``exc``."""
    package_dir = os.path.dirname(os.path.abspath(__file__))
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        if os.path.dirname(os.path.abspath(frame.filename)) == package_dir:
            return os.path.splitext(os.path.basename(frame.filename))[0]
    return "lab"


def _versions() -> Dict[str, str]:
    import scipy

    from floatlab import __version__

    return {"floatlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def write_outputs(report: ExperimentReport, config: ExperimentConfig) -> List[str]:
    """
    Write <out>.csv and/or <out>.svg per the config format, plus <out>.msgpack.

    Raises:
        OSError: If the output location is not writable
    """
    stem = config.output_stem()
    os.makedirs(os.path.dirname(os.path.abspath(stem)), exist_ok=True)
    written = []
    if config.format in ("csv", "both"):
        written.append(emit_csv(report, stem + ".csv"))
    if config.format in ("svg", "both"):
        written.append(emit_svg(report, stem + ".svg"))
    written.append(dump_report(report, stem + ".msgpack"))
    return written


def run(config: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """
    Run one experiment and (optionally) write its artifacts.

    Raises:
        ConfigError: If the config combination cannot be run
        ExperimentError: Wrapping any computation failure, tagged with the
            module it came from
    """
    handler = EXPERIMENTS[config.kind]
    logger.info("Running %s experiment on %s (seed=%d, replicates=%d, workers=%d)", config.kind, config.body,
                config.seed, config.replicates, config.workers)
    started = time.perf_counter()
    try:
        report = handler(config)
    except ConfigError:
        raise
    except (FloatlabError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        module = _module_of(exc)
        logger.error("%s experiment failed in %s: %s", config.kind, module, exc)
        raise ExperimentError(module, exc) from exc
    report.sort()
    report.seed = config.seed
    report.metadata.update({
        "kind": config.kind,
        "body": config.body,
        "seed": config.seed,
        "replicates": config.replicates,
        "wall_time": time.perf_counter() - started,
        "versions": _versions(),
    })
    logger.info(report.summary())
    if write:
        write_outputs(report, config)
    return report
