"""
Hilbert geometries on the interior of a convex body C.

Distances come from cross ratios along chords, the Finsler norm from the
chord lengths t+ and t-, and the volume densities from the Finsler unit
ball I_x: Busemann v_n / vol(I_x) and Holmes-Thompson vol(I_x*) / v_n. In
the plane both are read off the norm on a circle of directions, whose
reciprocal is the radial function of I_x and which is itself the support
function of I_x*.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from floatlab.bodies import ConvexBody, Measured, SmoothBody, WeightFn, boundary_integral, measure
from floatlab.numerics import circle_directions, extrapolate_limit
from floatlab.report import ExperimentReport, ReportRow

logger = logging.getLogger(__name__)

FLAVORS = ("busemann", "holmes-thompson")
DENSITY_RTOL = 1e-10
MAX_DENSITY_NODES = 16384


def normalize_flavor(flavor: str) -> str:
    name = flavor.strip().lower().replace("_", "-")
    if name not in FLAVORS:
        raise ValueError(f"Unknown volume flavor {flavor!r}; expected one of {', '.join(FLAVORS)}")
    return name


# ---------------------------------------------------------------------------
# Chords, distance and norm
# ---------------------------------------------------------------------------

def chord(C: ConvexBody, x, v) -> Tuple[np.ndarray, np.ndarray]:
    """
    Chord parameters t+ and t- with x + t+ v and x - t- v on the boundary of C.

    Raises:
        ValueError: If x is not interior to C or v vanishes
    """
    lo, hi = C.line_range(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
    with np.errstate(invalid="ignore"):
        ok = (hi > 0) & (lo < 0) & np.isfinite(hi) & np.isfinite(lo)
    if not np.all(ok):
        raise ValueError("chord needs an interior point and a nonzero direction")
    return hi, -lo


def hilbert_distance(C: ConvexBody, x, y) -> np.ndarray:
    """
    d_C(x, y) = 1/2 log [p, x, y, q] for the chord p, x, y, q.

    Vectorized over leading axes; 0 where x == y.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    v = y - x
    same = np.linalg.norm(v, axis=-1) == 0
    e1 = np.zeros(x.shape[-1])
    e1[0] = 1.0
    v = np.where(same[..., None], e1, v)
    t_plus, t_minus = chord(C, x, v)
    # y = x + v, so |py|/|px| = (t- + 1)/t- and |xq|/|yq| = t+/(t+ - 1)
    d = 0.5 * (np.log1p(1.0 / t_minus) - np.log1p(-1.0 / t_plus))
    return np.where(same, 0.0, d)


def finsler_norm(C: ConvexBody, x, v) -> np.ndarray:
    """||v||_x = (1/t+ + 1/t-) / 2; zero for v = 0."""
    x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
    zero = np.linalg.norm(v, axis=-1) == 0
    e1 = np.zeros(v.shape[-1])
    e1[0] = 1.0
    t_plus, t_minus = chord(C, x, np.where(zero[..., None], e1, v))
    return np.where(zero, 0.0, 0.5 * (1.0 / t_plus + 1.0 / t_minus))


# ---------------------------------------------------------------------------
# Finsler unit balls
# ---------------------------------------------------------------------------

def _polar_support(h: Callable[[np.ndarray], np.ndarray], u: np.ndarray, count: int = 2048) -> float:
    """max over unit w of (u.w) / h(w): the support of the polar of the body with support h."""
    dirs = circle_directions(count)
    values = (dirs @ u) / h(dirs)
    k = int(np.argmax(values))
    step = 2 * math.pi / count
    theta0 = k * step

    def negative(theta: float) -> float:
        w = np.array([math.cos(theta), math.sin(theta)])
        return -float(w @ u) / float(h(w))

    res = minimize_scalar(negative, bounds=(theta0 - step, theta0 + step), method="bounded",
                          options={"xatol": 1e-13})
    return max(float(values[k]), -float(res.fun))


class FinslerBall(SmoothBody):
    """
    Unit ball I_x of the Finsler norm of a planar Hilbert geometry at x.

    The boundary is built radially: in direction v it sits at distance
    1 / ||v||_x. ``support_via_polars`` rebuilds the support function through
    (D (C - x)*)* instead.
    """

    def __init__(self, C: ConvexBody, x):
        if C.dim != 2:
            raise ValueError("Finsler balls are implemented in the plane")
        self.C = C
        self.base_point = np.asarray(x, dtype=float)
        finsler_norm(C, self.base_point, np.array([1.0, 0.0]))
        super().__init__(self._radius, kind="finsler-ball", label=f"I_x at {self.base_point.tolist()}")

    def _radius(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        u = np.stack([np.cos(s), np.sin(s)], axis=-1)
        return 1.0 / finsler_norm(self.C, self.base_point, u)

    def norm(self, v) -> np.ndarray:
        return finsler_norm(self.C, self.base_point, v)

    def support_via_polars(self, u) -> np.ndarray:
        """Support of I_x from support functions only: polar of C - x, difference body, polar."""
        x = self.base_point

        def shifted(w):
            w = np.asarray(w, dtype=float)
            return self.C.support(w) - w @ x

        def difference(w):
            w = np.asarray(w, dtype=float)
            flat = w.reshape(-1, 2)
            values = [0.5 * (_polar_support(shifted, wi) + _polar_support(shifted, -wi)) for wi in flat]
            return np.array(values).reshape(w.shape[:-1])

        u = np.asarray(u, dtype=float)
        flat = u.reshape(-1, 2)
        # coarse difference-body support on the grid, then exact values near the maximizer
        grid = circle_directions(512)
        polar_grid = (grid @ (grid / shifted(grid)[:, None]).T).max(axis=1)
        coarse_h = 0.5 * (polar_grid + np.roll(polar_grid, -256))
        out = np.empty(len(flat))
        step = 2 * math.pi / 512
        for i, ui in enumerate(flat):
            k = int(np.argmax((grid @ ui) / coarse_h))

            def negative(theta: float, ui=ui) -> float:
                w = np.array([math.cos(theta), math.sin(theta)])
                return -float(w @ ui) / float(difference(w))

            res = minimize_scalar(negative, bounds=(k * step - step, k * step + step), method="bounded",
                                  options={"xatol": 1e-12})
            out[i] = -float(res.fun)
        return out.reshape(u.shape[:-1])


def finsler_unit_ball(C: ConvexBody, x) -> FinslerBall:
    return FinslerBall(C, x)


# ---------------------------------------------------------------------------
# Geometry and densities
# ---------------------------------------------------------------------------

@dataclass
class HilbertGeometry:
    """
    Hilbert geometry on int C with a volume flavor.

    Raises:
        ValueError: If the origin is not interior to C
    """
    C: ConvexBody
    flavor: str = "busemann"

    def __post_init__(self):
        self.flavor = normalize_flavor(self.flavor)
        if not bool(self.C.contains(np.zeros(self.C.dim), tol=-1e-9)):
            raise ValueError("the origin must be interior to the ambient body")

    @property
    def dim(self) -> int:
        return self.C.dim

    def density(self, x) -> np.ndarray:
        return volume_density(self, x)

    def weight(self) -> WeightFn:
        """sigma_C as a weight for the Euclidean engines."""
        return WeightFn(func=lambda x, g=self: volume_density(g, x), name=f"sigma[{self.flavor}]")

    def volume(self, K: ConvexBody) -> float:
        return measure(K, self.weight(), rtol=1e-8).value


def _density_at(geom: HilbertGeometry, x: np.ndarray, count: int) -> np.ndarray:
    dirs = circle_directions(count)
    h = finsler_norm(geom.C, x[..., None, :], dirs)
    if geom.flavor == "busemann":
        # area(I_x) = pi * mean(h^-2)
        return 1.0 / np.mean(h ** -2.0, axis=-1)
    # area of the body with support h = pi c0^2 + 2 pi sum (1 - k^2) |c_k|^2
    coeffs = np.fft.rfft(h, axis=-1) / count
    k = np.arange(coeffs.shape[-1])
    weights = np.where(k == 0, 0.5, 1.0 - k * k)
    if count % 2 == 0:
        # the Nyquist coefficient carries the whole cosine amplitude
        weights[-1] *= 0.25
    area = 2 * math.pi * np.sum(weights * np.abs(coeffs) ** 2, axis=-1)
    return area / math.pi


def volume_density(geom: HilbertGeometry, x, rtol: float = DENSITY_RTOL) -> np.ndarray:
    """
    Busemann or Holmes-Thompson density sigma_C(x) in the plane.

    The direction count doubles from 256 until the density changes by less
    than ``rtol``; a warning is logged when the budget runs out.
    """
    if geom.dim != 2:
        raise ValueError("volume densities are implemented in the plane")
    x = np.asarray(x, dtype=float)
    count = 256
    current = _density_at(geom, x, count)
    while count < MAX_DENSITY_NODES:
        count *= 2
        refined = _density_at(geom, x, count)
        change = np.max(np.abs(refined - current) / np.abs(refined)) if refined.size else 0.0
        current = refined
        if change <= rtol:
            return current
    logger.warning("density quadrature did not reach rtol=%g with %d directions", rtol, count)
    return current


# ---------------------------------------------------------------------------
# Floating areas
# ---------------------------------------------------------------------------

def _inside_with_margin(geom: HilbertGeometry, K: ConvexBody) -> bool:
    s = np.linspace(0.0, 2 * math.pi, 256, endpoint=False)
    pts = K.boundary(s, strict=False).point
    return bool(np.all(geom.C.gauge(pts) < 1 - 1e-9))


def _hilbert_floating_area(geom: HilbertGeometry, K: ConvexBody) -> Measured:
    if not _inside_with_margin(geom, K):
        raise ValueError("K must lie in the interior of C")
    n = geom.dim

    def f(bp):
        sigma = volume_density(geom, bp.point)
        return np.maximum(bp.curvature, 0.0) ** (1 / (n + 1)) * sigma ** ((n - 1) / (n + 1))

    return boundary_integral(K, f, rtol=1e-8)


def hilbert_floating_area(geom: HilbertGeometry, K: ConvexBody) -> float:
    """Omega_C(K): boundary integral of H^{1/(n+1)} sigma_C^{(n-1)/(n+1)}."""
    return _hilbert_floating_area(geom, K).value


def centroaffine_surface_area(C: ConvexBody) -> float:
    """Boundary integral of H^{1/2} / (x.n)^{(n-1)/2}."""
    n = C.dim

    def f(bp):
        support = np.sum(bp.point * bp.normal, axis=-1)
        if np.any(support <= 0):
            raise ValueError("the origin must be interior to C")
        return np.maximum(bp.curvature, 0.0) ** 0.5 * support ** (-(n - 1) / 2)

    return boundary_integral(C, f).value


def density_blowup(geom: HilbertGeometry, s: float, lambdas: Sequence[float]) -> Tuple[np.ndarray, float]:
    """
    sigma_C(lam x) (1 - lam)^{(n+1)/2} along the ray to the boundary point x(s),
    with its limit H^{1/2} / (2 x.n)^{(n+1)/2}.
    """
    n = geom.dim
    bp = geom.C.boundary(np.asarray(s, dtype=float), strict=True)
    lambdas = np.asarray(lambdas, dtype=float)
    points = lambdas[:, None] * bp.point[None, :]
    scaled = volume_density(geom, points) * (1 - lambdas) ** ((n + 1) / 2)
    support = float(bp.point @ bp.normal)
    limit = float(bp.curvature) ** 0.5 / (2 * support) ** ((n + 1) / 2)
    return scaled, limit


def omegacp_limit(C: ConvexBody, lambdas: Sequence[float], flavor: str = "busemann", terms: int = 2,
                  experiment: str = "omegacp") -> ExperimentReport:
    """
    2^{(n-1)/2} Omega_C(lam C) (1 - lam)^{(n-1)/2} as lam increases to 1.

    The limit is the intercept of a fit in powers of (1 - lam)^{1/2} and is
    compared with the centro-affine surface area of C.
    """
    geom = HilbertGeometry(C, flavor)
    n = geom.dim
    lambdas = sorted(float(lam) for lam in lambdas)
    if any(not 0 < lam < 1 for lam in lambdas):
        raise ValueError("lambda values must lie in (0, 1)")
    predicted = centroaffine_surface_area(C)
    rows: List[ReportRow] = []
    for lam in lambdas:
        area = _hilbert_floating_area(geom, C.scaled(lam))
        factor = 2 ** ((n - 1) / 2) * (1 - lam) ** ((n - 1) / 2)
        logger.info("lambda=%g: Omega_C=%.8g normalized=%.8g", lam, area.value, factor * area.value)
        rows.append(ReportRow(param=lam, estimate=area.value, stderr=area.error, normalized=factor * area.value,
                              predicted=predicted))
    limit: Optional[float] = None
    if rows:
        limit, _ = extrapolate_limit(np.array([1 - lam for lam in lambdas]), np.array([r.normalized for r in rows]),
                                     rate=0.5, terms=terms)
    report = ExperimentReport(experiment=experiment, rows=rows, limit=limit, predicted=predicted, seed=0,
                              param_name="lambda", limit_param=1.0, exponent=None)
    report.metadata["flavor"] = geom.flavor
    return report
