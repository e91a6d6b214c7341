"""
Numerical kernels shared by the geometry modules.

Adaptive Gauss-Legendre quadrature on intervals, tensor (collapsed
coordinate) rules on triangles and tetrahedra, direction grids, the
dimension constants of the limit theorems and the least-squares
extrapolation used by every convergence study.
"""

import logging
import math
from functools import lru_cache
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.integrate import fixed_quad
from scipy.special import gamma

from floatlab.errors import ToleranceNotMet

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

def ball_volume(n: int) -> float:
    """Volume v_n of the n-dimensional Euclidean unit ball."""
    return math.pi ** (n / 2) / gamma(n / 2 + 1)


def sphere_area(n: int) -> float:
    """n-dimensional volume of the unit sphere S^n in R^{n+1}."""
    return 2 * math.pi ** ((n + 1) / 2) / gamma((n + 1) / 2)


def alpha_n(n: int) -> float:
    """Leading constant of the floating body volume deficit."""
    return 0.5 * ((n + 1) / ball_volume(n - 1)) ** (2 / (n + 1))


def beta_n(n: int) -> float:
    """Leading constant of the random polytope volume deficit."""
    lead = (n * n + n + 2) * (n * n + 1) / (2 * (n + 3) * math.factorial(n + 1))
    return lead * gamma((n * n + 1) / (n + 1)) * ((n + 1) / ball_volume(n - 1)) ** (2 / (n + 1))


# ---------------------------------------------------------------------------
# Direction grids
# ---------------------------------------------------------------------------

def circle_directions(count: int, offset: float = 0.0) -> np.ndarray:
    """Uniform angles 2*pi*k/count; doubling the count keeps every old direction."""
    theta = offset + 2 * np.pi * np.arange(count) / count
    return np.column_stack([np.cos(theta), np.sin(theta)])


def fibonacci_sphere(count: int) -> np.ndarray:
    """Quasi-uniform unit vectors on S^2 (golden-angle spiral)."""
    k = np.arange(count) + 0.5
    z = 1 - 2 * k / count
    r = np.sqrt(np.maximum(0.0, 1 - z * z))
    phi = np.pi * (1 + 5 ** 0.5) * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def direction_grid(dim: int, count: int) -> np.ndarray:
    if dim == 2:
        return circle_directions(count)
    if dim == 3:
        return fibonacci_sphere(count)
    raise ValueError(f"Unsupported dimension: {dim}")


def symmetrize(directions: np.ndarray) -> np.ndarray:
    """Add the antipode of every direction not already present."""
    both = np.vstack([directions, -directions])
    # + 0.0 folds -0.0 into 0.0 before the row comparison
    _, idx = np.unique(np.round(both, 12) + 0.0, axis=0, return_index=True)
    return both[np.sort(idx)]


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-8,
    atol: float = 0.0,
    order: int = 10,
    max_intervals: int = 4000,
) -> Tuple[float, float]:
    """
    Adaptive Gauss-Legendre quadrature of a vectorized integrand.

    Each subinterval is integrated with ``order`` and ``2*order`` nodes; the
    difference is the local error estimate. Intervals whose error exceeds
    their share of the global tolerance are bisected.

    Args:
        f: Integrand accepting a 1D array of abscissae
        a: Lower limit
        b: Upper limit
        rtol: Relative tolerance on the total
        atol: Absolute tolerance on the total
        order: Base number of Gauss nodes per subinterval
        max_intervals: Refinement budget

    Returns:
        (value, error estimate)

    Raises:
        ToleranceNotMet: If the budget is exhausted
    """
    if b == a:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0

    def panel(lo: float, hi: float) -> Tuple[float, float]:
        coarse, _ = fixed_quad(f, lo, hi, n=order)
        fine, _ = fixed_quad(f, lo, hi, n=2 * order)
        return float(fine), abs(float(fine) - float(coarse))

    whole, whole_err = panel(a, b)
    scale = max(atol, rtol * abs(whole))
    if whole_err <= scale:
        return sign * whole, whole_err

    total = 0.0
    total_err = 0.0
    pending: List[Tuple[float, float, float, float]] = [(a, b, whole, whole_err)]
    used = 1
    while pending:
        lo, hi, value, err = pending.pop()
        share = max(atol, rtol * abs(whole)) * (hi - lo) / (b - a)
        if err <= share or hi - lo < 1e-15 * (b - a):
            total += value
            total_err += err
            continue
        used += 1
        if used > max_intervals:
            raise ToleranceNotMet(
                f"adaptive quadrature on [{a}, {b}] exceeded {max_intervals} intervals",
                estimate=sign * (total + value),
                error=total_err + err,
            )
        mid = 0.5 * (lo + hi)
        left = panel(lo, mid)
        right = panel(mid, hi)
        pending.append((lo, mid, *left))
        pending.append((mid, hi, *right))
    return sign * total, total_err


def integrate_breaks(
    f: Callable[[np.ndarray], np.ndarray],
    breaks: np.ndarray,
    rtol: float = 1e-8,
    atol: float = 0.0,
    order: int = 10,
) -> Tuple[float, float]:
    """Integrate piecewise over sorted breakpoints (kinks of the integrand)."""
    total, total_err = 0.0, 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        value, err = integrate(f, lo, hi, rtol=rtol, atol=atol, order=order)
        total += value
        total_err += err
    return total, total_err


@lru_cache(maxsize=64)
def _unit_gauss(order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1), 0.5 * w


def gauss_nodes(lo, hi, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre nodes and weights on many intervals at once.

    ``lo`` and ``hi`` broadcast against each other; the result has a trailing
    axis of length ``order``.
    """
    x, w = _unit_gauss(order)
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    return lo + (hi - lo) * x, (hi - lo) * w


def simplex_rule(simplices: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Collapsed-coordinate tensor rule on triangles or tetrahedra.

    Args:
        simplices: Array (k, n+1, n) of simplex vertices, n in {2, 3}
        order: Gauss points per collapsed coordinate

    Returns:
        nodes (k, order**n, n) and weights (k, order**n)
    """
    simplices = np.asarray(simplices, dtype=float)
    k, corners, n = simplices.shape
    x, w = _unit_gauss(order)
    if n == 2:
        a, b, c = simplices[:, 0], simplices[:, 1], simplices[:, 2]
        xi, eta = np.meshgrid(x, x, indexing="ij")
        wxi, weta = np.meshgrid(w, w, indexing="ij")
        xi, eta = xi.ravel(), eta.ravel()
        e1, e2 = b - a, c - b
        nodes = a[:, None, :] + xi[None, :, None] * (e1[:, None, :] + eta[None, :, None] * e2[:, None, :])
        det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        weights = det[:, None] * (wxi.ravel() * weta.ravel() * xi)[None, :]
        return nodes, weights
    if n == 3:
        a, b, c, d = (simplices[:, i] for i in range(4))
        xi, eta, zeta = (g.ravel() for g in np.meshgrid(x, x, x, indexing="ij"))
        wxi, weta, wzeta = (g.ravel() for g in np.meshgrid(w, w, w, indexing="ij"))
        e1, e2, e3 = b - a, c - b, d - c
        inner = e2[:, None, :] + zeta[None, :, None] * e3[:, None, :]
        nodes = a[:, None, :] + xi[None, :, None] * (e1[:, None, :] + eta[None, :, None] * inner)
        det = np.abs(np.linalg.det(np.stack([e1, e2, e3], axis=1)))
        weights = det[:, None] * (wxi * weta * wzeta * xi * xi * eta)[None, :]
        return nodes, weights
    raise ValueError(f"Unsupported simplex dimension: {n}")


def integrate_simplices(
    f: Callable[[np.ndarray], np.ndarray],
    simplices: np.ndarray,
    order: int = 8,
) -> Tuple[float, float]:
    """Integrate over a union of simplices; error from comparing two orders."""
    if len(simplices) == 0:
        return 0.0, 0.0
    nodes, weights = simplex_rule(simplices, order)
    fine = float(np.sum(weights * f(nodes)))
    nodes, weights = simplex_rule(simplices, max(2, order - 3))
    coarse = float(np.sum(weights * f(nodes)))
    return fine, abs(fine - coarse)


# ---------------------------------------------------------------------------
# Extrapolation
# ---------------------------------------------------------------------------

def extrapolate_limit(
    params: np.ndarray,
    values: np.ndarray,
    rate: float,
    terms: int = 1,
    weights: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """
    Least-squares fit values ~ a + sum_j b_j * params**(j * rate).

    The intercept ``a`` is the extrapolated limit at params -> 0.

    Args:
        params: Grid (delta, 1/m, 1 - lambda, ...) that tends to zero
        values: Normalized quantity at each grid point
        rate: Exponent of the first correction term
        terms: Number of correction terms
        weights: Optional per-point weights (e.g. 1/stderr)

    Returns:
        (limit, correction coefficients)
    """
    params = np.asarray(params, dtype=float)
    values = np.asarray(values, dtype=float)
    terms = min(terms, len(params) - 1)
    if terms < 1:
        return float(values[-1]) if len(values) else float("nan"), np.zeros(0)
    design = np.column_stack([np.ones_like(params)] + [params ** (j * rate) for j in range(1, terms + 1)])
    rhs = values
    if weights is not None:
        design = design * weights[:, None]
        rhs = values * weights
    coef, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    return float(coef[0]), coef[1:]
