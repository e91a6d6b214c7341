"""
Convex bodies in dimension 2 and 3.

A ConvexBody exposes a support function, a gauge (Minkowski functional about
its interior point), line clipping, and a boundary parametrization that
returns point, outer normal, Gauss-Kronecker curvature and the surface
element. Built-in bodies (balls, affine images of balls, polytopes) answer
these in closed form; custom smooth bodies are described by a radial
function and get their curvature from a local quadratic fit.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog, minimize_scalar
from scipy.spatial import ConvexHull, QhullError, cKDTree

from floatlab.errors import CurvatureUnavailable, EmptyIntersection, ToleranceNotMet, Unbounded
from floatlab.numerics import (
    ball_volume,
    circle_directions,
    fibonacci_sphere,
    gauss_nodes,
    integrate,
    integrate_breaks,
    integrate_simplices,
)

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi

# Relative tolerance used by orientation and incidence tests on normalized coordinates.
GEOM_TOL = 1e-12
INV_GOLDEN = (math.sqrt(5) - 1) / 2


class BoundaryPoint(NamedTuple):
    """Boundary sample: point, outer unit normal, curvature H_{n-1}, surface element."""
    point: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray
    speed: np.ndarray


class Measured(NamedTuple):
    """Quadrature result with its error estimate."""
    value: float
    error: float


@dataclass(frozen=True)
class WeightFn:
    """
    Positive continuous density evaluated pointwise.

    ``func`` must be vectorized over the last axis: an array of shape
    (..., n) maps to shape (...).
    """
    func: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    constant: Optional[float] = None
    bounds: Optional[Tuple[float, float]] = None

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.constant is not None:
            return np.full(x.shape[:-1], self.constant)
        return np.asarray(self.func(x), dtype=float)

    @classmethod
    def one(cls) -> "WeightFn":
        return cls.const(1.0, name="one")

    @classmethod
    def const(cls, c: float, name: Optional[str] = None) -> "WeightFn":
        if c <= 0:
            raise ValueError(f"Weight must be positive, got {c}")
        return cls(func=lambda x, c=c: np.full(np.shape(x)[:-1], c), name=name or f"const({c:g})",
                   constant=float(c), bounds=(float(c), float(c)))

    @classmethod
    def bump(cls) -> "WeightFn":
        """(1 + |x|^2)^{-3/2}, the spherical chart density in the plane."""
        return cls(func=lambda x: (1 + np.sum(x * x, axis=-1)) ** -1.5, name="bump")

    @classmethod
    def klein(cls) -> "WeightFn":
        """(1 - |x|^2)^{-3/2}, the hyperbolic area density of the Klein disk."""
        return cls(func=lambda x: (1 - np.sum(x * x, axis=-1)) ** -1.5, name="klein")

    def scaled(self, c: float) -> "WeightFn":
        if self.constant is not None:
            return WeightFn.const(self.constant * c)
        return WeightFn(func=lambda x, f=self.func, c=c: c * f(x), name=f"{c:g}*{self.name}")

    def power(self, p: float) -> "WeightFn":
        if self.constant is not None:
            return WeightFn.const(self.constant ** p)
        return WeightFn(func=lambda x, f=self.func, p=p: f(x) ** p, name=f"{self.name}^{p:g}")


# ---------------------------------------------------------------------------
# Bodies
# ---------------------------------------------------------------------------

class ConvexBody:
    """
    Base class for convex bodies with a support-function oracle.

    Subclasses implement ``support``, ``gauge`` and ``boundary``; line
    clipping, membership and the radial function fall back to generic
    root-finding on the gauge.
    """

    kind: str = "convex"
    dim: int = 2
    interior_point: np.ndarray

    # --- oracles -----------------------------------------------------------

    def support(self, u) -> np.ndarray:
        raise NotImplementedError

    def gauge(self, x) -> np.ndarray:
        raise NotImplementedError

    def boundary(self, s, strict: bool = True) -> BoundaryPoint:
        raise NotImplementedError

    def locate(self, x) -> np.ndarray:
        """Boundary parameter of a boundary point."""
        raise NotImplementedError

    def volume(self) -> Optional[float]:
        return None

    def vertices(self) -> Optional[np.ndarray]:
        return None

    def breakpoints(self, v) -> np.ndarray:
        """Values of v.x at which slice functions have kinks (polytope vertices)."""
        return np.zeros(0)

    def boundary_breaks(self) -> np.ndarray:
        """Boundary parameters where the parametrization is not smooth (2D)."""
        return np.zeros(0)

    @property
    def param_box(self) -> List[Tuple[float, float]]:
        if self.dim == 2:
            return [(0.0, TWO_PI)]
        return [(0.0, math.pi), (0.0, TWO_PI)]

    @property
    def smooth(self) -> bool:
        return True

    # --- derived operations -----------------------------------------------

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        return self.gauge(x) <= 1 + tol

    def line_range(self, p, d) -> Tuple[np.ndarray, np.ndarray]:
        """
        Parameter interval [lo, hi] of {s : p + s*d in K}; NaN when empty.

        ``p`` and ``d`` broadcast to shape (..., n). The gauge is convex along
        the line, so a golden-section search finds its minimum and two
        bisections find the crossings of level 1; all lines are processed as
        one array.
        """
        p, d = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(d, dtype=float))
        norm_d = np.linalg.norm(d, axis=-1)
        offset = np.linalg.norm(p - self.interior_point, axis=-1)
        with np.errstate(divide="ignore"):
            reach = 2 * (self.circumradius() + offset) / norm_d
        reach = np.where(np.isfinite(reach), reach, 0.0)

        def g(s):
            return self.gauge(p + s[..., None] * d)

        a, b = -reach, reach.copy()
        c = b - INV_GOLDEN * (b - a)
        e = a + INV_GOLDEN * (b - a)
        gc, ge = g(c), g(e)
        for _ in range(90):
            left = gc < ge
            b = np.where(left, e, b)
            a = np.where(left, a, c)
            new_c = b - INV_GOLDEN * (b - a)
            new_e = a + INV_GOLDEN * (b - a)
            c, e = new_c, new_e
            gc, ge = g(c), g(e)
        s_min = 0.5 * (a + b)
        inside = g(s_min) <= 1

        def crossing(inner, outer):
            for _ in range(110):
                mid = 0.5 * (inner + outer)
                ok = g(mid) <= 1
                inner = np.where(ok, mid, inner)
                outer = np.where(ok, outer, mid)
            return inner

        hi = crossing(s_min, s_min + reach)
        lo = crossing(s_min, s_min - reach)
        degenerate = norm_d == 0
        lo = np.where(degenerate, -np.inf, lo)
        hi = np.where(degenerate, np.inf, hi)
        return np.where(inside, lo, np.nan), np.where(inside, hi, np.nan)

    def radial(self, u, center=None) -> np.ndarray:
        """Distance from ``center`` (default interior point) to the boundary along u."""
        center = self.interior_point if center is None else np.asarray(center, dtype=float)
        _, hi = self.line_range(center, u)
        return hi

    def circumradius(self) -> float:
        """Upper bound on max |x - interior_point| over the body."""
        dirs = circle_directions(64) if self.dim == 2 else fibonacci_sphere(128)
        z = self.interior_point
        return float(np.max(self.support(dirs) - dirs @ z)) * 1.1

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        eye = np.eye(self.dim)
        return -self.support(-eye), self.support(eye)

    def affine(self, A, b=None, kind: Optional[str] = None) -> "ConvexBody":
        return AffineImage(self, A, b, kind=kind)

    def scaled(self, lam: float) -> "ConvexBody":
        """Dilate about the origin."""
        return AffineImage(self, lam * np.eye(self.dim), kind=self.kind)

    def describe(self) -> str:
        return self.kind


class Ball(ConvexBody):
    """Euclidean ball (a disk in the plane)."""

    def __init__(self, dim: int = 2, radius: float = 1.0, center=None, kind: Optional[str] = None):
        if dim not in (2, 3):
            raise ValueError(f"Unsupported dimension: {dim}")
        if radius <= 0:
            raise ValueError(f"Radius must be positive, got {radius}")
        self.dim = dim
        self.radius = float(radius)
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        self.interior_point = self.center.copy()
        self.kind = kind or ("disk" if dim == 2 else "ball")

    def support(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return u @ self.center + self.radius * np.linalg.norm(u, axis=-1)

    def gauge(self, x) -> np.ndarray:
        return np.linalg.norm(np.asarray(x, dtype=float) - self.center, axis=-1) / self.radius

    def line_range(self, p, d):
        p = np.asarray(p, dtype=float) - self.center
        d = np.asarray(d, dtype=float)
        a = np.sum(d * d, axis=-1)
        b = np.sum(d * p, axis=-1)
        c = np.sum(p * p, axis=-1) - self.radius ** 2
        disc = b * b - a * c
        with np.errstate(invalid="ignore", divide="ignore"):
            root = np.sqrt(np.where(disc >= 0, disc, np.nan))
            lo = (-b - root) / a
            hi = (-b + root) / a
        return lo, hi

    def boundary(self, s, strict: bool = True) -> BoundaryPoint:
        s = np.asarray(s, dtype=float)
        r = self.radius
        if self.dim == 2:
            normal = np.stack([np.cos(s), np.sin(s)], axis=-1)
            return BoundaryPoint(self.center + r * normal, normal,
                                 np.full(s.shape, 1.0 / r), np.full(s.shape, r))
        theta, phi = s[..., 0], s[..., 1]
        normal = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)
        return BoundaryPoint(self.center + r * normal, normal,
                             np.full(theta.shape, r ** -2.0), r * r * np.sin(theta))

    def locate(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float) - self.center
        if self.dim == 2:
            return np.mod(np.arctan2(y[..., 1], y[..., 0]), TWO_PI)
        rho = np.linalg.norm(y, axis=-1)
        return np.stack([np.arccos(np.clip(y[..., 2] / rho, -1, 1)),
                         np.mod(np.arctan2(y[..., 1], y[..., 0]), TWO_PI)], axis=-1)

    def volume(self) -> float:
        return ball_volume(self.dim) * self.radius ** self.dim

    def circumradius(self) -> float:
        return self.radius

    def scaled(self, lam: float) -> "Ball":
        return Ball(self.dim, self.radius * lam, self.center * lam, kind=self.kind)

    def describe(self) -> str:
        return f"{self.kind}(r={self.radius:g})"


class AffineImage(ConvexBody):
    """
    Image A*K + b of a convex body K under an invertible affine map.

    Curvature follows H'(Ax+b) = H(x) |det A|^{-2} |A^{-T} n|^{-(n+1)} and the
    surface element scales by |det A| |A^{-T} n|.
    """

    def __init__(self, base: ConvexBody, A, b=None, kind: Optional[str] = None):
        A = np.asarray(A, dtype=float)
        if A.shape != (base.dim, base.dim):
            raise ValueError(f"Map shape {A.shape} does not match dimension {base.dim}")
        det = float(np.linalg.det(A))
        if abs(det) < 1e-14:
            raise ValueError("Affine map is singular")
        self.base = base
        self.A = A
        self.b = np.zeros(base.dim) if b is None else np.asarray(b, dtype=float)
        self.A_inv = np.linalg.inv(A)
        self.det = abs(det)
        self.dim = base.dim
        self.kind = kind or "affine"
        self.interior_point = A @ base.interior_point + self.b

    def _to_base(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.b) @ self.A_inv.T

    def support(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.base.support(u @ self.A) + u @ self.b

    def gauge(self, x) -> np.ndarray:
        return self.base.gauge(self._to_base(x))

    def line_range(self, p, d):
        return self.base.line_range(self._to_base(p), np.asarray(d, dtype=float) @ self.A_inv.T)

    def boundary(self, s, strict: bool = True) -> BoundaryPoint:
        bp = self.base.boundary(s, strict=strict)
        point = bp.point @ self.A.T + self.b
        dual = bp.normal @ self.A_inv  # rows are A^{-T} n
        dual_norm = np.asarray(np.linalg.norm(dual, axis=-1))
        normal = dual / dual_norm[..., None]
        curvature = bp.curvature / (self.det ** 2 * dual_norm ** (self.dim + 1))
        speed = bp.speed * self.det * dual_norm
        return BoundaryPoint(point, normal, curvature, speed)

    def locate(self, x) -> np.ndarray:
        return self.base.locate(self._to_base(x))

    def volume(self) -> Optional[float]:
        base = self.base.volume()
        return None if base is None else self.det * base

    def vertices(self) -> Optional[np.ndarray]:
        v = self.base.vertices()
        return None if v is None else v @ self.A.T + self.b

    def breakpoints(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.base.breakpoints(v @ self.A) + v @ self.b

    def boundary_breaks(self) -> np.ndarray:
        return self.base.boundary_breaks()

    @property
    def smooth(self) -> bool:
        return self.base.smooth

    def circumradius(self) -> float:
        return float(np.linalg.norm(self.A, 2)) * self.base.circumradius()

    def scaled(self, lam: float) -> "AffineImage":
        return AffineImage(self.base, lam * self.A, lam * self.b, kind=self.kind)

    def describe(self) -> str:
        return f"{self.kind}({self.base.describe()})"


class Polytope(ConvexBody):
    """
    Convex polygon or polytope given by its vertices.

    The facet description comes from the scipy hull; boundary parameters are
    polar angles about the vertex centroid.
    """

    def __init__(self, vertices, kind: Optional[str] = None):
        pts = np.asarray(vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValueError(f"Expected an (m, 2) or (m, 3) vertex array, got {pts.shape}")
        hull = ConvexHull(pts)
        self.dim = pts.shape[1]
        self._hull = hull
        self._vertices = pts[hull.vertices]
        self.interior_point = self._vertices.mean(axis=0)
        eq = hull.equations
        eq = eq / np.linalg.norm(eq[:, :-1], axis=1, keepdims=True)
        _, idx = np.unique(np.round(eq, 10) + 0.0, axis=0, return_index=True)
        eq = eq[np.sort(idx)]
        self.normals = eq[:, :-1]
        self.offsets = -eq[:, -1]
        self.kind = kind or ("polygon" if self.dim == 2 else "polytope")
        if self.dim == 2:
            rel = self._vertices - self.interior_point
            self._vertex_angles = np.sort(np.mod(np.arctan2(rel[:, 1], rel[:, 0]), TWO_PI))

    def support(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.max(u @ self._vertices.T, axis=-1)

    def gauge(self, x) -> np.ndarray:
        z = self.interior_point
        rel = np.asarray(x, dtype=float) - z
        slack = self.offsets - self.normals @ z
        return np.max(rel @ self.normals.T / slack, axis=-1).clip(min=0.0)

    def line_range(self, p, d):
        p = np.asarray(p, dtype=float)
        d = np.asarray(d, dtype=float)
        p, d = np.broadcast_arrays(p, d)
        ad = d @ self.normals.T
        slack = self.offsets - p @ self.normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = slack / ad
        hi = np.min(np.where(ad > GEOM_TOL, ratio, np.inf), axis=-1)
        lo = np.max(np.where(ad < -GEOM_TOL, ratio, -np.inf), axis=-1)
        blocked = np.any((np.abs(ad) <= GEOM_TOL) & (slack < 0), axis=-1) | (lo > hi)
        return np.where(blocked, np.nan, lo), np.where(blocked, np.nan, hi)

    def _directions(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.dim == 2:
            return np.stack([np.cos(s), np.sin(s)], axis=-1)
        theta, phi = s[..., 0], s[..., 1]
        return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)

    def boundary(self, s, strict: bool = True) -> BoundaryPoint:
        u = self._directions(s)
        z = self.interior_point
        slack = self.offsets - self.normals @ z
        score = u @ self.normals.T / slack
        best = np.argmax(score, axis=-1)
        top = np.asarray(np.max(score, axis=-1))
        rho = 1.0 / top
        normal = self.normals[best]
        on_edge = np.sum(score >= top[..., None] * (1 - 1e-9), axis=-1) > 1
        if strict and np.any(on_edge):
            raise CurvatureUnavailable("boundary parameter hits a vertex or edge of the polytope")
        cos = np.sum(u * normal, axis=-1)
        if self.dim == 2:
            speed = rho / cos
        else:
            speed = rho * rho * np.sin(np.asarray(s)[..., 0]) / cos
        return BoundaryPoint(z + rho[..., None] * u, normal, np.zeros(rho.shape), speed)

    def locate(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float) - self.interior_point
        if self.dim == 2:
            return np.mod(np.arctan2(y[..., 1], y[..., 0]), TWO_PI)
        rho = np.linalg.norm(y, axis=-1)
        return np.stack([np.arccos(np.clip(y[..., 2] / rho, -1, 1)),
                         np.mod(np.arctan2(y[..., 1], y[..., 0]), TWO_PI)], axis=-1)

    def volume(self) -> float:
        return float(self._hull.volume)

    def vertices(self) -> np.ndarray:
        return self._vertices

    def breakpoints(self, v) -> np.ndarray:
        return np.sort(self._vertices @ np.asarray(v, dtype=float))

    def boundary_breaks(self) -> np.ndarray:
        return self._vertex_angles if self.dim == 2 else np.zeros(0)

    @property
    def smooth(self) -> bool:
        return False

    def circumradius(self) -> float:
        return float(np.max(np.linalg.norm(self._vertices - self.interior_point, axis=1)))

    def simplices(self) -> np.ndarray:
        """Fan triangulation from the vertex centroid, shape (k, dim+1, dim)."""
        hull = ConvexHull(self._vertices)
        z = np.broadcast_to(self.interior_point, (len(hull.simplices), 1, self.dim))
        return np.concatenate([z, self._vertices[hull.simplices]], axis=1)

    def describe(self) -> str:
        return f"{self.kind}({len(self._vertices)} vertices)"


class SmoothBody(ConvexBody):
    """
    Planar body given by a radial function about an interior point.

    Normals come from central differences of the boundary curve and the
    curvature from a least-squares quadratic fit in the tangent chart,
    Richardson-extrapolated over stencil radii 1e-2, 5e-3, 2.5e-3.
    """

    STENCIL = (1e-2, 5e-3, 2.5e-3)
    DENSE = 4096

    def __init__(self, radial: Callable[[np.ndarray], np.ndarray], center=None,
                 kind: str = "custom-smooth", label: str = "custom"):
        self.dim = 2
        self._radial = radial
        self.interior_point = np.zeros(2) if center is None else np.asarray(center, dtype=float)
        self.kind = kind
        self.label = label
        s = np.linspace(0.0, TWO_PI, self.DENSE, endpoint=False)
        self._dense_s = s
        self._dense_x = self._curve(s)

    @classmethod
    def superellipse(cls, a: float = 1.0, b: float = 1.0, p: float = 4.0) -> "SmoothBody":
        if p < 2:
            raise ValueError(f"Superellipse exponent must be >= 2 for convexity with C^2 boundary, got {p}")

        def radial(s):
            return (np.abs(np.cos(s) / a) ** p + np.abs(np.sin(s) / b) ** p) ** (-1.0 / p)

        return cls(radial, label=f"superellipse(a={a:g}, b={b:g}, p={p:g})")

    @classmethod
    def ellipse(cls, a: float, b: float) -> "SmoothBody":
        """Ellipse through the generic radial machinery (used to check the numeric curvature)."""
        return cls(lambda s: a * b / np.sqrt((b * np.cos(s)) ** 2 + (a * np.sin(s)) ** 2),
                   label=f"radial-ellipse(a={a:g}, b={b:g})")

    def _curve(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        r = np.asarray(self._radial(s))
        return self.interior_point + r[..., None] * np.stack([np.cos(s), np.sin(s)], axis=-1)

    def _tangent(self, s) -> np.ndarray:
        h = 1e-5
        return (self._curve(s + h) - self._curve(s - h)) / (2 * h)

    def gauge(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float) - self.interior_point
        return np.linalg.norm(y, axis=-1) / self._radial(np.arctan2(y[..., 1], y[..., 0]))

    def radial(self, u, center=None) -> np.ndarray:
        if center is not None and not np.allclose(center, self.interior_point):
            return super().radial(u, center)
        u = np.asarray(u, dtype=float)
        return self._radial(np.arctan2(u[..., 1], u[..., 0])) / np.linalg.norm(u, axis=-1)

    def support(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        flat = u.reshape(-1, 2)
        out = np.empty(len(flat))
        step = TWO_PI / self.DENSE
        for i, ui in enumerate(flat):
            k = int(np.argmax(self._dense_x @ ui))
            s0 = self._dense_s[k]
            res = minimize_scalar(lambda s: -float(self._curve(s) @ ui), bounds=(s0 - step, s0 + step),
                                  method="bounded", options={"xatol": 1e-13})
            out[i] = max(float(self._dense_x[k] @ ui), -float(res.fun))
        return out.reshape(u.shape[:-1])

    def boundary(self, s, strict: bool = True) -> BoundaryPoint:
        s = np.asarray(s, dtype=float)
        point = self._curve(s)
        tangent = self._tangent(s)
        speed = np.asarray(np.linalg.norm(tangent, axis=-1))
        t_hat = tangent / speed[..., None]
        normal = np.stack([t_hat[..., 1], -t_hat[..., 0]], axis=-1)
        flat = s.reshape(-1)
        curv = np.array([self._fit_curvature(si) for si in flat]).reshape(s.shape)
        return BoundaryPoint(point, normal, curv, speed)

    def _fit_curvature(self, s0: float) -> float:
        x0 = self._curve(s0)
        tangent = self._tangent(s0)
        speed = float(np.linalg.norm(tangent))
        t_hat = tangent / speed
        n_hat = np.array([t_hat[1], -t_hat[0]])
        estimates = []
        for h in self.STENCIL:
            ds = h / speed
            pts = self._curve(s0 + ds * np.linspace(-1.0, 1.0, 11))
            xi = (pts - x0) @ t_hat
            eta = (x0 - pts) @ n_hat
            coef = np.polyfit(xi, eta, 2)
            estimates.append(2 * coef[0])
        k1, k2, k3 = estimates
        r12 = (4 * k2 - k1) / 3
        r23 = (4 * k3 - k2) / 3
        return max(0.0, (16 * r23 - r12) / 15)

    def locate(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float) - self.interior_point
        return np.mod(np.arctan2(y[..., 1], y[..., 0]), TWO_PI)

    def circumradius(self) -> float:
        return float(np.max(np.linalg.norm(self._dense_x - self.interior_point, axis=1))) * 1.01

    def describe(self) -> str:
        return self.label


# ---------------------------------------------------------------------------
# Polyhedral sets
# ---------------------------------------------------------------------------

@dataclass
class PolytopeApprox:
    """
    Finite set of halfspaces {x : u.x <= t}, optionally with its vertices.

    ``active`` lists the halfspaces that support a facet once the vertex
    representation is known.
    """
    dim: int
    normals: np.ndarray
    offsets: np.ndarray
    vertices: Optional[np.ndarray] = None
    active: Optional[np.ndarray] = None
    degenerate: bool = False

    @property
    def num_vertices(self) -> int:
        return 0 if self.vertices is None else len(self.vertices)

    @property
    def num_facets(self) -> int:
        if self.active is not None:
            return len(self.active)
        return len(self.offsets)

    def volume(self) -> float:
        if self.vertices is None or self.degenerate or len(self.vertices) <= self.dim:
            return 0.0
        return float(ConvexHull(self.vertices).volume)

    def as_body(self) -> Polytope:
        if self.vertices is None:
            raise ValueError("Polytope has no vertex representation; call halfspace_intersection first")
        return Polytope(self.vertices)

    def contains(self, x, tol: float = 1e-9) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all(x @ self.normals.T <= self.offsets + tol, axis=-1)


def support(body: ConvexBody, u) -> np.ndarray:
    """
    Support function h_K(u) = max over x in K of u.x.

    Raises:
        ValueError: If u is not a unit vector
    """
    u = np.asarray(u, dtype=float)
    if not np.allclose(np.linalg.norm(u, axis=-1), 1.0, atol=1e-9):
        raise ValueError("support expects unit directions")
    return body.support(u)


def curvature(body: ConvexBody, s) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Boundary point, outer normal and Gauss-Kronecker curvature at parameter s.

    Raises:
        CurvatureUnavailable: At polytope vertices and edges
    """
    bp = body.boundary(np.asarray(s, dtype=float), strict=True)
    return bp.point, bp.normal, float(bp.curvature)


def convex_hull(points, dim: Optional[int] = None) -> PolytopeApprox:
    """
    Convex hull of a point set in the plane or in space.

    Affinely dependent input is not an error: the result carries
    ``degenerate=True`` and the extreme points along the spanned subspace.

    Args:
        points: Array (m, dim) with m >= dim + 1
        dim: Ambient dimension (inferred if omitted)

    Returns:
        PolytopeApprox with vertices (counter-clockwise in 2D) and facets
    """
    pts = np.asarray(points, dtype=float)
    dim = pts.shape[1] if dim is None else dim
    if len(pts) < dim + 1:
        raise ValueError(f"Need at least {dim + 1} points for a hull in dimension {dim}, got {len(pts)}")
    centered = pts - pts.mean(axis=0)
    scale = max(float(np.max(np.abs(centered))), 1e-300)
    rank = np.linalg.matrix_rank(centered / scale, tol=1e-10)
    if rank < dim:
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        coords = centered @ vt[:rank].T
        if rank == 0:
            extreme = pts[:1]
        elif rank == 1:
            extreme = pts[[int(np.argmin(coords[:, 0])), int(np.argmax(coords[:, 0]))]]
        else:
            sub = ConvexHull(coords)
            extreme = pts[sub.vertices]
        return PolytopeApprox(dim, np.zeros((0, dim)), np.zeros(0), vertices=extreme, degenerate=True)
    hull = ConvexHull(pts)
    eq = hull.equations
    _, idx = np.unique(np.round(eq / np.linalg.norm(eq[:, :-1], axis=1, keepdims=True), 10) + 0.0, axis=0,
                       return_index=True)
    eq = eq[np.sort(idx)]
    norms = np.linalg.norm(eq[:, :-1], axis=1)
    return PolytopeApprox(dim, eq[:, :-1] / norms[:, None], -eq[:, -1] / norms,
                          vertices=pts[hull.vertices], active=np.arange(len(eq)))


def chebyshev_center(normals: np.ndarray, offsets: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Center and radius of the largest ball inside {x : normals @ x <= offsets}.

    Raises:
        Unbounded: If the inscribed radius is unbounded
        EmptyIntersection: If no ball of positive radius fits
    """
    k, n = normals.shape
    norms = np.linalg.norm(normals, axis=1)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([normals, norms[:, None]])
    res = linprog(c, A_ub=A_ub, b_ub=offsets, bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status == 3:
        raise Unbounded("halfspace system admits balls of any radius")
    if res.status != 0:
        raise EmptyIntersection(f"no interior point found ({res.message})")
    radius = float(res.x[-1])
    if radius <= 1e-12:
        raise EmptyIntersection("halfspace intersection has empty interior")
    return res.x[:-1], radius


def _merge_close(points: np.ndarray, tol: float) -> np.ndarray:
    """Drop rows within tol of an earlier row (qhull splits non-simplicial facets)."""
    if len(points) < 2:
        return points
    pairs = cKDTree(points).query_pairs(tol, p=np.inf, output_type="ndarray")
    drop = np.zeros(len(points), dtype=bool)
    drop[np.max(pairs, axis=1)] = True
    return points[~drop]


def halfspace_intersection(hs: PolytopeApprox, interior_point=None) -> PolytopeApprox:
    """
    Vertex representation of a bounded intersection of halfspaces.

    Translates an interior point to the origin so every offset is positive,
    then reads the vertices off the facets of the dual hull of the points
    u / t (each dual facet with equation w.y + c = 0 is the primal vertex
    -w / c).

    Args:
        hs: Halfspaces u_i.x <= t_i
        interior_point: Strictly interior point (Chebyshev center if None)

    Returns:
        New PolytopeApprox with vertices and active facet indices

    Raises:
        EmptyIntersection: If the halfspaces share no interior point
        Unbounded: If the normals do not cover the sphere of directions
    """
    A = np.asarray(hs.normals, dtype=float)
    t = np.asarray(hs.offsets, dtype=float)
    n = hs.dim
    if len(A) <= n:
        raise Unbounded(f"{len(A)} halfspaces cannot bound a set in dimension {n}")
    if interior_point is None:
        z, _ = chebyshev_center(A, t)
    else:
        z = np.asarray(interior_point, dtype=float)
    slack = t - A @ z
    if np.any(slack <= 0):
        if interior_point is not None:
            return halfspace_intersection(hs, None)
        raise EmptyIntersection("interior point violates a halfspace")
    dual = A / slack[:, None]
    try:
        hull = ConvexHull(dual)
    except QhullError as exc:
        raise Unbounded(f"dual point set is degenerate: {exc}") from exc
    scale = float(np.max(np.linalg.norm(dual, axis=1)))
    if np.any(hull.equations[:, -1] >= -GEOM_TOL * scale):
        raise Unbounded("origin is not interior to the dual hull")
    verts = z + hull.equations[:, :-1] / (-hull.equations[:, -1])[:, None]
    verts = _merge_close(verts, 1e-9 * max(1.0, float(np.max(np.abs(verts - z)))))
    if n == 2:
        rel = verts - z
        verts = verts[np.argsort(np.arctan2(rel[:, 1], rel[:, 0]))]
    return PolytopeApprox(n, A, t, vertices=verts, active=np.sort(hull.vertices))


# ---------------------------------------------------------------------------
# Measure and boundary integrals
# ---------------------------------------------------------------------------

def _polar_measure_2d(body: ConvexBody, weight: WeightFn, rtol: float) -> Measured:
    z = body.interior_point
    corners = body.vertices()
    breaks = [0.0, TWO_PI]
    if corners is not None:
        rel = corners - z
        breaks = np.concatenate([breaks, np.mod(np.arctan2(rel[:, 1], rel[:, 0]), TWO_PI)])

    def sector(theta: np.ndarray) -> np.ndarray:
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        rho = body.radial(u, z)
        if weight.constant is not None:
            return weight.constant * rho * rho / 2
        t, w = gauss_nodes(0.0, rho, 24)
        pts = z + t[..., None] * u[:, None, :]
        return np.sum(w * t * weight(pts), axis=-1)

    value, err = integrate_breaks(sector, np.unique(breaks), rtol=rtol)
    return Measured(value, err)


def _polar_measure_3d(body: ConvexBody, weight: WeightFn, rtol: float) -> Measured:
    z = body.interior_point
    phi, wphi = gauss_nodes(0.0, TWO_PI, 48)

    def shell(theta: np.ndarray) -> np.ndarray:
        th = theta[:, None]
        u = np.stack([np.sin(th) * np.cos(phi), np.sin(th) * np.sin(phi), np.cos(th) * np.ones_like(phi)], axis=-1)
        rho = body.radial(u, z)
        if weight.constant is not None:
            radial = weight.constant * rho ** 3 / 3
        else:
            t, w = gauss_nodes(0.0, rho, 20)
            pts = z + t[..., None] * u[..., None, :]
            radial = np.sum(w * t * t * weight(pts), axis=-1)
        return np.sin(theta) * np.sum(wphi * radial, axis=-1)

    value, err = integrate(shell, 0.0, math.pi, rtol=rtol)
    return Measured(value, err)


def measure(region: Union[ConvexBody, PolytopeApprox], weight: Optional[WeightFn] = None,
            rtol: float = 1e-8) -> Measured:
    """
    Weighted measure Psi(A) = integral of psi over a body or polytope.

    Polytopes are integrated on a fan triangulation with a collapsed
    Gauss rule (exactly, for constant weights); smooth bodies in polar
    coordinates about their interior point.

    Raises:
        ToleranceNotMet: If the requested accuracy is not reached
    """
    weight = weight or WeightFn.one()
    if isinstance(region, PolytopeApprox):
        if region.vertices is None:
            region = halfspace_intersection(region)
        if region.degenerate or region.num_vertices <= region.dim:
            return Measured(0.0, 0.0)
        region = region.as_body()
    exact = region.volume()
    if weight.constant is not None and exact is not None:
        return Measured(weight.constant * exact, 0.0)
    if isinstance(region, Polytope):
        simplices = region.simplices()
        for order in (8, 12, 16, 24):
            value, err = integrate_simplices(weight, simplices, order=order)
            if err <= rtol * abs(value) + 1e-300:
                return Measured(value, err)
        raise ToleranceNotMet(f"simplex quadrature did not reach rtol={rtol}", value, err)
    if region.dim == 2:
        return _polar_measure_2d(region, weight, rtol)
    return _polar_measure_3d(region, weight, rtol)


def boundary_integral(body: ConvexBody, integrand: Callable[[BoundaryPoint], np.ndarray],
                      rtol: float = 1e-9) -> Measured:
    """
    Integrate f(point, normal, curvature) over the boundary surface.

    ``integrand`` receives a BoundaryPoint batch and returns values of the
    same leading shape; the surface element is applied here.
    """
    if body.dim == 2:
        breaks = np.unique(np.concatenate([[0.0], body.boundary_breaks(), [TWO_PI]]))

        def f(s):
            bp = body.boundary(s, strict=False)
            return integrand(bp) * bp.speed

        value, err = integrate_breaks(f, breaks, rtol=rtol)
        return Measured(value, err)

    phi, wphi = gauss_nodes(0.0, TWO_PI, 64)

    def ring(theta):
        s = np.stack(np.broadcast_arrays(theta[:, None], phi[None, :]), axis=-1)
        bp = body.boundary(s, strict=False)
        return np.sum(wphi * integrand(bp) * bp.speed, axis=-1)

    value, err = integrate(ring, 0.0, math.pi, rtol=rtol)
    return Measured(value, err)


def affine_surface_area(body: ConvexBody, weight: Optional[WeightFn] = None,
                        power: Optional[float] = None, weight_power: float = 1.0) -> float:
    """
    Integral of H^power * w^weight_power over the boundary.

    ``power`` defaults to 1/(n+1), giving the classical affine surface area.
    """
    n = body.dim
    power = 1.0 / (n + 1) if power is None else power

    def f(bp: BoundaryPoint) -> np.ndarray:
        val = np.maximum(bp.curvature, 0.0) ** power
        if weight is not None:
            val = val * weight(bp.point) ** weight_power
        return val

    return boundary_integral(body, f).value


def mean_width(region: Union[ConvexBody, np.ndarray], nodes: Optional[int] = None) -> Measured:
    """
    Mean width W = 2/(n v_n) * integral of h over the unit sphere.

    ``region`` is a body or a vertex array. Uses 512 equiangular nodes in
    the plane and 2048 Fibonacci nodes in space; the error estimate is the
    change against half as many nodes.
    """
    if isinstance(region, ConvexBody):
        dim = region.dim
        h = region.support
    else:
        verts = np.asarray(region, dtype=float)
        dim = verts.shape[1]
        h = lambda u: np.max(u @ verts.T, axis=-1)
    nodes = nodes or (512 if dim == 2 else 2048)

    def estimate(count: int) -> float:
        if dim == 2:
            return 2 * float(np.mean(h(circle_directions(count))))
        return 2 * float(np.mean(h(fibonacci_sphere(count)))) * 4 * math.pi / (3 * ball_volume(3))

    fine = estimate(nodes)
    return Measured(fine, abs(fine - estimate(nodes // 2)))


# ---------------------------------------------------------------------------
# Rolling radius
# ---------------------------------------------------------------------------

def _ball_inside(body: ConvexBody, center: np.ndarray, r: float, tol: float = 1e-12) -> bool:
    if isinstance(body, Ball):
        return float(np.linalg.norm(center - body.center)) + r <= body.radius + tol
    if isinstance(body, Polytope):
        return bool(np.all(body.normals @ center + r <= body.offsets + tol))
    if not bool(body.contains(center)):
        return False
    if body.dim == 2:
        s = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
        pts = body.boundary(s, strict=False).point
        dist = np.linalg.norm(pts - center, axis=1)
        k = int(np.argmin(dist))
        step = TWO_PI / 4096
        res = minimize_scalar(
            lambda t: float(np.linalg.norm(body.boundary(np.array(t), strict=False).point - center)),
            bounds=(s[k] - step, s[k] + step), method="bounded", options={"xatol": 1e-12})
        return min(float(dist[k]), float(res.fun)) >= r - tol
    dirs = fibonacci_sphere(8192)
    return bool(np.all(dirs @ center + r <= body.support(dirs) + tol))


def rolling_radius(body: ConvexBody, x) -> float:
    """
    Largest radius of a ball inside K that touches the boundary point x.

    Binary search along the inward normal at x.
    """
    x = np.asarray(x, dtype=float)
    bp = body.boundary(body.locate(x), strict=False)
    normal = bp.normal
    lo, hi = 0.0, float(body.support(normal) + body.support(-normal)) / 2
    if _ball_inside(body, x - hi * normal, hi):
        return hi
    while hi - lo > 1e-10 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _ball_inside(body, x - mid * normal, mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# Text descriptions
# ---------------------------------------------------------------------------

def _regular_polygon(k: int, r: float = 1.0) -> np.ndarray:
    theta = TWO_PI * np.arange(k) / k
    return r * np.column_stack([np.cos(theta), np.sin(theta)])


def _make_disk(p):
    return Ball(2, p.get("r", 1.0), [p.get("cx", 0.0), p.get("cy", 0.0)])


def _make_ball(p):
    dim = int(p.get("dim", 3))
    return Ball(dim, p.get("r", 1.0), kind="disk" if dim == 2 else "ball")


def _make_ellipse(p):
    a, b = p.get("a", 2.0), p.get("b", 1.0)
    angle = p.get("angle", 0.0)
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    return AffineImage(Ball(2), rot @ np.diag([a, b]), [p.get("cx", 0.0), p.get("cy", 0.0)], kind="ellipse")


def _make_ellipsoid(p):
    return AffineImage(Ball(3), np.diag([p.get("a", 1.0), p.get("b", 1.0), p.get("c", 1.0)]), kind="ellipsoid")


def _make_square(p):
    h = p.get("side", 1.0) / 2
    return Polytope([[-h, -h], [h, -h], [h, h], [-h, h]], kind="square")


def _make_cube(p):
    h = p.get("side", 1.0) / 2
    corners = [[sx * h, sy * h, sz * h] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    return Polytope(corners, kind="cube")


def _make_triangle(p):
    return Polytope([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], kind="triangle")


def _make_regular(p):
    return Polytope(_regular_polygon(int(p.get("k", 6)), p.get("r", 1.0)), kind="regular-polygon")


def _make_superellipse(p):
    return SmoothBody.superellipse(p.get("a", 1.0), p.get("b", 1.0), p.get("p", 4.0))


def _make_cap(p):
    rho = p.get("rho", 0.8)
    if not 0 < rho < math.pi / 2:
        raise ValueError(f"cap: rho must lie in (0, pi/2), got {rho}")
    return Ball(2, math.tan(rho), kind="cap")


def _make_hdisk(p):
    r = p.get("r", 0.8)
    if r <= 0:
        raise ValueError(f"hdisk: r must be positive, got {r}")
    return Ball(2, math.tanh(r), kind="hdisk")


BODY_REGISTRY: Dict[str, Tuple[Callable[[Dict[str, float]], ConvexBody], str]] = {
    "disk": (_make_disk, "disk [r=1] [cx=0] [cy=0]       planar Euclidean disk"),
    "ball": (_make_ball, "ball [r=1] [dim=3]              Euclidean ball"),
    "ellipse": (_make_ellipse, "ellipse a=2 b=1 [angle=0]      planar ellipse (affine image of the disk)"),
    "ellipsoid": (_make_ellipsoid, "ellipsoid a=1 b=1 c=1          ellipsoid in R^3"),
    "square": (_make_square, "square [side=1]                centered axis-parallel square"),
    "cube": (_make_cube, "cube [side=1]                  centered cube"),
    "triangle": (_make_triangle, "triangle                       unit right triangle (0,0),(1,0),(0,1)"),
    "regular": (_make_regular, "regular k=6 [r=1]              regular k-gon inscribed in radius r"),
    "polygon": (lambda p: Polytope(p["points"]), "polygon x,y x,y ...            convex hull of listed points"),
    "superellipse": (_make_superellipse, "superellipse a=1 b=1 p=4       |x/a|^p + |y/b|^p <= 1, numeric curvature"),
    "cap": (_make_cap, "cap rho=0.8                    chart disk tan(rho) of a spherical cap"),
    "hdisk": (_make_hdisk, "hdisk r=0.8                    chart disk tanh(r) of a hyperbolic disk"),
}


def _parse_params(tokens: Sequence[str], kind: str) -> Dict:
    params: Dict = {}
    points = []
    for tok in tokens:
        if "=" in tok:
            key, _, value = tok.partition("=")
            try:
                params[key.strip()] = float(value)
            except ValueError as exc:
                raise ValueError(f"{kind}: parameter {key} is not a number: {value!r}") from exc
        elif "," in tok:
            try:
                points.append([float(c) for c in tok.split(",")])
            except ValueError as exc:
                raise ValueError(f"{kind}: bad coordinate {tok!r}") from exc
        else:
            raise ValueError(f"{kind}: unexpected token {tok!r}")
    if points:
        params["points"] = np.array(points)
    return params


def parse_body(text: str) -> ConvexBody:
    """
    Build a body from a short description such as ``ellipse a=2 b=1``.

    Raises:
        ValueError: Unknown kind or malformed parameters
    """
    tokens = text.split()
    if not tokens:
        raise ValueError("empty body description")
    kind = tokens[0].lower()
    if kind not in BODY_REGISTRY:
        raise ValueError(f"unknown body kind {kind!r}; known: {', '.join(sorted(BODY_REGISTRY))}")
    factory, _ = BODY_REGISTRY[kind]
    params = _parse_params(tokens[1:], kind)
    if kind == "polygon" and "points" not in params:
        raise ValueError("polygon needs at least three x,y points")
    return factory(params)


def list_bodies() -> List[str]:
    return [usage for _, usage in BODY_REGISTRY.values()]
