"""Quadrature on [-1, 1] with the Gegenbauer weight, on S^m, and sup-norm grids.

Integrals against ``(1 - t^2)^((m - 2) / 2) dt`` are computed after the
substitution ``t = cos(theta)``, which turns them into
``int g(cos theta) sin(theta)^(m - 1) dtheta``.  This sidesteps the endpoint
singularity of the weight on the circle (m = 1) and lets one Gauss-Legendre
family serve every m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, cKDTree
from scipy.special import roots_legendre

from spheremix.geometry import (
    TWO_PI,
    sin_power_integral,
    spherical_to_cartesian,
    unit_vector,
)
from spheremix.special import surface_measure

DEFAULT_MAX_POINTS = 20_000_000
DEFAULT_COLAT_ORDER = 128
DEFAULT_AZIMUTH_ORDER = 256


class QuadratureNotConverged(RuntimeError):
    """Adaptive order doubling hit its cap before self-consistency."""


@lru_cache(maxsize=64)
def _gauss_legendre(order: int):
    x, w = roots_legendre(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(order: int, a: float, b: float):
    """Gauss-Legendre nodes and weights mapped to ``[a, b]``."""
    x, w = _gauss_legendre(int(order))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@dataclass(frozen=True)
class IntervalRule:
    """Rule for ``int_lo^hi g(t) (1 - t^2)^((m - 2) / 2) dt``.

    ``weights`` already contain the Gegenbauer weight, so the integral is
    ``weights @ g(nodes)``.  Over the full interval the weights sum to
    ``omega_m / omega_{m-1}``.
    """

    m: int
    nodes: np.ndarray
    weights: np.ndarray
    lo: float = -1.0
    hi: float = 1.0

    @property
    def order(self) -> int:
        return len(self.nodes)

    def integrate(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(self.weights @ np.asarray(g(self.nodes), dtype=float))


def interval_rule(m: int, order: int, lo: float = -1.0, hi: float = 1.0) -> IntervalRule:
    """Gauss-Legendre rule in ``theta = arccos t`` on ``[lo, hi]``."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if not -1.0 <= lo < hi <= 1.0:
        raise ValueError(f"need -1 <= lo < hi <= 1, got [{lo}, {hi}]")
    theta, w = gauss_legendre(order, math.acos(hi), math.acos(lo))
    return IntervalRule(m, np.cos(theta), w * np.sin(theta) ** (m - 1), lo, hi)


def weighted_integral(
    g: Callable[[np.ndarray], np.ndarray],
    m: int,
    lo: float = -1.0,
    hi: float = 1.0,
    order: int = 64,
    rtol: float = 1e-10,
    atol: float = 0.0,
    max_order: int = 4096,
) -> float:
    """Adaptive ``int_lo^hi g(t) (1 - t^2)^((m-2)/2) dt`` by order doubling.

    Stops when two successive orders agree to ``rtol`` relative (or
    ``atol`` absolute).  Raises :class:`QuadratureNotConverged` otherwise.
    """
    prev = interval_rule(m, order, lo, hi).integrate(g)
    while order < max_order:
        order *= 2
        cur = interval_rule(m, order, lo, hi).integrate(g)
        if abs(cur - prev) <= max(rtol * abs(cur), atol):
            return cur
        prev = cur
    raise QuadratureNotConverged(f"no agreement to rtol={rtol} by order {max_order}")


@dataclass(frozen=True)
class SphereRule:
    """Points and positive weights on S^m; ``sum(weights) = omega_m``."""

    points: np.ndarray
    weights: np.ndarray
    orders: tuple = ()

    @property
    def m(self) -> int:
        return self.points.shape[1] - 1

    def __len__(self):
        return len(self.weights)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(self.weights @ np.asarray(f(self.points), dtype=float))

    def rotated(self, pole) -> "SphereRule":
        """Same rule with its north pole ``e_{m+1}`` carried to ``pole``.

        Uses a Householder reflection, which preserves the surface measure.
        Useful for concentrating colatitude resolution around a mode.
        """
        pole = unit_vector(pole)
        e = np.zeros_like(pole)
        e[-1] = 1.0
        v = e - pole
        nv = np.linalg.norm(v)
        if nv < 1e-15:
            return self
        v = v / nv
        pts = self.points - 2.0 * np.outer(self.points @ v, v)
        return SphereRule(pts, self.weights, self.orders)


def default_sphere_orders(m: int) -> tuple:
    """Default per-angle orders: 128 per colatitude, 256 in azimuth on S^1, S^2.

    Higher dimensions scale down so the product stays under about a
    million points (m = 4: 26 per colatitude, m = 5: 13, m = 6: 8).
    """
    if m <= 2:
        return (DEFAULT_COLAT_ORDER,) * (m - 1) + (DEFAULT_AZIMUTH_ORDER,)
    if m == 3:
        return (64, 64, 128)
    base = max(4, int((5e5) ** (1.0 / m)))
    return (base,) * (m - 1) + (2 * base,)


def colatitude_rule(power: int, order: int, a: float = 0.0, b: float = math.pi):
    """Gauss-Legendre rule on ``[a, b]`` for ``int g(theta) sin^power(theta)``.

    Weights are rescaled so the rule integrates ``sin^power`` exactly.
    """
    theta, w = gauss_legendre(order, a, b)
    w = w * np.sin(theta) ** power
    exact = sin_power_integral(power, a, b)
    total = w.sum(axis=-1, keepdims=True)
    return theta, w * (exact / total)


def sphere_rule(
    m: int,
    orders: Sequence[int] | None = None,
    max_points: int = DEFAULT_MAX_POINTS,
) -> SphereRule:
    """Product rule: Gauss-Legendre per colatitude, trapezoid in azimuth.

    Parameters
    ----------
    m : int
        Sphere dimension.
    orders : sequence of int, optional
        Node counts ``(theta_1, ..., theta_{m-1}, phi)``.
    max_points : int
        Resource cap on the total number of nodes.
    """
    orders = tuple(int(o) for o in (orders or default_sphere_orders(m)))
    if len(orders) != m or any(o < 1 for o in orders):
        raise ValueError(f"need {m} positive orders, got {orders}")
    if math.prod(orders) > max_points:
        raise ValueError(f"{math.prod(orders)} nodes exceeds cap {max_points}")
    axes, wts = [], []
    for j in range(m - 1):
        theta, w = colatitude_rule(m - 1 - j, orders[j])
        axes.append(theta)
        wts.append(w)
    nphi = orders[-1]
    axes.append(TWO_PI * np.arange(nphi) / nphi)
    wts.append(np.full(nphi, TWO_PI / nphi))
    grids = np.meshgrid(*axes, indexing="ij")
    angles = np.stack([g.ravel() for g in grids], axis=-1)
    wgrid = np.meshgrid(*wts, indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrid], axis=-1), axis=-1)
    return SphereRule(spherical_to_cartesian(angles), weights, orders)


def block_rules(m: int, lo: np.ndarray, hi: np.ndarray, order: int = 6):
    """Tensor Gauss-Legendre rule inside each coordinate block.

    Returns points of shape ``(N, order**m, m + 1)`` and weights of shape
    ``(N, order**m)``; each block's weights sum to its exact measure.
    """
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    nb = lo.shape[0]
    x, w = _gauss_legendre(int(order))
    ang_axes, w_axes = [], []
    for j in range(m):
        half = 0.5 * (hi[:, j] - lo[:, j])
        theta = lo[:, j, None] + half[:, None] * (x[None, :] + 1.0)
        wj = half[:, None] * w[None, :]
        if j < m - 1:
            power = m - 1 - j
            wj = wj * np.sin(theta) ** power
            exact = sin_power_integral(power, lo[:, j], hi[:, j])
            wj = wj * (exact / wj.sum(axis=1))[:, None]
        ang_axes.append(theta)
        w_axes.append(wj)
    q = order**m
    ang = np.empty((nb, q, m))
    wt = np.ones((nb, q))
    idx = np.indices((order,) * m).reshape(m, -1)
    for j in range(m):
        ang[:, :, j] = ang_axes[j][:, idx[j]]
        wt = wt * w_axes[j][:, idx[j]]
    return spherical_to_cartesian(ang), wt


@dataclass(frozen=True)
class SupGrid:
    """Finite point set used to estimate sup norms over S^m."""

    points: np.ndarray
    kind: str
    resolution: int
    mesh_norm: float
    descriptor: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.points.shape[1] - 1

    def __len__(self):
        return len(self.points)

    def sup(self, f: Callable[[np.ndarray], np.ndarray]):
        """``max |f|`` over the grid and the maximizing point."""
        vals = np.abs(np.asarray(f(self.points), dtype=float))
        i = int(np.argmax(vals))
        return float(vals[i]), self.points[i]


def fibonacci_sphere(count: int) -> np.ndarray:
    """Fibonacci spiral points on S^2 (equal-area latitude bands)."""
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    golden = math.pi * (3.0 - math.sqrt(5.0))
    phi = np.mod(golden * np.arange(count), TWO_PI)
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def empirical_mesh_norm(points: np.ndarray, probe: np.ndarray) -> float:
    """Largest geodesic distance from a probe point to its nearest grid point."""
    chord, _ = cKDTree(points).query(probe)
    chord = np.minimum(np.max(chord), 2.0)
    return float(2.0 * math.asin(chord / 2.0))


def covering_radius_s2(points: np.ndarray) -> float:
    """Exact mesh norm of a point set on S^2.

    The spherical Voronoi vertices are the outward unit normals of the
    convex-hull facets; the farthest any point of the sphere can be from
    the set is the largest facet-normal-to-vertex angle.
    """
    hull = ConvexHull(points)
    normals = hull.equations[:, :3]
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    cosang = np.einsum("ij,ij->i", normals, points[hull.simplices[:, 0]])
    return float(np.max(np.arccos(np.clip(cosang, -1.0, 1.0))))


def sup_grid(m: int, resolution: int, max_points: int = DEFAULT_MAX_POINTS) -> SupGrid:
    """Point grid for sup-norm estimates.

    * m = 1: ``resolution`` equispaced circle points, mesh norm ``pi / resolution``.
    * m = 2: Fibonacci spiral; the exact mesh norm (from the convex hull)
      is recorded together with its constant ``mesh_norm * sqrt(resolution)``.
    * m >= 3: cell-centered product angle grid with about ``resolution``
      points; the mesh norm bound is half the angle-space cell diagonal
      (metric factors are <= 1, so this is rigorous).
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if resolution > max_points:
        raise ValueError(f"resolution {resolution} exceeds cap {max_points}")
    if m == 1:
        phi = TWO_PI * np.arange(resolution) / resolution
        pts = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return SupGrid(pts, "circle", resolution, math.pi / resolution)
    if m == 2:
        pts = fibonacci_sphere(resolution)
        mesh = covering_radius_s2(pts) if resolution >= 4 else math.pi
        return SupGrid(
            pts, "fibonacci", resolution, mesh, {"mesh_constant": mesh * math.sqrt(resolution)}
        )
    # product grid: azimuth gets twice the colatitude count
    base = max(1, int(round((resolution / 2.0) ** (1.0 / m))))
    levels = (base,) * (m - 1) + (2 * base,)
    steps = [math.pi / base] * (m - 1) + [TWO_PI / (2 * base)]
    axes = [(np.arange(n) + 0.5) * h for n, h in zip(levels, steps)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = spherical_to_cartesian(np.stack([g.ravel() for g in grids], axis=-1))
    mesh = 0.5 * math.sqrt(sum(h * h for h in steps))
    return SupGrid(pts, "product", len(pts), min(mesh, math.pi), {"levels": levels})


def cap_measure(m: int, lo: float, hi: float, order: int = 64) -> float:
    """Measure of ``{y : lo <= <x, y> <= hi}`` on S^m by the interval rule."""
    omega = surface_measure(m - 1)
    return omega * weighted_integral(lambda t: np.ones_like(t), m, lo, hi, order=order, rtol=1e-13)
