"""Points on S^m, hyperspherical coordinates and coordinate-block partitions.

Conventions
-----------
A point of S^m is an ndarray of shape ``(m + 1,)`` (or ``(..., m + 1)`` for
batches).  Angles are stored as ``(theta_1, ..., theta_{m-1}, phi)`` with
colatitudes in ``[0, pi]`` and azimuth in ``[0, 2 pi)``:

    x_{m+1} = cos(theta_1)
    x_m     = sin(theta_1) cos(theta_2)
    ...
    x_2     = sin(theta_1) ... sin(theta_{m-1}) sin(phi)
    x_1     = sin(theta_1) ... sin(theta_{m-1}) cos(phi)

The surface element is ``prod_j sin(theta_j)^(m - j) dtheta_j dphi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

TWO_PI = 2.0 * math.pi
POLE_NUDGE = 1e-9
DEFAULT_MAX_BLOCKS = 1_000_000


class BracketingFailure(RuntimeError):
    """The sampled values of f on a block do not bracket the target average."""


class PartitionTooLarge(ValueError):
    """Requested partition exceeds the configured block cap."""


def unit_vector(coords) -> np.ndarray:
    """Return ``coords`` renormalized onto the sphere.

    Rows whose norm is already 1 to within a few ulps are returned
    unchanged, so normalizing twice (for example after a JSON round trip)
    does not move the last bit.  Raises ``ValueError`` for zero or
    non-finite input.
    """
    x = np.asarray(coords, dtype=float)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    if not np.all(np.isfinite(x)) or np.any(norm == 0):
        raise ValueError("cannot normalize a zero or non-finite vector")
    norm = np.where(np.abs(norm - 1.0) <= 4 * np.finfo(float).eps, 1.0, norm)
    return x / norm


def spherical_to_cartesian(angles) -> np.ndarray:
    """Map angles of shape ``(..., m)`` to unit vectors of shape ``(..., m + 1)``."""
    a = np.asarray(angles, dtype=float)
    m = a.shape[-1]
    out = np.empty(a.shape[:-1] + (m + 1,))
    sin_prod = np.ones(a.shape[:-1])
    # colatitudes fill coordinates from the last one downwards
    for j in range(m - 1):
        out[..., m - j] = sin_prod * np.cos(a[..., j])
        sin_prod = sin_prod * np.sin(a[..., j])
    out[..., 1] = sin_prod * np.sin(a[..., m - 1])
    out[..., 0] = sin_prod * np.cos(a[..., m - 1])
    return out


def cartesian_to_spherical(x) -> np.ndarray:
    """Inverse of :func:`spherical_to_cartesian`.

    At coordinate degeneracies (poles) the undetermined angles are 0.
    """
    x = np.asarray(x, dtype=float)
    m = x.shape[-1] - 1
    out = np.empty(x.shape[:-1] + (m,))
    # tail norms r_j = ||(x_1, ..., x_j)||
    sq = np.cumsum(x**2, axis=-1)
    for j in range(m - 1):
        idx = m - j
        rest = np.sqrt(sq[..., idx - 1])
        out[..., j] = np.arctan2(rest, x[..., idx])
    phi = np.arctan2(x[..., 1], x[..., 0])
    out[..., m - 1] = np.mod(phi, TWO_PI)
    # arctan2(0, 0) = 0 already, but mod can map -0.0 rounding to 2 pi
    out[..., m - 1] = np.where(out[..., m - 1] >= TWO_PI, 0.0, out[..., m - 1])
    return out


def angle_domain(m: int) -> np.ndarray:
    """``(m, 2)`` array of coordinate domains ``[lo, hi]`` per angle."""
    dom = np.tile([0.0, math.pi], (m, 1))
    dom[-1] = [0.0, TWO_PI]
    return dom


def sin_power_integral(p: int, a, b):
    """Closed form of ``int_a^b sin(t)^p dt`` (vectorized over a, b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    def anti(t, q):
        if q == 0:
            return t
        if q == 1:
            return -np.cos(t)
        return -np.sin(t) ** (q - 1) * np.cos(t) / q + (q - 1) / q * anti(t, q - 2)

    return anti(b, p) - anti(a, p)


def _block_measures(m: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    meas = hi[..., m - 1] - lo[..., m - 1]
    for j in range(m - 1):
        meas = meas * sin_power_integral(m - 1 - j, lo[..., j], hi[..., j])
    return meas


@dataclass(frozen=True)
class CoordinateBlock:
    """Product of closed angle intervals; one ``(lo, hi)`` per angle."""

    intervals: tuple

    def __post_init__(self):
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        if not ivs:
            raise ValueError("a block needs at least one interval")
        dom = angle_domain(len(ivs))
        for (lo, hi), (dlo, dhi) in zip(ivs, dom):
            if not lo < hi:
                raise ValueError(f"degenerate interval [{lo}, {hi}]")
            if lo < dlo - 1e-15 or hi > dhi + 1e-12:
                raise ValueError(f"interval [{lo}, {hi}] outside domain [{dlo}, {dhi}]")

    @property
    def m(self) -> int:
        return len(self.intervals)

    @property
    def lo(self) -> np.ndarray:
        return np.array([iv[0] for iv in self.intervals])

    @property
    def hi(self) -> np.ndarray:
        return np.array([iv[1] for iv in self.intervals])

    def contains(self, angles, atol: float = 1e-12) -> np.ndarray:
        a = np.asarray(angles, dtype=float)
        return np.all((a >= self.lo - atol) & (a <= self.hi + atol), axis=-1)


@dataclass
class SphericalPartition:
    """Partition of S^m into coordinate blocks, stored as ``(N, m)`` bounds.

    ``measures[k]`` is the exact surface measure of block ``k``.
    """

    m: int
    lo: np.ndarray
    hi: np.ndarray
    measures: np.ndarray
    levels: tuple = ()
    cuts: tuple = ()

    def __len__(self):
        return len(self.measures)

    @property
    def blocks(self) -> list[CoordinateBlock]:
        return [CoordinateBlock(tuple(zip(l, h))) for l, h in zip(self.lo, self.hi)]

    def centers(self) -> np.ndarray:
        """Block centers as unit vectors, shape ``(N, m + 1)``."""
        return spherical_to_cartesian(_nudge_poles(0.5 * (self.lo + self.hi), self.m))

    def locate(self, x) -> np.ndarray:
        """Index of the block containing each point (product grids only)."""
        if not self.cuts:
            raise ValueError("locate requires a product-grid partition")
        ang = cartesian_to_spherical(x)
        idx = np.zeros(ang.shape[:-1], dtype=np.int64)
        for j, nj in enumerate(self.levels):
            cuts = self.cuts[j]
            pos = np.searchsorted(cuts, ang[..., j], side="right") - 1
            idx = idx * nj + np.clip(pos, 0, nj - 1)
        return idx

    def to_dict(self) -> dict:
        return {
            "m": int(self.m),
            "blocks": [
                {"intervals": [[float(a), float(b)] for a, b in zip(l, h)]}
                for l, h in zip(self.lo, self.hi)
            ],
            "measures": [float(v) for v in self.measures],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SphericalPartition":
        m = int(data["m"])
        iv = np.array([b["intervals"] for b in data["blocks"]], dtype=float)
        if iv.ndim != 3 or iv.shape[1:] != (m, 2):
            raise ValueError("block intervals do not match m")
        return cls(m, iv[..., 0].copy(), iv[..., 1].copy(), np.asarray(data["measures"], dtype=float))


def _cut_points(m: int, j: int, count: int, balanced: bool) -> np.ndarray:
    if j == m - 1:
        return np.linspace(0.0, TWO_PI, count + 1)
    if balanced and j == 0:
        # equal measure bands in theta_1 for S^2; arccos cuts for all m
        return np.arccos(np.linspace(1.0, -1.0, count + 1))
    return np.linspace(0.0, math.pi, count + 1)


def build_partition(
    m: int,
    levels: Sequence[int],
    balanced: bool = False,
    max_blocks: int = DEFAULT_MAX_BLOCKS,
) -> SphericalPartition:
    """Product-grid partition of S^m into ``prod(levels)`` coordinate blocks.

    Parameters
    ----------
    m : int
        Sphere dimension.
    levels : sequence of int
        Subdivision count per angle, ordered ``(theta_1, ..., phi)``.
    balanced : bool
        Cut the first colatitude at arccos-equispaced points instead of
        uniformly, which evens out block measures.
    max_blocks : int
        Resource cap on the number of blocks.
    """
    levels = tuple(int(v) for v in levels)
    if m < 1 or len(levels) != m:
        raise ValueError(f"need exactly {m} level counts, got {levels}")
    if any(v < 1 for v in levels):
        raise ValueError("level counts must be >= 1")
    total = math.prod(levels)
    if total > max_blocks:
        raise PartitionTooLarge(f"{total} blocks exceeds cap {max_blocks}")
    cuts = [_cut_points(m, j, levels[j], balanced) for j in range(m)]
    grids = np.meshgrid(*[np.arange(v) for v in levels], indexing="ij")
    lo = np.stack([cuts[j][g.ravel()] for j, g in enumerate(grids)], axis=-1)
    hi = np.stack([cuts[j][g.ravel() + 1] for j, g in enumerate(grids)], axis=-1)
    return SphericalPartition(m, lo, hi, _block_measures(m, lo, hi), levels, tuple(cuts))


def block_measure(m: int, block: CoordinateBlock) -> float:
    """Exact surface measure of a coordinate block."""
    if block.m != m:
        raise ValueError("block dimension does not match m")
    return float(_block_measures(m, block.lo, block.hi))


def _nudge_poles(angles: np.ndarray, m: int) -> np.ndarray:
    if m < 2:
        return angles
    a = angles.copy()
    a[..., : m - 1] = np.clip(a[..., : m - 1], POLE_NUDGE, math.pi - POLE_NUDGE)
    return a


def block_center(m: int, block: CoordinateBlock) -> np.ndarray:
    """Image of the angle-interval midpoints."""
    mid = 0.5 * (block.lo + block.hi)
    return spherical_to_cartesian(_nudge_poles(mid, m))


def _net(m: int, size: int) -> np.ndarray:
    return qmc.Halton(d=m, scramble=False).random(size + 1)[1:]


def mean_value_points(
    m: int,
    lo: np.ndarray,
    hi: np.ndarray,
    f: Callable[[np.ndarray], np.ndarray],
    target_avg: np.ndarray,
    net_size: int | None = None,
    iterations: int = 80,
    rtol: float = 1e-9,
):
    """Vectorized mean-value search over many blocks at once.

    For every block, look for ``y`` in the block with ``f(y) = target_avg``.
    The search walks a straight angle-space segment from the block center
    towards the net argmin or argmax (whichever lies on the other side of
    the target) and bisects; segments in a box stay inside the block, so
    the intermediate value theorem applies.

    Returns
    -------
    points : ndarray, shape (N, m + 1)
        Mean-value points, or block centers where the search failed.
    found : ndarray of bool, shape (N,)
        False where the net did not bracket ``target_avg``.
    """
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    target = np.asarray(target_avg, dtype=float).reshape(-1)
    nb = lo.shape[0]
    size = net_size or 64 * m
    width = hi - lo
    center = 0.5 * (lo + hi)

    u = _net(m, size)
    net = lo[:, None, :] + u[None, :, :] * width[:, None, :]
    net = np.concatenate([center[:, None, :], net], axis=1)
    net = _nudge_poles(net, m)
    vals = np.asarray(f(spherical_to_cartesian(net).reshape(-1, m + 1)), dtype=float)
    vals = vals.reshape(nb, size + 1)

    tol = rtol * np.maximum(1.0, np.abs(target))
    rows = np.arange(nb)
    f_center = vals[:, 0]
    i_min = np.argmin(vals, axis=1)
    i_max = np.argmax(vals, axis=1)
    bracketed = (vals[rows, i_min] <= target + tol) & (vals[rows, i_max] >= target - tol)

    # walk from the center towards whichever extreme crosses the target
    go_up = f_center < target
    end = np.where(go_up[:, None], net[rows, i_max], net[rows, i_min])
    start = net[:, 0]
    sign = np.where(go_up, 1.0, -1.0)

    a = np.zeros(nb)  # sign * (f - target) <= 0 side
    b = np.ones(nb)
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        p = start + mid[:, None] * (end - start)
        g = sign * (np.asarray(f(spherical_to_cartesian(p)), dtype=float) - target)
        below = g < 0
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)

    # pick whichever bracket end is closer in value
    pa = start + a[:, None] * (end - start)
    pb = start + b[:, None] * (end - start)
    fa = np.asarray(f(spherical_to_cartesian(pa)), dtype=float)
    fb = np.asarray(f(spherical_to_cartesian(pb)), dtype=float)
    use_b = np.abs(fb - target) < np.abs(fa - target)
    best = np.where(use_b[:, None], pb, pa)
    err = np.where(use_b, np.abs(fb - target), np.abs(fa - target))

    # the center itself may already be the mean-value point
    at_center = np.abs(f_center - target) <= np.minimum(err, tol)
    best = np.where(at_center[:, None], start, best)
    err = np.where(at_center, np.abs(f_center - target), err)

    found = bracketed & (err <= tol)
    best = np.where(found[:, None], best, start)
    return spherical_to_cartesian(best), found


def mean_value_point(
    m: int,
    block: CoordinateBlock,
    f: Callable[[np.ndarray], np.ndarray],
    target_avg: float,
    net_size: int | None = None,
) -> np.ndarray:
    """A point ``y`` of ``block`` with ``f(y) = target_avg``.

    ``f`` maps an ``(P, m + 1)`` array of unit vectors to ``P`` values.
    Raises :class:`BracketingFailure` when a sampling net of the block does
    not bracket the target.
    """
    pts, found = mean_value_points(
        m, block.lo[None], block.hi[None], f, np.array([target_avg]), net_size
    )
    if not found[0]:
        raise BracketingFailure(f"net values do not bracket {target_avg!r}")
    return pts[0]


def sample_uniform(m: int, count: int, seed: int | None = None) -> np.ndarray:
    """Uniform samples on S^m via normalized Gaussians."""
    rng = np.random.default_rng(seed)
    return unit_vector(rng.standard_normal((count, m + 1)))
