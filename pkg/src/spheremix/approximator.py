"""Build vMF mixtures that approximate a density on S^m in the sup norm.

The construction follows the two-stage error split

    |f - sum_k c_k K_n(<., y_k>)|
        <= |f - K_n * f|                      (convolution stage, shrinks with n)
         + |K_n * f - sum_k c_k K_n(<., y_k>)|   (Riemann-sum stage, shrinks with N)

where ``c_k`` is the integral of f over block ``U_k`` (renormalized to sum
to one) and ``y_k`` is a mean-value point of f in ``U_k``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from spheremix._parallel import map_rows
from spheremix.geometry import SphericalPartition, build_partition, mean_value_points
from spheremix.quadrature import SphereRule, SupGrid, block_rules, sphere_rule, sup_grid
from spheremix.special import surface_measure
from spheremix.spectral import spherical_convolve
from spheremix.vmf import VmfKernel, VmfMixture

log = logging.getLogger(__name__)

SUP_DISCLAIMER = (
    "sup_error is the maximum over a finite grid; between grid points the error "
    "is only controlled through a modulus of continuity of f, which is not known."
)


class NonDensity(ValueError):
    """Target is negative somewhere or does not integrate to one."""


class BudgetExhausted(RuntimeError):
    """Raised by ``approximate(..., strict=True)``; carries the best report."""

    def __init__(self, report: "ApproximationReport"):
        super().__init__(
            f"sup error {report.sup_error:.3g} >= delta {report.delta:.3g} "
            f"at n={report.n:g}, N={len(report.mixture)}"
        )
        self.report = report


@dataclass
class TargetDensity:
    """A continuous probability density on S^m.

    ``func`` maps an array of unit vectors of shape ``(P, m + 1)`` to ``P``
    non-negative values.  The total mass is checked once on construction
    with a product sphere rule.
    """

    m: int
    func: Callable[[np.ndarray], np.ndarray]
    name: str = "target"
    continuous: bool = True
    concurrent_safe: bool = False
    integral_tol: float = 1e-6
    check_orders: tuple | None = None
    integral: float = field(init=False, default=float("nan"))

    def __post_init__(self):
        rule = sphere_rule(self.m, self.check_orders)
        vals = self(rule.points)
        if np.any(~np.isfinite(vals)) or np.any(vals < 0):
            raise NonDensity(f"{self.name}: negative or non-finite values")
        self.integral = float(rule.weights @ vals)
        if abs(self.integral - 1.0) > self.integral_tol:
            raise NonDensity(f"{self.name}: integrates to {self.integral!r}, not 1")

    def __call__(self, x, threads: int | None = 1) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        rows = x.reshape(-1, self.m + 1)
        nthreads = threads if self.concurrent_safe else 1
        out = map_rows(lambda r: np.asarray(self.func(r), dtype=float), rows, 64, nthreads)
        return out.reshape(x.shape[:-1])

    @classmethod
    def from_mixture(cls, mix: VmfMixture, name: str = "mixture", **kw) -> "TargetDensity":
        return cls(mix.m, mix.density, name=name, concurrent_safe=True, **kw)


def default_levels(m: int) -> tuple:
    """Coarsest partition used by the engine: 2 bands per colatitude, 3 azimuth.

    The 2:3 aspect keeps blocks near the equator roughly square after
    refinement on S^2, which measurably lowers the Riemann-sum term at a
    fixed block count compared with equal angular steps (2:4).
    """
    if m == 1:
        return (4,)
    return (2,) * (m - 1) + (3,)


def default_sup_resolution(m: int) -> int:
    return 4096 if m == 1 else 20_000


def convolution_rule(m: int, n: float) -> SphereRule:
    """Sphere rule fine enough for ``K_n * f`` with a smooth ``f``.

    Node spacing shrinks like ``1 / sqrt(n)``, the angular width of ``K_n``.
    """
    scale = math.sqrt(max(n, 1.0))
    colat = max(128, int(math.ceil(8.0 * scale)))
    if m == 1:
        return sphere_rule(1, (max(256, int(math.ceil(16.0 * scale))),))
    if m == 2:
        return sphere_rule(2, (colat, 2 * colat))
    base = max(24, int(math.ceil(4.0 * scale)))
    return sphere_rule(m, (base,) * (m - 1) + (2 * base,))


@dataclass
class ApproximationConfig:
    """Search schedule and budgets for :func:`approximate`.

    ``levels`` grow geometrically by ``refine_factor`` from
    ``initial_levels``; ``n`` grows by ``n_growth`` from ``n_initial`` up to
    ``max_n``.
    """

    delta: float
    n_initial: float = 1.0
    n_growth: float = 2.0
    max_n: float = 512.0
    initial_levels: tuple | None = None
    refine_factor: float = math.sqrt(2.0)
    max_blocks: int = 20_000
    max_stages: int = 200
    sup_resolution: int | None = None
    block_order: int = 6
    net_size: int | None = None
    balanced: bool = False
    plateau_ratio: float = 0.9
    drop_threshold: float = 1e-14
    threads: int | None = 1

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta!r}")
        if not self.n_initial > 0:
            raise ValueError("n_initial must be > 0")
        if not self.n_growth > 1:
            raise ValueError("n_growth must be > 1")
        if not self.refine_factor > 1:
            raise ValueError("refine_factor must be > 1")
        if self.max_blocks < 1 or self.max_stages < 1:
            raise ValueError("budgets must be positive")


@dataclass
class Stage:
    n: float
    N: int
    sup_error: float
    convolution_error: float
    discretization_error: float
    accepted: bool
    levels: tuple = ()


@dataclass
class Construction:
    mixture: VmfMixture
    found: np.ndarray  # per retained block: mean-value point found
    integrals: np.ndarray  # per block of the partition
    kept: np.ndarray  # indices of retained blocks


@dataclass
class ApproximationReport:
    mixture: VmfMixture
    n: float
    partition: SphericalPartition
    sup_error: float
    sup_point: np.ndarray
    history: list
    modes: list
    convolution_error: float
    discretization_error: float
    converged: bool
    delta: float
    sup_f: float
    mesh_norm: float
    target: str = "target"
    balanced: bool = False
    elapsed: float = 0.0

    @property
    def N(self) -> int:
        return len(self.mixture)

    def to_dict(self) -> dict:
        modes = np.asarray(self.modes)
        return {
            "target": self.target,
            "m": int(self.mixture.m),
            "delta": float(self.delta),
            "converged": bool(self.converged),
            "n": float(self.n),
            "N": int(self.N),
            "sup_error": float(self.sup_error),
            "sup_point": [float(v) for v in self.sup_point],
            "sup_f": float(self.sup_f),
            "convolution_error": float(self.convolution_error),
            "discretization_error": float(self.discretization_error),
            "mesh_norm": float(self.mesh_norm),
            "partition": {
                "levels": [int(v) for v in self.partition.levels],
                "balanced": bool(self.balanced),
                "blocks": len(self.partition),
            },
            "modes": {
                "mean_value": int(np.sum(modes == "mean_value")),
                "fallback": int(np.sum(modes == "fallback")),
            },
            "fallback_components": [int(i) for i in np.flatnonzero(modes == "fallback")],
            "history": [
                {
                    "n": float(s.n),
                    "N": int(s.N),
                    "sup_error": float(s.sup_error),
                    "convolution_error": float(s.convolution_error),
                    "discretization_error": float(s.discretization_error),
                    "accepted": bool(s.accepted),
                    "levels": [int(v) for v in s.levels],
                }
                for s in self.history
            ],
            "elapsed_seconds": float(self.elapsed),
            "disclaimer": SUP_DISCLAIMER,
            "mixture": self.mixture.to_dict(),
        }

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "n", "N", "sup_error", "convolution_error", "discretization_error", "accepted"])
        for i, s in enumerate(self.history):
            w.writerow(
                [i, repr(float(s.n)), s.N, repr(float(s.sup_error)), repr(float(s.convolution_error)),
                 repr(float(s.discretization_error)), int(s.accepted)]
            )
        return buf.getvalue()


def _construct(
    f: TargetDensity,
    n: float,
    partition: SphericalPartition,
    block_order: int = 6,
    net_size: int | None = None,
    drop_threshold: float = 1e-14,
    threads: int | None = 1,
) -> Construction:
    m = partition.m
    pts, wts = block_rules(m, partition.lo, partition.hi, block_order)
    fv = f(pts.reshape(-1, m + 1), threads).reshape(wts.shape)
    integrals = np.sum(fv * wts, axis=1)
    omega = surface_measure(m)
    kept = np.flatnonzero(integrals > drop_threshold * partition.measures / omega)
    if len(kept) == 0:
        raise NonDensity("every block has zero mass")
    avg = integrals[kept] / partition.measures[kept]
    ys, found = mean_value_points(
        m, partition.lo[kept], partition.hi[kept], lambda x: f(x, threads), avg, net_size
    )
    weights = integrals[kept] / integrals[kept].sum()
    mix = VmfMixture(ys, np.full(len(kept), float(n)), weights)
    return Construction(mix, found, integrals, kept)


def construct_mixture(
    f: TargetDensity,
    n: float,
    partition: SphericalPartition,
    block_order: int = 6,
    net_size: int | None = None,
    drop_threshold: float = 1e-14,
) -> VmfMixture:
    """One vMF component per block: mean ``y_k``, concentration ``n``, weight ``c_k``.

    ``c_k`` is the block integral of ``f`` divided by the sum of all block
    integrals; ``y_k`` is a mean-value point of ``f`` in the block (the block
    center when the search cannot bracket the average).  Blocks with
    integral below ``drop_threshold * measure / omega_m`` are dropped.
    """
    return _construct(f, n, partition, block_order, net_size, drop_threshold).mixture


def estimate_sup_error(f: TargetDensity, mix: VmfMixture, grid: SupGrid, threads: int | None = 1):
    """``max |f - mixture|`` over the grid and the point where it is attained."""
    diff = np.abs(f(grid.points, threads) - mix.density(grid.points, threads))
    i = int(np.argmax(diff))
    return float(diff[i]), grid.points[i]


def _refined(initial: tuple, factor: float, step: int, prev: tuple) -> tuple:
    return tuple(
        max(p + 1, int(round(l * factor**step))) for l, p in zip(initial, prev)
    )


def _fill_budget(levels: tuple, max_blocks: int) -> tuple:
    """Scale ``levels`` uniformly to the largest block count within the cap."""
    m = len(levels)
    scale = (max_blocks / math.prod(levels)) ** (1.0 / m)
    out = [max(1, int(l * scale)) for l in levels]
    for i in range(m):  # spend any slack left by flooring, one axis at a time
        while math.prod(out[:i] + [out[i] + 1] + out[i + 1 :]) <= max_blocks:
            out[i] += 1
    return tuple(max(o, l) for o, l in zip(out, levels))


def approximate(
    f: TargetDensity,
    config: ApproximationConfig,
    strict: bool = False,
    grid: SupGrid | None = None,
) -> ApproximationReport:
    """Search ``(n, partition)`` until the grid sup error drops below ``delta``.

    For each ``n`` the partition is refined until the Riemann-sum term is at
    most ``delta / 2`` or stops improving (ratio above ``plateau_ratio``),
    then ``n`` grows.  Stages whose sup error beats every earlier stage are
    marked accepted; the report carries the best accepted mixture.  When
    the budget runs out the report has ``converged = False`` (or
    :class:`BudgetExhausted` is raised if ``strict``).
    """
    t0 = time.perf_counter()
    m = f.m
    cfg = config
    if not f.continuous:
        raise ValueError("target must be declared continuous")
    grid = grid or sup_grid(m, cfg.sup_resolution or default_sup_resolution(m))
    f_grid = f(grid.points, cfg.threads)
    sup_f = float(np.max(f_grid))
    init = tuple(cfg.initial_levels or default_levels(m))
    levels, step = init, 0

    history: list[Stage] = []
    best = None
    n = float(cfg.n_initial)
    converged = False

    while True:
        kernel = VmfKernel(m, n)
        rule = convolution_rule(m, n)
        conv = spherical_convolve(m, kernel, f(rule.points, cfg.threads), grid.points, rule, cfg.threads)
        conv_err = float(np.max(np.abs(f_grid - conv)))
        prev_disc = math.inf
        while True:
            part = build_partition(m, levels, cfg.balanced, cfg.max_blocks)
            cons = _construct(f, n, part, cfg.block_order, cfg.net_size, cfg.drop_threshold, cfg.threads)
            g = cons.mixture.density(grid.points, cfg.threads)
            err = np.abs(f_grid - g)
            i = int(np.argmax(err))
            total = float(err[i])
            disc = float(np.max(np.abs(conv - g)))
            accepted = best is None or total < best[0]
            history.append(Stage(n, len(cons.mixture), total, conv_err, disc, accepted, part.levels))
            log.info("n=%g N=%d sup=%.4g conv=%.4g disc=%.4g", n, len(cons.mixture), total, conv_err, disc)
            if accepted:
                best = (total, n, part, cons, grid.points[i], conv_err, disc)
            if total < cfg.delta:
                converged = True
                break
            if len(history) >= cfg.max_stages:
                break
            if disc <= 0.5 * cfg.delta or disc > cfg.plateau_ratio * prev_disc:
                break
            nxt = _refined(init, cfg.refine_factor, step + 1, levels)
            if math.prod(nxt) > cfg.max_blocks:
                # one last step that spends the remaining block budget
                nxt = _fill_budget(levels, cfg.max_blocks)
                if math.prod(nxt) <= math.prod(levels):
                    break
            levels, step, prev_disc = nxt, step + 1, disc
        if converged or len(history) >= cfg.max_stages:
            break
        if n * cfg.n_growth > cfg.max_n * (1 + 1e-12):
            break
        n *= cfg.n_growth

    total, n_best, part, cons, point, conv_err, disc = best
    modes = ["mean_value" if ok else "fallback" for ok in cons.found]
    report = ApproximationReport(
        cons.mixture, n_best, part, total, point, history, modes, conv_err, disc,
        converged, cfg.delta, sup_f, grid.mesh_norm, f.name, cfg.balanced,
        time.perf_counter() - t0,
    )
    if strict and not converged:
        raise BudgetExhausted(report)
    return report


@dataclass
class StudyRow:
    n: float
    N: int
    levels: tuple
    sup_error: float
    convolution_term: float
    discretization_term: float


def convergence_study(
    f: TargetDensity,
    ns: Sequence[float],
    level_schedule: Sequence[Sequence[int]],
    grid: SupGrid | None = None,
    block_order: int = 6,
    threads: int | None = 1,
) -> list[StudyRow]:
    """Error table over a grid of ``(n, partition)`` constructions.

    The convolution term ``max |f - K_n * f|`` and the Riemann-sum term
    ``max |K_n * f - mixture|`` are measured on the same fixed grid as the
    total error, so ``total <= convolution + discretization`` holds pointwise.
    """
    m = f.m
    grid = grid or sup_grid(m, default_sup_resolution(m))
    f_grid = f(grid.points, threads)
    rows = []
    for n in ns:
        rule = convolution_rule(m, n)
        conv = spherical_convolve(m, VmfKernel(m, n), f(rule.points, threads), grid.points, rule, threads)
        conv_err = float(np.max(np.abs(f_grid - conv)))
        for levels in level_schedule:
            part = build_partition(m, levels)
            mix = _construct(f, n, part, block_order, threads=threads).mixture
            g = mix.density(grid.points, threads)
            rows.append(
                StudyRow(
                    float(n), len(mix), tuple(levels),
                    float(np.max(np.abs(f_grid - g))), conv_err,
                    float(np.max(np.abs(conv - g))),
                )
            )
    return rows


def study_csv(rows: Sequence[StudyRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "N", "levels", "sup_error", "convolution_term", "discretization_term"])
    for r in rows:
        w.writerow([repr(r.n), r.N, "x".join(map(str, r.levels)), repr(r.sup_error),
                    repr(r.convolution_term), repr(r.discretization_term)])
    return buf.getvalue()
