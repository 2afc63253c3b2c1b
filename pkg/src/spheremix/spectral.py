"""Funk-Hecke eigenvalues, kernel norms, tail diagnostics and spherical convolution.

A zonal kernel is any callable ``K(t)`` on ``[-1, 1]`` (vectorized over
arrays).  Kernels that may overflow also expose ``K.log(t)``; the vMF
kernel does.  All weighted integrals carry the factor
``omega_{m-1} / omega_m``, so a kernel whose mass against the normalized
surface measure is one has ``a_0 = 1``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from spheremix._parallel import map_rows
from spheremix.quadrature import (
    IntervalRule,
    QuadratureNotConverged,
    SphereRule,
    cap_measure,
    interval_rule,
    sphere_rule,
)
from spheremix.special import gegenbauer_ratio, surface_measure
from spheremix.vmf import VmfKernel

DEFAULT_ORDER = 64
MAX_ORDER = 1 << 12


def _mass_ratio(m: int) -> float:
    return surface_measure(m - 1) / surface_measure(m)


def _weighted(
    g: Callable[[np.ndarray], np.ndarray],
    m: int,
    lo: float,
    hi: float,
    rule: IntervalRule | None,
    order: int,
    rtol: float,
) -> float:
    """Weighted integral; uses ``rule`` as-is, else doubles until converged.

    The stopping test is relative to the result, with a floor of a few ulps
    of ``int |g|`` so integrals that vanish exactly (orthogonality) stop too.
    """
    if rule is not None:
        return rule.integrate(g)
    r = interval_rule(m, order, lo, hi)
    gv = np.asarray(g(r.nodes), dtype=float)
    prev = float(r.weights @ gv)
    while order < MAX_ORDER:
        order *= 2
        r = interval_rule(m, order, lo, hi)
        gv = np.asarray(g(r.nodes), dtype=float)
        cur = float(r.weights @ gv)
        floor = 64 * np.finfo(float).eps * float(r.weights @ np.abs(gv))
        if abs(cur - prev) <= max(rtol * abs(cur), floor):
            return cur
        prev = cur
    raise QuadratureNotConverged(f"weighted integral did not settle by order {MAX_ORDER}")


def _kernel_values(kernel, t: np.ndarray) -> np.ndarray:
    if hasattr(kernel, "log"):
        return np.exp(kernel.log(t))
    return np.asarray(kernel(t), dtype=float)


def funk_hecke_coefficient(
    m: int,
    kernel,
    k: int,
    rule: IntervalRule | None = None,
    order: int = DEFAULT_ORDER,
    rtol: float = 1e-10,
) -> float:
    """Eigenvalue ``a_k^m(K)`` of convolution with ``kernel``.

    ``(omega_{m-1}/omega_m) int K(t) Q_k(t)/Q_k(1) (1-t^2)^((m-2)/2) dt``.
    Without an explicit ``rule`` the node count doubles from ``order``
    until two successive values agree to ``rtol``.
    """
    if k < 0:
        raise ValueError("degree must be >= 0")

    def g(t):
        return _kernel_values(kernel, t) * gegenbauer_ratio(m, k, t)

    return _mass_ratio(m) * _weighted(g, m, -1.0, 1.0, rule, order, rtol)


@dataclass
class FunkHeckeCoefficients:
    m: int
    kernel: str
    values: np.ndarray

    @property
    def kmax(self) -> int:
        return len(self.values) - 1


def funk_hecke_spectrum(m: int, kernel, kmax: int, **kw) -> FunkHeckeCoefficients:
    vals = np.array([funk_hecke_coefficient(m, kernel, k, **kw) for k in range(kmax + 1)])
    return FunkHeckeCoefficients(m, repr(kernel), vals)


def kernel_l1m_norm(
    m: int, kernel, rule: IntervalRule | None = None, order: int = DEFAULT_ORDER, rtol: float = 1e-10
) -> float:
    """``||K||_{1,m} = (omega_{m-1}/omega_m) int |K(t)| (1-t^2)^((m-2)/2) dt``.

    ``|K|`` has a kink wherever ``K`` changes sign, which stalls Gauss
    rules; without an explicit ``rule`` the integral is split at sign
    changes found on a fine Chebyshev-spaced grid and refined by ``brentq``.
    """

    def g(t):
        return np.abs(_kernel_values(kernel, t))

    if rule is not None:
        return _mass_ratio(m) * rule.integrate(g)
    return _mass_ratio(m) * sum(
        _weighted(g, m, lo, hi, None, order, rtol) for lo, hi in _sign_pieces(kernel)
    )


def _sign_pieces(kernel, samples: int = 2049):
    t = np.cos(np.linspace(math.pi, 0.0, samples))
    v = _kernel_values(kernel, t)
    cuts = [-1.0]
    for i in np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0):
        f = lambda s: float(_kernel_values(kernel, np.array([s]))[0])  # noqa: E731
        cuts.append(optimize.brentq(f, t[i], t[i + 1], xtol=1e-15))
    cuts.append(1.0)
    return [(a, b) for a, b in zip(cuts, cuts[1:]) if b > a]


def condition2_tail(
    m: int,
    kernel,
    rho: float,
    rule: IntervalRule | None = None,
    order: int = DEFAULT_ORDER,
    rtol: float = 1e-10,
) -> float:
    """Mass of ``|K|`` on ``[-1, rho]``, scaled by ``omega_{m-1}/omega_m``.

    For the vMF kernel this is the probability that a vMF(n) draw has
    inner product at most ``rho`` with its mean; the integrand is scaled by
    its value at ``rho`` internally so tiny tails keep full relative
    precision.
    """
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (-1, 1), got {rho!r}")
    if rule is not None and rule.hi != rho:
        raise ValueError("rule must cover [-1, rho]")
    if hasattr(kernel, "log"):
        shift = float(np.max(kernel.log(np.array([-1.0, rho]))))

        def g(t):
            return np.exp(kernel.log(t) - shift)

    else:
        shift = 0.0

        def g(t):
            return np.abs(np.asarray(kernel(t), dtype=float))

    val = _weighted(g, m, -1.0, rho, rule, order, rtol)
    return _mass_ratio(m) * val * math.exp(shift)


def lemma2_bound(m: int, n: float, rho: float, delta: float | None = None) -> float:
    """Explicit tail bound for the vMF kernel from comparing two caps.

    ``omega({<x,y> <= rho}) e^{n rho} / (e^{n (1 - delta)} omega(B_delta))``
    with ``B_delta = {<x,y> >= 1 - delta}``; requires ``1 - delta > rho``.
    The default ``delta = (1 - rho) / 2`` sits midway in the admissible range.
    """
    if delta is None:
        delta = 0.5 * (1.0 - rho)
    if not (0.0 < delta and 1.0 - delta > rho):
        raise ValueError("need delta > 0 and 1 - delta > rho")
    low = cap_measure(m, -1.0, rho)
    ball = cap_measure(m, 1.0 - delta, 1.0)
    return low / ball * math.exp(-n * (1.0 - delta - rho))


@dataclass
class TailReport:
    m: int
    rho: float
    ns: list
    tails: list
    bounds: list

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.tails, self.tails[1:]))

    @property
    def bounded(self) -> bool:
        return all(t <= b for t, b in zip(self.tails, self.bounds))


def tail_report(m: int, ns: Sequence[float], rho: float, delta: float | None = None) -> TailReport:
    ns = list(ns)
    tails = [condition2_tail(m, VmfKernel(m, n), rho) for n in ns]
    bounds = [lemma2_bound(m, n, rho, delta) for n in ns]
    return TailReport(m, rho, ns, tails, bounds)


def zonal_harmonic(m: int, k: int, axis) -> Callable[[np.ndarray], np.ndarray]:
    """Zonal harmonic ``y -> Q_k(<y, axis>) / Q_k(1)``, maximal value 1."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)

    def y(x):
        return gegenbauer_ratio(m, k, np.clip(np.asarray(x) @ axis, -1.0, 1.0))

    return y


def spherical_convolve(
    m: int,
    kernel,
    f: Callable[[np.ndarray], np.ndarray] | np.ndarray,
    x,
    rule: SphereRule | None = None,
    threads: int | None = 1,
):
    """``(K * f)(x) = (1/omega_m) int K(<x, y>) f(y) d omega(y)`` by quadrature.

    ``f`` is either a callable on ``(P, m + 1)`` arrays or its values at the
    rule points (pass one array to share the work across many calls).
    ``x`` may be a single point or a batch of shape ``(P, m + 1)``.
    """
    rule = rule or sphere_rule(m)
    fv = f if isinstance(f, np.ndarray) else np.asarray(f(rule.points), dtype=float)
    if fv.ndim == 1:
        fv = fv[:, None]
    wf = rule.weights[:, None] * fv / surface_measure(m)
    x = np.asarray(x, dtype=float)
    rows = np.atleast_2d(x)
    pts_t = rule.points.T
    if isinstance(kernel, VmfKernel):
        # K(t) = K(1) exp(n (t - 1)), evaluated in place on the big block
        n = kernel.n
        wf = wf * math.exp(kernel.log(1.0))

        def chunk(r):
            e = r @ pts_t
            e -= 1.0
            np.minimum(e, 0.0, out=e)
            e *= n
            np.exp(e, out=e)
            return e @ wf

    else:
        has_log = hasattr(kernel, "log")

        def chunk(r):
            t = np.clip(r @ pts_t, -1.0, 1.0)
            kv = np.exp(kernel.log(t)) if has_log else kernel(t)
            return kv @ wf

    out = map_rows(chunk, rows, len(rule), threads)
    if out.shape[1] == 1:
        out = out[:, 0]
    return out[0] if x.ndim == 1 else out


@dataclass
class Lemma1Report:
    """Condition-1 and condition-2 diagnostics over a set of kernels ``K_n``."""

    m: int
    ns: list
    rhos: list
    a0: list
    tails: dict  # rho -> list over ns
    bounds: dict  # rho -> list over ns
    spectra: list  # per n, a_0..a_kmax
    violations: list = field(default_factory=list)

    def rows(self):
        for i, n in enumerate(self.ns):
            for rho in self.rhos:
                yield {
                    "m": self.m,
                    "n": n,
                    "a_0": self.a0[i],
                    "rho": rho,
                    "tail": self.tails[rho][i],
                    "bound": self.bounds[rho][i],
                }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["m", "n", "a_0", "rho", "tail", "bound"], lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()

    def spectrum_csv(self) -> str:
        kmax = len(self.spectra[0]) - 1 if self.spectra else -1
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "n"] + [f"a_{k}" for k in range(kmax + 1)])
        for n, spec in zip(self.ns, self.spectra):
            w.writerow([self.m, n] + [repr(float(v)) for v in spec])
        return buf.getvalue()


def lemma1_report(
    m: int, ns: Sequence[float], rhos: Sequence[float], kmax: int = 4, a0_tol: float = 1e-8
) -> Lemma1Report:
    """Tabulate ``a_0``, tails and spectra of ``K_n`` and flag anything off.

    Flags: ``a_0`` off 1 by more than ``a0_tol``; tails not strictly
    decreasing in n; a tail above its explicit bound; ``a_k`` not
    increasing in n (ns are sorted first).
    """
    ns = sorted(float(n) for n in ns)
    rhos = [float(r) for r in rhos]
    if not ns:
        raise ValueError("need at least one n")
    kernels = [VmfKernel(m, n) for n in ns]
    spectra = [[funk_hecke_coefficient(m, K, k) for k in range(kmax + 1)] for K in kernels]
    a0 = [s[0] for s in spectra]
    tails = {r: [condition2_tail(m, K, r) for K in kernels] for r in rhos}
    bounds = {r: [lemma2_bound(m, n, r) for n in ns] for r in rhos}
    rep = Lemma1Report(m, ns, rhos, a0, tails, bounds, spectra)
    for n, a in zip(ns, a0):
        if abs(a - 1.0) > a0_tol:
            rep.violations.append(f"a_0(K_{n:g}) = {a!r} is not within {a0_tol} of 1")
    for r in rhos:
        t = tails[r]
        for i in range(1, len(ns)):
            if not t[i] < t[i - 1]:
                rep.violations.append(f"tail at rho={r} does not decrease from n={ns[i-1]:g} to n={ns[i]:g}")
        for n, tv, bv in zip(ns, t, bounds[r]):
            if tv > bv:
                rep.violations.append(f"tail {tv!r} exceeds bound {bv!r} at n={n:g}, rho={r}")
    for k in range(1, kmax + 1):
        for i in range(1, len(ns)):
            if not spectra[i][k] > spectra[i - 1][k]:
                rep.violations.append(f"a_{k} does not increase from n={ns[i-1]:g} to n={ns[i]:g}")
    return rep
