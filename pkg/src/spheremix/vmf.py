"""von Mises-Fisher densities, finite mixtures, the kernel sequence and sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from spheremix._parallel import map_rows
from spheremix.geometry import unit_vector
from spheremix.special import log_bessel_i, surface_measure


def log_norm_const(m: int, kappa: float) -> float:
    """``log c_{m+1}(kappa)`` for the vMF density on S^m.

    ``c = kappa^(p/2 - 1) / ((2 pi)^(p/2) I_{p/2-1}(kappa))`` with ``p = m + 1``.
    """
    if not kappa > 0 or not math.isfinite(kappa):
        raise ValueError(f"kappa must be finite and > 0, got {kappa!r}")
    v = 0.5 * (m + 1) - 1.0
    return v * math.log(kappa) - 0.5 * (m + 1) * math.log(2.0 * math.pi) - log_bessel_i(v, kappa)


@dataclass(frozen=True)
class VmfComponent:
    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "mu", unit_vector(self.mu))
        if not self.kappa > 0 or not math.isfinite(self.kappa):
            raise ValueError(f"kappa must be finite and > 0, got {self.kappa!r}")
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def m(self) -> int:
        return len(self.mu) - 1


def vmf_log_density(m: int, comp: VmfComponent, x) -> np.ndarray | float:
    """``log c_{m+1}(kappa) + kappa <x, mu>`` at points ``x`` of shape (..., m+1)."""
    x = np.asarray(x, dtype=float)
    if comp.m != m or x.shape[-1] != m + 1:
        raise ValueError("dimension mismatch")
    out = log_norm_const(m, comp.kappa) + comp.kappa * (x @ comp.mu)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class VmfMixture:
    """Finite vMF mixture ``sum_h w_h f(x; mu_h, kappa_h)`` on S^m.

    Stored column-wise for vectorized evaluation: ``mus`` has shape
    ``(H, m + 1)``, ``kappas`` and ``weights`` shape ``(H,)``.
    """

    mus: np.ndarray
    kappas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.mus = unit_vector(np.atleast_2d(np.asarray(self.mus, dtype=float)))
        self.kappas = np.asarray(self.kappas, dtype=float).reshape(-1)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        h = len(self.mus)
        if h < 1 or len(self.kappas) != h or len(self.weights) != h:
            raise ValueError("mus, kappas and weights must share a length >= 1")
        if np.any(~np.isfinite(self.kappas)) or np.any(self.kappas <= 0):
            raise ValueError("all kappas must be finite and > 0")
        if np.any(~np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValueError("weights must be finite and non-negative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {self.weights.sum()!r}, expected 1")
        self._log_c = np.array([log_norm_const(self.m, k) for k in self.kappas])

    @property
    def m(self) -> int:
        return self.mus.shape[1] - 1

    def __len__(self):
        return len(self.weights)

    @property
    def components(self) -> list[VmfComponent]:
        return [VmfComponent(mu, k) for mu, k in zip(self.mus, self.kappas)]

    @classmethod
    def from_components(cls, components, weights) -> "VmfMixture":
        comps = list(components)
        return cls(
            np.array([c.mu for c in comps]), np.array([c.kappa for c in comps]), weights
        )

    def log_density(self, x, threads: int | None = 1) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        rows = x.reshape(-1, self.m + 1)
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        offset = log_w + self._log_c

        def chunk(r):
            return logsumexp(offset + (r @ self.mus.T) * self.kappas, axis=1)

        return map_rows(chunk, rows, len(self), threads).reshape(shape)

    def density(self, x, threads: int | None = 1) -> np.ndarray:
        # sum_h exp(log w_h + log c_h + kappa_h) * exp(kappa_h (t - 1)): the
        # first factor is O(kappa^((m+1)/2)) and the second lies in (0, 1],
        # so nothing overflows; rows that underflow to 0 are redone in logs.
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        rows = x.reshape(-1, self.m + 1)
        scale = self.weights * np.exp(self._log_c + self.kappas)
        kappas, mus_t = self.kappas, self.mus.T

        def chunk(r):
            e = r @ mus_t
            e -= 1.0
            e *= kappas
            np.exp(e, out=e)
            return e @ scale

        out = map_rows(chunk, rows, len(self), threads)
        low = out < 1e-280
        if np.any(low):
            out[low] = np.exp(self.log_density(rows[low], threads))
        return out.reshape(shape)

    def __call__(self, x):
        return self.density(x)

    def to_dict(self) -> dict:
        return {
            "m": int(self.m),
            "components": [
                {"mu": [float(v) for v in mu], "kappa": float(k)}
                for mu, k in zip(self.mus, self.kappas)
            ],
            "weights": [float(w) for w in self.weights],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VmfMixture":
        comps = data["components"]
        mix = cls(
            np.array([c["mu"] for c in comps], dtype=float),
            np.array([c["kappa"] for c in comps], dtype=float),
            np.array(data["weights"], dtype=float),
        )
        if "m" in data and int(data["m"]) != mix.m:
            raise ValueError(f"declared m={data['m']} but mean directions have m={mix.m}")
        return mix


def mixture_density(mix: VmfMixture, x, threads: int | None = 1):
    """Mixture density at ``x``; log-sum-exp keeps large kappa finite."""
    out = mix.density(x, threads)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class VmfKernel:
    """The zonal kernel ``K_n(t) = c_{m+1}(n) exp(n t)``.

    :meth:`density` is that formula literally: the vMF density of a
    component whose mean has inner product ``t`` with the evaluation point.
    Calling the kernel (the zonal-kernel contract used by
    :mod:`spheremix.spectral`) returns ``omega_m * density``, i.e. the same
    density taken with respect to the normalized surface measure
    ``d omega / omega_m``, which is the measure convolution and the
    eigenvalues ``a_k`` are defined against.  With this scaling
    ``a_0(K_n) = 1`` and ``K_n * f`` equals ``int f_vmf(x; y, n) f(y) d omega(y)``.
    """

    m: int
    n: float

    def __post_init__(self):
        if not self.n > 0:
            raise ValueError(f"n must be > 0, got {self.n!r}")

    @property
    def log_c(self) -> float:
        return log_norm_const(self.m, self.n)

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(np.abs(t) > 1.0):
            raise ValueError("t must lie in [-1, 1]")
        return t

    def log_density(self, t):
        return self.log_c + self.n * self._check(t)

    def density(self, t):
        return np.exp(self.log_density(t))

    def log(self, t):
        return math.log(surface_measure(self.m)) + self.log_density(t)

    def __call__(self, t):
        return np.exp(self.log(t))


def kernel_eval(kernel: VmfKernel, t):
    """``c_{m+1}(n) e^{n t}``, the vMF density at inner product ``t``."""
    out = kernel.density(t)
    return float(out) if np.ndim(out) == 0 else out


def _sample_component(rng, mu: np.ndarray, kappa: float, count: int) -> np.ndarray:
    if count == 0:
        return np.empty((0, len(mu)))
    x = stats.vonmises_fisher(mu, kappa).rvs(count, random_state=rng)
    return unit_vector(np.reshape(x, (count, len(mu))))


def sample_vmf(m: int, comp: VmfComponent, count: int, seed: int | None = None) -> np.ndarray:
    """``count`` draws from one vMF component, shape ``(count, m + 1)``."""
    if comp.m != m:
        raise ValueError("dimension mismatch")
    if count < 0:
        raise ValueError("count must be >= 0")
    return _sample_component(np.random.default_rng(seed), comp.mu, comp.kappa, count)


def sample_mixture(mix: VmfMixture, count: int, seed: int | None = None) -> np.ndarray:
    """Categorical draw on the weights, then per-component vMF draws.

    Output rows keep the order of the categorical labels.  A single
    component mixture reproduces :func:`sample_vmf` with the same seed.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.default_rng(seed)
    if len(mix) == 1:
        return _sample_component(rng, mix.mus[0], mix.kappas[0], count)
    labels = rng.choice(len(mix), size=count, p=mix.weights / mix.weights.sum())
    out = np.empty((count, mix.m + 1))
    for h in range(len(mix)):
        sel = labels == h
        out[sel] = _sample_component(rng, mix.mus[h], mix.kappas[h], int(sel.sum()))
    return out
