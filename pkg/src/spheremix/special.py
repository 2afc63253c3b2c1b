"""Scalar special functions used throughout the package.

Everything here is evaluated in log space where overflow is possible:
the vMF normalizing constant needs ``I_v(kappa)`` for ``kappa`` up to
``1e4``, far past the double-precision range of ``I_v`` itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc


@dataclass(frozen=True)
class HarmonicDegreeSpec:
    """Sphere dimension ``m`` (S^m in R^{m+1}) and harmonic degree ``k``."""

    m: int
    k: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be an integer >= 1, got {self.m!r}")
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"k must be an integer >= 0, got {self.k!r}")

    @property
    def dimension(self) -> int:
        return harmonic_dimension(self.m, self.k)


def _check_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def log_bessel_i(v, x):
    """Natural log of the modified Bessel function ``I_v(x)``.

    Parameters
    ----------
    v : float
        Order, ``v >= 0``.
    x : float or ndarray
        Argument, ``x > 0``.

    Returns
    -------
    float or ndarray
        ``log I_v(x)``, computed from the exponentially scaled ``ive`` so
        that no intermediate overflows.
    """
    v = float(_check_finite("v", v))
    xa = _check_finite("x", x)
    if v < 0:
        raise ValueError(f"order must be >= 0, got {v}")
    if np.any(xa <= 0):
        raise ValueError("argument must be > 0")
    out = np.log(sc.ive(v, xa)) + xa
    if out.ndim == 0:
        return float(out)
    return out


def log_gamma(x):
    """``log Gamma(x)`` for ``x > 0``."""
    xa = _check_finite("x", x)
    if np.any(xa <= 0):
        raise ValueError("log_gamma requires x > 0")
    out = sc.gammaln(xa)
    if out.ndim == 0:
        return float(out)
    return out


def surface_measure(m: int) -> float:
    """Total surface measure ``omega_m`` of the unit sphere S^m.

    ``omega_0 = 2`` (two points), ``omega_1 = 2 pi``, ``omega_2 = 4 pi``.
    """
    if int(m) != m or m < 0:
        raise ValueError(f"m must be an integer >= 0, got {m!r}")
    h = 0.5 * (m + 1)
    return math.exp(math.log(2.0) + h * math.log(math.pi) - log_gamma(h))


def harmonic_dimension(m: int, k: int) -> int:
    """Dimension ``N_k^m`` of degree-``k`` spherical harmonics on S^m."""
    HarmonicDegreeSpec(m, k)
    if k == 0:
        return 1
    num = (2 * k + m - 1) * math.factorial(k + m - 2)
    return num // (math.factorial(k) * math.factorial(m - 1))


def gegenbauer_ratio(m: int, k: int, t):
    """Gegenbauer polynomial of index ``(m-1)/2`` divided by its value at 1.

    Uses the three-term recurrence of the normalized family
    ``R_j = C_j / C_j(1)``:

        (2 lam + j) R_{j+1} = 2 (j + lam) t R_j - j R_{j-1},

    which stays well defined at ``lam = 0`` (the circle, where ``R_j`` is
    the Chebyshev polynomial ``T_j``).
    """
    HarmonicDegreeSpec(m, k)
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0):
        raise ValueError("t must lie in [-1, 1]")
    lam = 0.5 * (m - 1)
    prev = np.ones_like(t)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = t.copy()
    for j in range(1, k):
        prev, cur = cur, (2.0 * (j + lam) * t * cur - j * prev) / (2.0 * lam + j)
    return cur if cur.ndim else float(cur)


def gegenbauer_normalized(m: int, k: int, t):
    """Gegenbauer polynomial ``Q_k^{(m-1)/2}(t)`` scaled so ``Q(1) = N_k^m``."""
    return harmonic_dimension(m, k) * gegenbauer_ratio(m, k, t)
