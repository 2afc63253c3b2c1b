"""Built-in target densities used by tests and the CLI.

The suite spans an easy case (uniform), targets the mixture family can
represent closely (single vMF, 2- and 3-component mixtures) and a bimodal
density ``exp(2 <x, e>^2)`` that is not itself a vMF mixture.
"""

from __future__ import annotations

import math

import numpy as np

from spheremix.approximator import TargetDensity
from spheremix.geometry import spherical_to_cartesian
from spheremix.quadrature import weighted_integral
from spheremix.special import surface_measure
from spheremix.vmf import VmfMixture

STANDARD_SUITE = ("uniform", "vmf2", "vmf10", "mix2", "mix3", "bimodal")


def direction(m: int, theta: float, phi: float) -> np.ndarray:
    """Unit vector with first colatitude ``theta``, azimuth ``phi``.

    Remaining colatitudes are ``pi / 2``; on the circle only ``phi`` is used.
    """
    ang = np.full(m, 0.5 * math.pi)
    ang[-1] = phi
    if m >= 2:
        ang[0] = theta
    return spherical_to_cartesian(ang)


def target_mixture(name: str, m: int) -> VmfMixture | None:
    """The vMF mixture behind a suite name, or None for non-mixture targets."""
    if name == "vmf2":
        return VmfMixture([direction(m, 0.7, 0.4)], [2.0], [1.0])
    if name == "vmf10":
        return VmfMixture([direction(m, 0.7, 0.4)], [10.0], [1.0])
    if name == "mix2":
        return VmfMixture(
            [direction(m, 0.6, 0.3), direction(m, 2.2, 3.5)], [5.0, 5.0], [0.6, 0.4]
        )
    if name == "mix3":
        return VmfMixture(
            [direction(m, 0.9, 0.2), direction(m, 1.8, 2.4), direction(m, 2.4, 4.6)],
            [4.0, 6.0, 8.0],
            [0.5, 0.3, 0.2],
        )
    return None


def _bimodal(m: int, strength: float = 2.0):
    axis = direction(m, 0.5, 1.0)
    # zonal about axis: int_S g(<x,e>) = omega_{m-1} int g(t) (1-t^2)^((m-2)/2) dt
    z = surface_measure(m - 1) * weighted_integral(
        lambda t: np.exp(strength * t * t), m, rtol=1e-14, order=32
    )
    log_z = math.log(z)

    def f(x):
        t = np.asarray(x) @ axis
        return np.exp(strength * t * t - log_z)

    return f


def standard_target(name: str, m: int) -> TargetDensity:
    """Build a suite target by name on S^m."""
    if name == "uniform":
        c = 1.0 / surface_measure(m)
        return TargetDensity(m, lambda x: np.full(np.shape(x)[:-1], c), name="uniform", concurrent_safe=True)
    mix = target_mixture(name, m)
    if mix is not None:
        return TargetDensity.from_mixture(mix, name=name)
    if name == "bimodal":
        return TargetDensity(m, _bimodal(m), name="bimodal", concurrent_safe=True)
    raise KeyError(f"unknown target {name!r}; choose from {', '.join(STANDARD_SUITE)}")
