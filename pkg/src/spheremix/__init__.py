"""Finite von Mises-Fisher mixtures approximating densities on the sphere S^m."""

from spheremix.special import (
    gegenbauer_normalized,
    harmonic_dimension,
    log_bessel_i,
    log_gamma,
    surface_measure,
)
from spheremix.geometry import (
    BracketingFailure,
    CoordinateBlock,
    PartitionTooLarge,
    SphericalPartition,
    block_center,
    block_measure,
    build_partition,
    cartesian_to_spherical,
    mean_value_point,
    spherical_to_cartesian,
    unit_vector,
)
from spheremix.quadrature import (
    IntervalRule,
    SphereRule,
    SupGrid,
    interval_rule,
    sphere_rule,
    sup_grid,
)
from spheremix.vmf import (
    VmfComponent,
    VmfKernel,
    VmfMixture,
    kernel_eval,
    log_norm_const,
    mixture_density,
    sample_mixture,
    sample_vmf,
    vmf_log_density,
)
from spheremix.spectral import (
    condition2_tail,
    funk_hecke_coefficient,
    kernel_l1m_norm,
    lemma1_report,
    spherical_convolve,
)
from spheremix.approximator import (
    ApproximationConfig,
    ApproximationReport,
    BudgetExhausted,
    NonDensity,
    TargetDensity,
    approximate,
    construct_mixture,
    convergence_study,
    estimate_sup_error,
)

__version__ = "0.1.0"
