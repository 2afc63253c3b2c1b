import math

import numpy as np
import pytest

from spheremix.geometry import build_partition, sample_uniform, unit_vector
from spheremix.quadrature import (
    QuadratureNotConverged,
    block_rules,
    cap_measure,
    empirical_mesh_norm,
    fibonacci_sphere,
    interval_rule,
    sphere_rule,
    sup_grid,
    weighted_integral,
)
from spheremix.special import gegenbauer_ratio, surface_measure
from spheremix.spectral import funk_hecke_coefficient
from spheremix.vmf import VmfComponent, VmfKernel, vmf_log_density


@pytest.mark.parametrize("m", [1, 2, 3, 4, 7])
def test_interval_rule_total_mass(m):
    r = interval_rule(m, 40)
    assert np.all(r.weights > 0)
    ratio = surface_measure(m) / surface_measure(m - 1)
    assert r.weights.sum() == pytest.approx(ratio, rel=1e-12)


def test_interval_rule_examples():
    r = interval_rule(2, 32)
    assert r.integrate(np.ones_like) == pytest.approx(2.0, rel=1e-14)
    assert abs(r.integrate(lambda t: t)) < 1e-15
    assert r.integrate(np.exp) == pytest.approx(math.e - 1 / math.e, rel=1e-14)


def test_interval_rule_subinterval():
    r = interval_rule(2, 32, -0.5, 0.25)
    assert r.integrate(lambda t: t**2) == pytest.approx((0.25**3 + 0.5**3) / 3, rel=1e-13)
    with pytest.raises(ValueError):
        interval_rule(2, 8, 0.5, 0.2)


def test_weighted_integral_circle_weight():
    # int (1-t^2)^(-1/2) dt over [-1, 1] = pi, singular weight at m = 1
    assert weighted_integral(np.ones_like, 1) == pytest.approx(math.pi, rel=1e-13)


def test_weighted_integral_reports_failure():
    with pytest.raises(QuadratureNotConverged):
        weighted_integral(lambda t: np.sign(t - 0.1234), 2, order=4, max_order=64)


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_sphere_rule_integrates_one(m):
    r = sphere_rule(m)
    assert r.weights.sum() == pytest.approx(surface_measure(m), rel=1e-10)
    np.testing.assert_allclose(np.linalg.norm(r.points, axis=1), 1.0, atol=1e-14)


def test_sphere_rule_second_moment():
    r = sphere_rule(2)
    assert r.integrate(lambda x: x[:, 2] ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-12)


def test_sphere_rule_vmf_kappa5():
    comp = VmfComponent(unit_vector([0.2, -0.7, 0.4]), 5.0)
    r = sphere_rule(2, (64, 128))
    assert r.integrate(lambda x: np.exp(vmf_log_density(2, comp, x))) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_change_of_variable_identity(m):
    # sphere integral of K(<x, y>) equals omega_m * a_0(K)
    y = unit_vector(np.arange(1, m + 2, dtype=float))
    kernel = VmfKernel(m, 7.0)
    r = sphere_rule(m)
    lhs = r.integrate(lambda x: kernel(np.clip(x @ y, -1, 1)))
    rhs = surface_measure(m) * funk_hecke_coefficient(m, kernel, 0)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_doubling_self_consistency():
    g = lambda t: np.exp(3 * t) * np.cos(2 * t)  # noqa: E731
    for m in (1, 2, 3, 5):
        a = interval_rule(m, 32).integrate(g)
        b = interval_rule(m, 64).integrate(g)
        assert abs(a - b) <= 1e-10 * abs(b)
    f = lambda x: np.exp(x @ unit_vector([1.0, 2.0, 2.0]))  # noqa: E731
    a = sphere_rule(2, (32, 64)).integrate(f)
    b = sphere_rule(2, (64, 128)).integrate(f)
    assert abs(a - b) <= 1e-10 * abs(b)


@pytest.mark.parametrize("m", [2, 3])
def test_interval_rule_orthogonality(m):
    r = interval_rule(m, 48)
    for j in range(9):
        for k in range(j + 1, 9):
            val = r.integrate(lambda t: gegenbauer_ratio(m, j, t) * gegenbauer_ratio(m, k, t))
            assert abs(val) <= 1e-9


def test_rotated_rule_preserves_weights():
    r = sphere_rule(2, (32, 64))
    pole = unit_vector([1.0, 1.0, -1.0])
    q = r.rotated(pole)
    np.testing.assert_allclose(np.linalg.norm(q.points, axis=1), 1.0, atol=1e-14)
    # the rotated pole row is where the original north pole row went
    assert np.max(q.points @ pole) == pytest.approx(np.max(r.points[:, 2]), abs=1e-14)
    f = lambda x: x[:, 0] ** 2  # noqa: E731
    assert q.integrate(f) == pytest.approx(4 * math.pi / 3, rel=1e-12)


@pytest.mark.parametrize("m,levels", [(1, (5,)), (2, (3, 4)), (3, (2, 3, 3))])
def test_block_rules_sum_to_measures(m, levels):
    p = build_partition(m, levels)
    pts, wts = block_rules(m, p.lo, p.hi, order=5)
    np.testing.assert_allclose(wts.sum(axis=1), p.measures, rtol=1e-13)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=-1), 1.0, atol=1e-14)


def test_block_rules_second_moment():
    p = build_partition(2, (4, 6))
    pts, wts = block_rules(2, p.lo, p.hi, order=6)
    assert np.sum(wts * pts[..., 0] ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-12)


def test_sup_grid_circle():
    g = sup_grid(1, 4)
    assert len(g) == 4
    assert g.mesh_norm == pytest.approx(math.pi / 4)
    np.testing.assert_allclose(g.points, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)


def test_sup_grid_fibonacci_mesh():
    g = sup_grid(2, 1000)
    assert len(g) == 1000 and g.kind == "fibonacci"
    assert g.descriptor["mesh_constant"] == pytest.approx(g.mesh_norm * math.sqrt(1000))
    # independent probe: random points should never be farther than the mesh norm
    probe = sample_uniform(2, 200_000, seed=5)
    seen = empirical_mesh_norm(g.points, probe)
    assert 0.9 * g.mesh_norm <= seen <= g.mesh_norm
    assert g.mesh_norm < 3.0 / math.sqrt(1000)


def test_sup_grid_product_mesh_is_a_bound():
    g = sup_grid(3, 5000)
    probe = sample_uniform(3, 100_000, seed=6)
    assert empirical_mesh_norm(g.points, probe) <= g.mesh_norm


def test_sup_of_linear_function():
    g = sup_grid(2, 20_000)
    val, _ = g.sup(lambda x: x[:, 0])
    assert 1.0 - 0.5 * g.mesh_norm**2 <= val <= 1.0


def test_fibonacci_points_are_unit():
    np.testing.assert_allclose(np.linalg.norm(fibonacci_sphere(77), axis=1), 1.0, atol=1e-15)


def test_cap_measure_zone_formula():
    # zone area on S^2 is 2 pi (hi - lo)
    assert cap_measure(2, -0.3, 0.8) == pytest.approx(2 * math.pi * 1.1, rel=1e-12)
    assert cap_measure(3, -1.0, 1.0) == pytest.approx(surface_measure(3), rel=1e-12)
