import numpy as np
import pytest

from heisenberg_morrey.core.group import (
    GroupElement,
    GroupParams,
    dilation,
    distance,
    group_inverse,
    group_product,
    koranyi_norm,
)
from heisenberg_morrey.core.kernels import (
    RieszProfile,
    SubordinationSpec,
    check_alpha,
    check_kernel_bound,
    check_kernel_smoothness,
    check_on_diagonal_decay,
    constant_kernel_values,
    fit_smoothness_exponent,
    fractional_kernel,
    fractional_kernel_values,
    gamma_identity,
    riesz_kernel_free,
    riesz_kernel_free_values,
    subordination_rule,
)
from heisenberg_morrey.core.potential import Potential
from heisenberg_morrey.core.trotter import TrotterSpec
from heisenberg_morrey.exceptions import InvalidParameterError, SeparationError


def _unit_points(count, seed=0):
    pts = np.random.default_rng(seed).uniform(-1, 1, (count, 3))
    return dilation(pts, 1.0 / koranyi_norm(pts))


def test_alpha_range():
    check_alpha(1.0, GroupParams(1))
    for alpha in (0.0, 4.0, 5.0):
        with pytest.raises(InvalidParameterError):
            check_alpha(alpha, GroupParams(1))
    with pytest.raises(InvalidParameterError):
        SubordinationSpec(alpha=-1.0)
    with pytest.raises(InvalidParameterError):
        SubordinationSpec(s_min=2.0, s_max=1.0)


def test_window_defaults():
    sub = SubordinationSpec()
    assert sub.window(2.0) == pytest.approx((4e-4, 4e4))
    assert sub.window(1.0, rho=10.0)[1] == pytest.approx(1e6)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 3.0])
def test_gamma_identity(alpha):
    value, closed = gamma_identity(alpha, 1.5, 4.0, 4)
    assert value == pytest.approx(closed, rel=1e-5)


def test_subordination_rule_integrates_exponential():
    # Gamma(a/2)^-1 int exp(-s) s^(a/2-1) ds = 1
    s, w = subordination_rule(1.0, 1e-8, 60.0)
    assert np.sum(w * np.exp(-s)) == pytest.approx(1.0, rel=1e-3)


def test_free_kernel_newtonian_case():
    pts = np.vstack([_unit_points(6), [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]])
    values = riesz_kernel_free_values(2.0, dilation(pts, 3.0))
    np.testing.assert_allclose(values * 9.0, 1.0 / (8.0 * np.pi), rtol=2e-3)


def test_free_kernel_homogeneous_and_symmetric():
    pts = _unit_points(5, seed=1)
    base = riesz_kernel_free_values(1.0, pts)
    for r in (0.1, 7.0):
        np.testing.assert_allclose(riesz_kernel_free_values(1.0, dilation(pts, r)), r ** (1.0 - 4.0) * base, rtol=1e-10)
    np.testing.assert_allclose(riesz_kernel_free_values(1.0, group_inverse(pts)), base, rtol=1e-10)
    assert np.all(base > 0)


def test_constant_potential_kernel_below_free():
    pts = _unit_points(4, seed=2) * np.array([2.0, 2.0, 4.0])
    free = constant_kernel_values(1.0, 0.0, pts)
    damped = constant_kernel_values(1.0, 1.0, pts)
    assert np.all(damped > 0)
    assert np.all(damped < free)
    with pytest.raises(InvalidParameterError):
        constant_kernel_values(1.0, -1.0, pts)
    with pytest.raises(InvalidParameterError):
        constant_kernel_values(1.0, 0.0, np.zeros(3))


def test_profile_matches_direct_values():
    profile = RieszProfile(GroupParams(1), 1.0)
    pts = _unit_points(6, seed=3) * 2.0
    np.testing.assert_allclose(profile(pts), riesz_kernel_free_values(1.0, pts), rtol=1e-3)


def test_fractional_kernel_constant_route():
    u = GroupElement((0.5,), (0.1,), 0.2)
    v = GroupElement((-0.3,), (0.2,), -0.4)
    V = Potential.constant(0.5)
    K = fractional_kernel(V, 1.0, u, v)
    w = group_product(group_inverse(v.as_array()), u.as_array())
    assert K == pytest.approx(float(constant_kernel_values(1.0, 0.5, w)), rel=1e-12)
    assert distance(u, v) > 0
    with pytest.raises(InvalidParameterError):
        fractional_kernel(V, 1.0, u, u)


def test_kernel_bound_free_case():
    rng = np.random.default_rng(4)
    pairs = [
        (GroupElement.from_array(a), GroupElement.from_array(b))
        for a, b in zip(rng.uniform(-2, 2, (6, 3)), rng.uniform(-2, 2, (6, 3)))
    ]
    fit = check_kernel_bound(Potential.zero(), 1.0, 0.0, pairs)
    assert fit.finite and fit.C_fit > 0
    assert fit.stability >= 1.0
    assert fit.samples == 6


def test_smoothness_requires_separation():
    u = GroupElement.identity(1)
    v = GroupElement((0.9,), (0.0,), 0.0)
    w = GroupElement((1.0,), (0.0,), 0.0)
    with pytest.raises(SeparationError):
        check_kernel_smoothness(Potential.zero(), 1.0, 1.0, [(u, v, w)])
    with pytest.raises(InvalidParameterError):
        check_kernel_smoothness(Potential.zero(), 1.0, 1.5, [(u, u, w)])


def test_smoothness_free_case_is_finite():
    u = GroupElement.identity(1)
    triples = [
        (u, GroupElement((h,), (0.0,), 0.0), GroupElement((2.0,), (0.5,), 1.0))
        for h in (0.05, 0.1, 0.2, 0.4)
    ]
    fit = check_kernel_smoothness(Potential.zero(), 1.0, 1.0, triples)
    assert fit.finite and fit.C_fit > 0


def test_on_diagonal_decay_constant_potential():
    u = GroupElement((0.3,), (-0.2,), 0.1)
    sample = [(s, u) for s in (0.5, 1.0, 2.0, 4.0)]
    fit = check_on_diagonal_decay(Potential.constant(1.0), 0.0, sample, rho=None)
    assert fit.C_fit == pytest.approx(np.exp(-0.5) / 64.0, rel=1e-8)
    assert fit.witness == 0


def test_free_kernel_at_a_single_point():
    u = GroupElement.from_complex(1.0 + 0.0j, 0.0)
    assert riesz_kernel_free(2.0, u) == pytest.approx(1.0 / (8.0 * np.pi), rel=2e-3)


def test_smoothness_exponent_of_constant_potential_kernel():
    u = GroupElement.from_array([1.0, 0.0, 0.0])
    delta = fit_smoothness_exponent(Potential.constant(1.0), 1.0, u, GroupElement.identity(1))
    assert 0.8 < delta <= 1.0
    with pytest.raises(InvalidParameterError):
        fit_smoothness_exponent(Potential.constant(1.0), 1.0, u, u)


def test_batched_values_match_single_kernels():
    v = GroupElement((-0.3,), (0.2,), -0.4)
    us = np.array([[0.5, 0.1, 0.2], [1.0, -1.0, 0.5]])
    V = Potential.constant(0.5)
    batch = fractional_kernel_values(V, 1.0, us, v)
    single = [fractional_kernel(V, 1.0, GroupElement.from_array(u), v) for u in us]
    np.testing.assert_allclose(batch, single, rtol=1e-12)


@pytest.mark.slow
def test_power_potential_kernel_bound_sweep():
    V = Potential.homogeneous_power(1.0)
    sub = SubordinationSpec(1.0, s_max=4.0)
    ts = TrotterSpec(steps=16, nodes_xy=48, dt_ratio=1.5)
    v = GroupElement.identity(1)
    us = np.array([[0.5, 0.0, 0.0], [0.0, 0.3, 0.2], [0.2, -0.3, 0.3], [-0.4, 0.1, -0.25]])
    K = fractional_kernel_values(V, 1.0, us, v, sub, ts)
    free = riesz_kernel_free_values(1.0, us)
    assert np.all(K > 0.5 * free)
    assert np.all(K <= 1.01 * free)
    pairs = [(GroupElement.from_array(u), v) for u in us]
    fits = [check_kernel_bound(V, 1.0, N, pairs, sub, ts) for N in (1.0, 2.0)]
    assert all(fit.finite for fit in fits)
    assert fits[0].C_fit <= fits[1].C_fit
