import numpy as np
import pytest

from heisenberg_morrey.core.group import GroupElement, GroupParams, dilation, group_product
from heisenberg_morrey.core.potential import (
    Potential,
    RhoCache,
    RhoComparability,
    check_com2,
    com2_terms,
    critical_radii,
    critical_radius,
    evaluate_potential,
    fit_rho_comparability,
    rh_constant_estimate,
)
from heisenberg_morrey.core.quadrature import QuadratureSpec
from heisenberg_morrey.exceptions import BracketingError, InvalidParameterError

RHO_CONSTANT_ONE = (np.pi**2 / 2.0) ** -0.5


def test_descriptor_validation():
    with pytest.raises(InvalidParameterError):
        Potential("constant", 0.0)
    with pytest.raises(InvalidParameterError):
        Potential("gaussian", 1.0)
    with pytest.raises(InvalidParameterError):
        Potential("power", 1.0, -1.0)
    V = Potential.homogeneous_power(2.0, 3.0)
    assert Potential.from_dict(V.to_dict()) == V
    assert Potential("homogeneous-power", 1.0, 2.0).kind == "power"


def test_evaluate():
    u = GroupElement.from_complex(1.0, 1.0)
    assert evaluate_potential(Potential.zero(), u) == 0.0
    assert evaluate_potential(Potential.constant(3.0), u) == 3.0
    assert evaluate_potential(Potential.homogeneous_power(2.0), u) == pytest.approx(np.sqrt(2.0))


def test_constant_value():
    assert Potential.zero().constant_value == 0.0
    assert Potential.constant(2.0).constant_value == 2.0
    assert Potential.homogeneous_power(0.0, 5.0).constant_value == 5.0
    assert Potential.homogeneous_power(1.0).constant_value is None


def test_rh_constant_of_constant_potential():
    est = rh_constant_estimate(Potential.constant(2.0), 2.0, QuadratureSpec(resolution=8), 8)
    assert est.constant == pytest.approx(1.0, abs=1e-12)
    flat = rh_constant_estimate(Potential.homogeneous_power(0.0, 2.0), 2.0, QuadratureSpec(resolution=8), 8)
    assert flat.constant == pytest.approx(est.constant, abs=1e-10)
    with pytest.raises(InvalidParameterError):
        rh_constant_estimate(Potential.constant(1.0), 1.0, QuadratureSpec(), 4)


def test_rh_constant_of_power_is_stable():
    V = Potential.homogeneous_power(2.0)
    spec = QuadratureSpec(resolution=12)
    small = rh_constant_estimate(V, 2.0, spec, 16)
    large = rh_constant_estimate(V, 2.0, spec, 32)
    assert 1.0 <= small.constant <= large.constant
    assert large.constant / small.constant < 1.1


def test_rho_constant_closed_form():
    V = Potential.constant(1.0)
    assert critical_radius(V, GroupElement.identity(1)) == pytest.approx(RHO_CONSTANT_ONE, rel=1e-7)
    pts = np.random.default_rng(0).uniform(-5, 5, (10, 3))
    np.testing.assert_allclose(critical_radii(V, pts), RHO_CONSTANT_ONE, rtol=1e-7)


def test_rho_power_at_origin():
    c2 = np.pi**2 / 3.0
    rho = critical_radius(Potential.homogeneous_power(2.0), GroupElement.identity(1))
    assert rho == pytest.approx(c2**-0.25, rel=1e-6)


def test_rho_decreases_away_from_origin():
    V = Potential.homogeneous_power(1.0)
    rho = RhoCache(V).many(np.array([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [10.0, 0.0, 0.0]]))
    assert rho[0] > rho[1] > rho[2] > 0


def test_rho_errors():
    with pytest.raises(InvalidParameterError):
        critical_radius(Potential.zero(), GroupElement.identity(1))
    with pytest.raises(BracketingError):
        critical_radius(Potential.constant(1e-40), GroupElement.identity(1))


def test_rho_cache_zero_is_infinite():
    assert RhoCache(Potential.zero())(GroupElement.identity(1)) == np.inf


def _pairs(count, spread, seed=0):
    rng = np.random.default_rng(seed)
    us = rng.uniform(-3, 3, (count, 3))
    steps = dilation(rng.uniform(-1, 1, (count, 3)), spread)
    return [
        (GroupElement.from_array(u), GroupElement.from_array(v))
        for u, v in zip(us, group_product(us, steps))
    ]


def test_fit_constant_potential():
    fit = fit_rho_comparability(Potential.constant(1.0), _pairs(12, 1.0))
    assert fit.C0 == pytest.approx(1.0)
    same = [(u, u) for u, _ in _pairs(10, 1.0)]
    assert fit_rho_comparability(Potential.constant(1.0), same).C0 == 1.0
    with pytest.raises(InvalidParameterError):
        fit_rho_comparability(Potential.constant(1.0), _pairs(5, 1.0))


def test_fit_power_potential_holds_on_pairs():
    V = Potential.homogeneous_power(1.0)
    rho = RhoCache(V)
    pairs = _pairs(16, 0.5)
    fit = fit_rho_comparability(V, pairs, rho)
    us = np.array([u.as_array() for u, _ in pairs])
    vs = np.array([v.as_array() for _, v in pairs])
    from heisenberg_morrey.core.group import koranyi_distance

    assert np.all(fit.holds(rho.many(us), rho.many(vs), koranyi_distance(us, vs)))
    with pytest.raises(InvalidParameterError):
        RhoComparability(0.5, 1.0)


def test_com2_constant_potential():
    V = Potential.constant(1.0)
    report = check_com2(V, 1.0, 1.0, GroupElement.identity(1), 2.0, 6, 20, seed=3)
    assert report.passed
    assert report.checked == 20 * 6


def test_com2_terms_shape():
    lhs, rhs = com2_terms(1.0, np.ones((3, 1)), 0.5, np.arange(1, 5)[None, :], 2.0, 1.0)
    assert lhs.shape == rhs.shape == (3, 4)
    assert np.all(lhs >= rhs)
