import numpy as np
import pytest

from heisenberg_morrey.core.functions import Bump, ConstantFunction, Coordinate, Indicator, Power
from heisenberg_morrey.core.group import Ball, GroupElement, GroupParams, unit_ball_volume
from heisenberg_morrey.core.potential import Potential
from heisenberg_morrey.core.quadrature import QuadratureSpec
from heisenberg_morrey.core.spaces import (
    NormReport,
    SpaceSpec,
    ball_norm,
    bmo_norm,
    check_2rx,
    estimate_norm,
    hoelder_norm,
    lebesgue_norm,
    morrey_norm,
    theta_weight,
    weak_lebesgue_norm,
    weak_morrey_norm,
)
from heisenberg_morrey.exceptions import InvalidParameterError

H1 = GroupParams(1)
ORIGIN = GroupElement.identity(1)
VOL = unit_ball_volume(H1)
UNIT = Indicator(Ball(ORIGIN, 1.0))


def _centered(radii):
    return [Ball(ORIGIN, r) for r in radii]


def test_spec_validation():
    assert SpaceSpec("weak_morrey").kind == "weak-morrey"
    for kwargs in ({"kind": "sobolev"}, {"p": 0.5}, {"kappa": 1.0}, {"theta": -1.0}):
        with pytest.raises(InvalidParameterError):
            SpaceSpec(**kwargs)
    with pytest.raises(InvalidParameterError):
        SpaceSpec("hoelder", beta=1.5)
    assert SpaceSpec("hoelder", beta=1.5, beyond_unit=True).beta == 1.5
    spec = SpaceSpec("morrey", 2.0, 0.25, 1.0)
    assert SpaceSpec.from_dict(spec.to_dict()) == spec
    assert spec.with_theta(3.0).theta == 3.0


def test_theta_weight():
    assert theta_weight(5.0, np.inf, 2.0) == 1.0
    assert theta_weight(1.0, 1.0, 2.0) == pytest.approx(0.25)
    assert theta_weight(1.0, 1.0, 0.0) == 1.0


def test_2rx_inequality(rng):
    r = rng.uniform(1e-3, 1e3, 200)
    rho = rng.uniform(1e-3, 1e3, 200)
    theta = rng.uniform(0, 6, 200)
    assert np.all(check_2rx(r, rho, theta))


def test_lebesgue_norms_of_indicator():
    assert lebesgue_norm(UNIT, 2.0) == pytest.approx(np.sqrt(VOL), rel=1e-9)
    assert weak_lebesgue_norm(UNIT, 2.0) == pytest.approx(np.sqrt(VOL), rel=1e-9)
    assert lebesgue_norm(UNIT, 1.0) == pytest.approx(VOL, rel=1e-9)


def test_bump_lebesgue_and_weak():
    f = Bump(ORIGIN, 1.0)
    strong = lebesgue_norm(f, 2.0)
    assert strong == pytest.approx(np.pi / 2.0, rel=1e-3)
    weak = weak_lebesgue_norm(f, 2.0)
    assert weak == pytest.approx(np.sqrt(VOL) / np.e, rel=5e-3)
    assert weak < strong


def test_critical_power_is_weak_but_not_strong():
    assert weak_lebesgue_norm(Power(2.0), 2.0) == pytest.approx(np.sqrt(VOL), rel=1e-12)


def test_morrey_norm_of_indicator():
    spec = SpaceSpec("morrey", 2.0, 0.5)
    report = morrey_norm(UNIT, spec, None, _centered([0.25, 0.5, 1.0, 2.0, 4.0]))
    assert report.value == pytest.approx(VOL ** 0.25, rel=1e-9)
    assert report.witness.radius == 1.0
    assert report.balls_tested == 5


def test_morrey_kappa_zero_is_lebesgue():
    report = morrey_norm(UNIT, SpaceSpec("morrey", 2.0, 0.0), None, _centered([1.0]))
    assert report.value == pytest.approx(lebesgue_norm(UNIT, 2.0), rel=1e-9)


def test_weak_morrey_below_morrey():
    balls = _centered([0.5, 1.0, 2.0])
    f = Bump(ORIGIN, 0.5)
    weak = weak_morrey_norm(f, SpaceSpec("weak-morrey", 2.0, 0.25), None, balls).value
    strong = morrey_norm(f, SpaceSpec("morrey", 2.0, 0.25), None, balls).value
    assert 0 < weak <= strong * (1.0 + 1e-9)


def test_bmo_of_constant_is_zero():
    report = bmo_norm(ConstantFunction(3.0, H1), 0.0, None, _centered([0.5, 2.0]))
    assert report.value == 0.0
    assert report.convergence == 1.0


def test_hoelder_of_coordinate_is_scale_invariant():
    report = hoelder_norm(Coordinate(0, H1), 1.0, 0.0, None, _centered([0.1, 1.0, 10.0]))
    np.testing.assert_allclose(report.per_ball, report.per_ball[0], rtol=1e-6)
    assert report.value > 0


def test_theta_weight_lowers_the_norm():
    spec = SpaceSpec("morrey", 2.0, 0.5, theta=2.0)
    balls = _centered([0.5, 1.0, 2.0])
    free = morrey_norm(UNIT, spec, None, balls).value
    damped = morrey_norm(UNIT, spec, Potential.constant(1.0), balls).value
    assert damped < free


def test_growth_factor_reports_ratio():
    spec = SpaceSpec("morrey", 2.0, 0.5)
    report = morrey_norm(UNIT, spec, None, _centered([0.25, 0.5]), growth_factor=2.0)
    assert report.growth is not None and report.growth > 1.0


def test_ball_norm_argument_checks():
    with pytest.raises(InvalidParameterError):
        ball_norm(UNIT, SpaceSpec("lebesgue"), None, _centered([1.0]))
    with pytest.raises(InvalidParameterError):
        ball_norm(UNIT, SpaceSpec("morrey"), None, [])
    with pytest.raises(InvalidParameterError):
        morrey_norm(UNIT, SpaceSpec("bmo"), None, _centered([1.0]))


def test_estimate_norm_dispatch():
    report = estimate_norm(UNIT, SpaceSpec("lebesgue", 2.0), quad=QuadratureSpec())
    assert report.witness is None
    assert report.value == pytest.approx(np.sqrt(VOL), rel=1e-9)


def test_stabilized_flag():
    assert NormReport(1.0, None, 4, 1.0).stabilized
    assert not NormReport(1.0, None, 4, 0.5).stabilized
    assert not NormReport(np.inf, None, 4, 1.0).stabilized
    assert not NormReport(1.0, None, 4, 1.0, growth=2.0).stabilized
