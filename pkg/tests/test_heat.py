import numpy as np
import pytest

from heisenberg_morrey.core.group import GroupParams, dilation, group_inverse
from heisenberg_morrey.core.heat import (
    HeatQuadrature,
    fit_gaussian_bound,
    gaussian_bound_violations,
    group_heat_kernel,
    group_heat_peak,
    heat_kernel_axis,
    heat_kernel_mass,
    heat_kernel_values,
    heat_sample,
)
from heisenberg_morrey.exceptions import InvalidParameterError


@pytest.mark.parametrize("s", [0.25, 1.0, 2.0, 7.5])
def test_origin_value(s):
    value = heat_kernel_values(s, np.zeros(3))
    assert float(value) == pytest.approx(1.0 / (16.0 * s**2), rel=1e-10)


def test_axis_matches_closed_form():
    t = np.linspace(-3.0, 3.0, 13)
    pts = np.zeros((t.size, 3))
    pts[:, 2] = t
    for s in (0.5, 1.0, 3.0):
        np.testing.assert_allclose(heat_kernel_values(s, pts), heat_kernel_axis(s, t), rtol=1e-7)


def test_adaptive_agrees_with_composite():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.5, 0.3], [0.2, -1.0, 2.0]])
    fixed = heat_kernel_values(1.0, pts)
    adaptive = heat_kernel_values(1.0, pts, HeatQuadrature(adaptive=True))
    np.testing.assert_allclose(adaptive, fixed, rtol=1e-6)


def test_homogeneity_and_symmetry(rng):
    pts = rng.uniform(-2, 2, (20, 3))
    base = heat_kernel_values(1.0, pts)
    for s in (0.3, 4.0):
        scaled = heat_kernel_values(s, dilation(pts, np.sqrt(s)))
        np.testing.assert_allclose(scaled, s**-2 * base, rtol=1e-9)
    np.testing.assert_allclose(heat_kernel_values(1.0, group_inverse(pts)), base, rtol=1e-12)


def test_positive_and_peaked(rng):
    pts = rng.uniform(-3, 3, (50, 3))
    values = heat_kernel_values(1.0, pts)
    assert np.all(values >= 0.0)
    assert np.all(values <= 1.0 / 16.0 + 1e-15)


def test_time_broadcasts():
    s = np.array([0.5, 1.0, 2.0])
    values = heat_kernel_values(s, np.zeros(3))
    np.testing.assert_allclose(values, 1.0 / (16.0 * s**2), rtol=1e-10)


def test_mass_is_one():
    assert heat_kernel_mass(GroupParams(1)) == pytest.approx(1.0, rel=1e-4)


def test_group_peak():
    assert group_heat_peak(GroupParams(1)) == pytest.approx(1.0 / 64.0, rel=1e-10)
    assert float(group_heat_kernel(1.0, np.zeros(3))) == pytest.approx(1.0 / 64.0, rel=1e-10)


def test_invalid_time():
    with pytest.raises(InvalidParameterError):
        heat_kernel_values(0.0, np.zeros(3))
    with pytest.raises(InvalidParameterError):
        heat_kernel_axis(-1.0, 0.0)
    with pytest.raises(InvalidParameterError):
        HeatQuadrature(lambda_nodes=1)


def test_gaussian_bound_fit_covers_its_sample():
    hq = HeatQuadrature()
    sample = heat_sample(GroupParams(1), 120, seed=2)
    fit = fit_gaussian_bound(hq, sample)
    assert fit.finite
    assert fit.C_fit > 0 and fit.A_fit > 0
    assert fit.stability >= 1.0
    assert gaussian_bound_violations(fit, hq, sample) == 0


def test_heat_sample_is_deterministic():
    a = heat_sample(GroupParams(1), 10, seed=5)
    b = heat_sample(GroupParams(1), 10, seed=5)
    assert all(sa == sb and np.array_equal(ua, ub) for (sa, ua), (sb, ub) in zip(a, b))
