import numpy as np
import pytest

from heisenberg_morrey.core.functions import Bump, ConstantFunction
from heisenberg_morrey.core.group import GroupElement, GroupParams, group_inverse, group_product
from heisenberg_morrey.core.heat import group_heat_kernel
from heisenberg_morrey.core.potential import Potential
from heisenberg_morrey.core.trotter import (
    TrotterGrid,
    TrotterSpec,
    heat_semigroup_apply,
    heat_semigroup_values,
    schrodinger_kernel,
    schrodinger_kernel_series,
    schrodinger_semigroup_apply,
    schrodinger_semigroup_values,
    truncation_radius,
)
from heisenberg_morrey.exceptions import GridResolutionError, InvalidParameterError

SMALL = TrotterSpec(nodes_xy=16, nodes_t=16, half_widths=(4.0, 8.0))


def test_spec_validation():
    with pytest.raises(InvalidParameterError):
        TrotterSpec(steps=0)
    with pytest.raises(InvalidParameterError):
        TrotterSpec(nodes_xy=4)
    with pytest.raises(InvalidParameterError):
        TrotterSpec(half_widths=(1.0, 0.0))
    with pytest.raises(InvalidParameterError):
        TrotterSpec(dt_ratio=0.0)
    with pytest.raises(InvalidParameterError):
        TrotterSpec(nodes_t=128, max_nodes_t=64)
    assert TrotterSpec().with_steps(64).steps == 64


def test_truncation_radius():
    ts = TrotterSpec()
    expected = np.sqrt(4.0 * 2.0 * (np.log(1e6) + 4.0))
    assert truncation_radius(2.0, ts) == pytest.approx(expected)


def test_step_conserves_mass_without_potential(rng):
    grid = TrotterGrid(Potential.zero(), (4.0, 8.0), SMALL)
    g = rng.uniform(0, 1, grid.points.shape[:-1])
    stepped = grid.step(g, 0.05)
    assert grid.mass(stepped) == pytest.approx(grid.mass(g), rel=1e-10)


def test_constant_potential_is_a_scalar_factor(rng):
    free = TrotterGrid(Potential.zero(), (4.0, 8.0), SMALL)
    damped = TrotterGrid(Potential.constant(2.0), (4.0, 8.0), SMALL)
    g = rng.uniform(0, 1, free.points.shape[:-1])
    np.testing.assert_allclose(damped.step(g, 0.1), np.exp(-0.2) * free.step(g, 0.1), rtol=1e-10, atol=1e-14)


def test_read_interpolates_nodes_and_zeroes_outside(rng):
    grid = TrotterGrid(Potential.zero(), (4.0, 8.0), SMALL)
    g = rng.uniform(0, 1, grid.points.shape[:-1])
    idx = (3, 5, 7)
    node = grid.points[idx]
    assert grid.read(g, node)[0] == pytest.approx(g[idx], abs=1e-10)
    assert grid.read(g, np.array([10.0, 0.0, 0.0]))[0] == 0.0


def test_boundary_check_flags_flat_grid():
    grid = TrotterGrid(Potential.zero(), (4.0, 8.0), SMALL)
    with pytest.raises(GridResolutionError):
        grid.check_boundary(np.ones(grid.points.shape[:-1]), 1.0)
    g = np.zeros(grid.points.shape[:-1])
    g[8, 8, 8] = 1.0
    grid.check_boundary(g, 1.0)


def test_evolve_through_rejects_bad_times():
    grid = TrotterGrid(Potential.zero(), (4.0, 8.0), SMALL)
    g = np.zeros(grid.points.shape[:-1])
    with pytest.raises(InvalidParameterError):
        grid.evolve_through(g, [0.5, 0.2], np.zeros((1, 3)))
    with pytest.raises(InvalidParameterError):
        grid.evolve_through(g, [0.0], np.zeros((1, 3)))


def test_point_source_mass():
    V = Potential.constant(2.0)
    grid = TrotterGrid(V, (4.0, 8.0), TrotterSpec(nodes_xy=32, nodes_t=32, half_widths=(4.0, 8.0)))
    s0 = grid.source_time(4.0)
    g = grid.point_source(GroupElement.identity(1), s0)
    assert grid.mass(g) == pytest.approx(np.exp(-2.0 * s0), rel=1e-10)


def test_heat_semigroup_preserves_constants():
    f = ConstantFunction(1.0, GroupParams(1))
    values = heat_semigroup_values(1.0, f, np.zeros((2, 3)))
    np.testing.assert_allclose(values, 1.0, atol=2e-3)


def test_heat_semigroup_short_time_is_near_identity():
    f = Bump(GroupElement.identity(1), 1.0)
    value = heat_semigroup_values(1e-3, f, np.zeros((1, 3)))[0]
    assert value == pytest.approx(1.0, abs=2e-2)
    assert value <= 1.0 + 1e-3


def test_constant_potential_kernel_is_damped_heat_kernel():
    u = GroupElement.from_complex(0.5 + 0.2j, 0.3)
    v = GroupElement.from_complex(-0.1j, -0.4)
    w = group_product(group_inverse(v.as_array()), u.as_array())
    for s in (0.2, 1.0):
        expected = np.exp(-1.5 * s) * float(group_heat_kernel(s, w))
        assert schrodinger_kernel(Potential.constant(1.5), s, u, v) == pytest.approx(expected, rel=1e-12)
    series = schrodinger_kernel_series(Potential.zero(), [0.5, 1.0], u.as_array(), v)
    assert series.shape == (2, 1)
    assert np.all(series > 0)


def test_semigroup_argument_checks():
    f = Bump(GroupElement.identity(1), 1.0)
    V = Potential.constant(1.0)
    with pytest.raises(InvalidParameterError):
        schrodinger_semigroup_values(V, 0.0, f, np.zeros(3))
    with pytest.raises(InvalidParameterError):
        schrodinger_semigroup_values(V, 1.0, f, np.zeros(3), method="spectral")
    g = Bump(GroupElement.identity(2), 1.0)
    with pytest.raises(InvalidParameterError):
        schrodinger_semigroup_values(Potential.homogeneous_power(1.0), 1.0, g, np.zeros(5))


def test_constant_potential_semigroup_factors():
    f = Bump(GroupElement.identity(1), 1.0)
    pts = np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.2]])
    free = schrodinger_semigroup_values(Potential.zero(), 0.5, f, pts)
    damped = schrodinger_semigroup_values(Potential.constant(2.0), 0.5, f, pts)
    np.testing.assert_allclose(damped, np.exp(-1.0) * free, rtol=1e-12)


def test_pointwise_apply_matches_bulk_values():
    f = Bump(GroupElement.identity(1), 1.0)
    u = GroupElement.from_complex(0.3 - 0.1j, 0.2)
    bulk = heat_semigroup_values(0.5, f, u.as_array()[None, :])[0]
    assert heat_semigroup_apply(0.5, f, u) == pytest.approx(bulk, rel=1e-12)
    V = Potential.constant(0.5)
    bulk = schrodinger_semigroup_values(V, 0.5, f, u.as_array()[None, :])[0]
    assert schrodinger_semigroup_apply(V, 0.5, f, u) == pytest.approx(bulk, rel=1e-12)


HAND = TrotterSpec(nodes_xy=64, nodes_t=512, half_widths=(6.0, 24.0))
READ_OUT = np.array([[0.3, 0.1, 0.2], [0.0, 0.0, 0.0], [-0.8, 0.4, 1.5]])


def _relative(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


@pytest.mark.slow
def test_default_grid_runs_power_potential(power_potential):
    f = Bump(GroupElement.identity(1), 1.0)
    u = GroupElement.from_complex(0.3 + 0.1j, 0.2)
    grid = TrotterGrid.for_sources(power_potential, 0.5, np.zeros(3), TrotterSpec(), extent=f.mass_ball(1e-6).radius)
    assert grid.dt <= TrotterSpec().dt_ratio * grid.dx**2
    value = schrodinger_semigroup_apply(power_potential, 0.5, f, u)
    heat = heat_semigroup_apply(0.5, f, u)
    assert 0.0 < value < heat * (1.0 + 1e-3)


@pytest.mark.slow
def test_grid_matches_damped_heat_for_constant_potential():
    f = Bump(GroupElement.identity(1), 1.0)
    V = Potential.constant(1.0)
    exact = schrodinger_semigroup_values(V, 0.5, f, READ_OUT)
    coarse = schrodinger_semigroup_values(V, 0.5, f, READ_OUT, HAND, method="grid")
    fine = schrodinger_semigroup_values(V, 0.5, f, READ_OUT, HAND.with_steps(64), method="grid")
    # second order in the Strang step, about 5e-4 at 32 steps
    assert _relative(coarse, exact) < 1e-3
    assert _relative(fine, exact) < 0.5 * _relative(coarse, exact)


@pytest.mark.slow
def test_power_potential_is_dominated_by_heat(power_potential):
    f = Bump(GroupElement.identity(1), 1.0)
    for s in (0.25, 0.5):
        values = schrodinger_semigroup_values(power_potential, s, f, READ_OUT, HAND, method="grid")
        heat = heat_semigroup_values(s, f, READ_OUT)
        assert np.all(values > 0.0)
        assert np.all(values <= heat * (1.0 + 1e-3))


@pytest.mark.slow
def test_power_potential_converges_in_steps(power_potential):
    f = Bump(GroupElement.identity(1), 1.0)
    coarse = schrodinger_semigroup_values(power_potential, 0.5, f, READ_OUT, HAND, method="grid")
    fine = schrodinger_semigroup_values(power_potential, 0.5, f, READ_OUT, HAND.with_steps(64), method="grid")
    assert _relative(coarse, fine) < 1e-3


@pytest.mark.slow
def test_grid_semigroup_law(power_potential):
    f = Bump(GroupElement.identity(1), 1.0)
    grid = TrotterGrid.for_sources(power_potential, 0.5, np.zeros(3), HAND)
    g0 = grid.sample(f)
    split = grid.evolve_through(g0, [0.25, 0.5], READ_OUT)[1]
    direct = grid.evolve_through(g0, [0.5], READ_OUT)[0]
    assert _relative(split, direct) < 1e-3
