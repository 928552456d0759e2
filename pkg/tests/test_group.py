import numpy as np
import pytest
from hypothesis import given, settings

from heisenberg_morrey.core.functions import Coordinate, ConstantFunction, SmoothBump
from heisenberg_morrey.core.group import (
    Ball,
    GroupElement,
    GroupParams,
    ball_volume,
    dilate,
    displayed_unit_ball_volume,
    distance,
    group_product,
    horizontal_gradient,
    inverse,
    koranyi_norm,
    monte_carlo_unit_ball_volume,
    multiply,
    norm,
    radial_unit_ball_volume,
    unit_ball_volume,
)
from heisenberg_morrey.exceptions import DimensionMismatchError, InvalidParameterError

from strategies import h1_points, scales


def test_params_dimensions():
    p = GroupParams(3)
    assert p.Q == 8
    assert p.dim == 7
    with pytest.raises(InvalidParameterError):
        GroupParams(0)


def test_multiply_hand_value():
    u = GroupElement.from_complex(1.0, 0.0)
    v = GroupElement.from_complex(1j, 0.0)
    w = multiply(u, v)
    assert w.x == (1.0,)
    assert w.y == (1.0,)
    assert w.t == pytest.approx(-2.0)


def test_identity_and_inverse(origin):
    u = GroupElement.from_complex(1 + 2j, 3.0)
    assert multiply(origin, u) == u
    assert inverse(u).as_array().tolist() == [-1.0, -2.0, -3.0]
    np.testing.assert_allclose(multiply(u, inverse(u)).as_array(), 0.0, atol=1e-15)


def test_mismatched_dimensions():
    with pytest.raises(DimensionMismatchError):
        multiply(GroupElement.identity(1), GroupElement.identity(2))
    with pytest.raises(DimensionMismatchError):
        GroupElement((1.0, 2.0), (1.0,), 0.0)


def test_dilate_and_norm():
    u = GroupElement.from_complex(1.0, 1.0)
    assert dilate(2.0, u).as_array().tolist() == [2.0, 0.0, 4.0]
    assert norm(u) == pytest.approx(2.0**0.25, abs=1e-8)
    assert norm(GroupElement.from_complex(0.0, 9.0)) == pytest.approx(3.0)
    assert norm(GroupElement.from_complex(3 + 4j, 0.0)) == pytest.approx(5.0)
    with pytest.raises(InvalidParameterError):
        dilate(0.0, u)


@settings(max_examples=200, deadline=None)
@given(h1_points, h1_points, h1_points)
def test_associativity(u, v, w):
    left = multiply(multiply(u, v), w).as_array()
    right = multiply(u, multiply(v, w)).as_array()
    np.testing.assert_allclose(left, right, atol=1e-12 * (1 + np.abs(left).max()))


@settings(max_examples=200, deadline=None)
@given(h1_points, h1_points, h1_points)
def test_triangle_inequality(u, v, w):
    assert distance(u, w) <= distance(u, v) + distance(v, w) + 1e-6


@settings(max_examples=200, deadline=None)
@given(h1_points, h1_points, h1_points)
def test_left_invariance(g, u, v):
    d = distance(u, v)
    assert distance(multiply(g, u), multiply(g, v)) == pytest.approx(d, rel=1e-10, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(scales, h1_points, h1_points)
def test_homogeneity(a, u, v):
    assert norm(dilate(a, u)) == pytest.approx(a * norm(u), rel=1e-12, abs=1e-300)
    assert distance(dilate(a, u), dilate(a, v)) == pytest.approx(a * distance(u, v), rel=1e-9, abs=1e-5)
    assert norm(inverse(u)) == pytest.approx(norm(u))


def test_dilation_semigroup():
    u = GroupElement.from_complex(0.3 - 1.2j, 0.7)
    np.testing.assert_allclose(dilate(2.0, dilate(3.0, u)).as_array(), dilate(6.0, u).as_array())


def test_batched_product_matches_elementwise(random_points):
    a, b = random_points(50), random_points(50)
    batch = group_product(a, b)
    for i in range(50):
        single = multiply(GroupElement.from_array(a[i]), GroupElement.from_array(b[i]))
        np.testing.assert_allclose(batch[i], single.as_array())


def test_unit_ball_volume_h1():
    p = GroupParams(1)
    assert unit_ball_volume(p) == pytest.approx(np.pi**2 / 2.0, rel=1e-12)
    assert radial_unit_ball_volume(p) == pytest.approx(np.pi**2 / 2.0, rel=1e-9)
    assert displayed_unit_ball_volume(p) == pytest.approx(np.pi**2, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_volume_routes_agree(n):
    p = GroupParams(n)
    assert radial_unit_ball_volume(p) == pytest.approx(unit_ball_volume(p), rel=1e-8)
    assert displayed_unit_ball_volume(p) == pytest.approx(2.0 * unit_ball_volume(p), rel=1e-12)
    est, se = monte_carlo_unit_ball_volume(p, 400_000, seed=3)
    assert abs(est - unit_ball_volume(p)) < 4.0 * se


def test_ball_volume_scaling(origin):
    b = Ball(origin, 1.0)
    assert ball_volume(b) == pytest.approx(np.pi**2 / 2.0)
    assert ball_volume(b.scaled(2.0)) == pytest.approx(16.0 * ball_volume(b), rel=1e-14)
    with pytest.raises(InvalidParameterError):
        Ball(origin, 0.0)


def test_ball_contains(origin):
    b = Ball(origin, 1.0)
    assert b.contains(np.array([[0.5, 0.0, 0.0], [0.0, 0.0, 1.0]])).tolist() == [True, False]


def test_gradient_of_coordinates(h1):
    u = np.array([[0.4, -1.3, 2.0]])
    t = Coordinate(2, h1)
    np.testing.assert_allclose(horizontal_gradient(t, u, 1e-3)[0], [2 * -1.3, -2 * 0.4], atol=1e-8)
    x = Coordinate(0, h1)
    np.testing.assert_allclose(horizontal_gradient(x, u, 1e-3)[0], [1.0, 0.0], atol=1e-9)
    c = ConstantFunction(3.0, h1)
    np.testing.assert_allclose(horizontal_gradient(c, u, 1e-3)[0], [0.0, 0.0], atol=1e-12)
    with pytest.raises(InvalidParameterError):
        horizontal_gradient(c, u, 0.0)


def test_gradient_second_order(origin):
    f = SmoothBump(origin, 1.0)
    u = np.array([[0.3, 0.2, 0.1]])
    coarse = horizontal_gradient(f, u, 2e-2)
    fine = horizontal_gradient(f, u, 1e-2)
    finest = horizontal_gradient(f, u, 5e-3)
    e1 = np.abs(coarse - fine).max()
    e2 = np.abs(fine - finest).max()
    assert e2 < e1
    assert e1 / e2 == pytest.approx(4.0, rel=0.25)


def test_koranyi_norm_batch_shape(random_points):
    pts = random_points(12).reshape(3, 4, 3)
    assert koranyi_norm(pts).shape == (3, 4)
