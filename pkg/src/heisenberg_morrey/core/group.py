"""
Heisenberg group arithmetic and homogeneous geometry.

A point (z, t) of H^n is stored as 2n+1 reals laid out as
[x_1..x_n, y_1..y_n, t] with z = x + iy. The array helpers below accept
any leading batch shape and broadcast like numpy ufuncs; the GroupElement
wrappers are for single points.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import integrate, special

from ..exceptions import DimensionMismatchError, InvalidParameterError


@dataclass(frozen=True)
class GroupParams:
    """Complex dimension n of H^n and the derived homogeneous dimension."""

    n: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameterError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def Q(self) -> int:
        return 2 * self.n + 2

    @property
    def dim(self) -> int:
        return 2 * self.n + 1


@dataclass(frozen=True)
class GroupElement:
    """A single point (x, y, t) of H^n."""

    x: Tuple[float, ...]
    y: Tuple[float, ...]
    t: float

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        y = tuple(float(v) for v in np.atleast_1d(self.y))
        t = float(self.t)
        if len(x) != len(y) or len(x) == 0:
            raise DimensionMismatchError(
                f"x and y must have the same positive length, got {len(x)} and {len(y)}"
            )
        if not np.all(np.isfinite(x + y + (t,))):
            raise InvalidParameterError("group element coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def params(self) -> GroupParams:
        return GroupParams(self.n)

    @property
    def z(self) -> np.ndarray:
        return np.asarray(self.x) + 1j * np.asarray(self.y)

    def as_array(self) -> np.ndarray:
        return np.array(self.x + self.y + (self.t,), dtype=np.float64)

    @classmethod
    def from_array(cls, coords) -> "GroupElement":
        coords = np.asarray(coords, dtype=np.float64).ravel()
        if coords.size % 2 != 1 or coords.size < 3:
            raise DimensionMismatchError(
                f"expected 2n+1 coordinates, got {coords.size}"
            )
        n = (coords.size - 1) // 2
        return cls(tuple(coords[:n]), tuple(coords[n : 2 * n]), coords[2 * n])

    @classmethod
    def from_complex(cls, z, t: float) -> "GroupElement":
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        return cls(tuple(z.real), tuple(z.imag), t)

    @classmethod
    def identity(cls, n: int = 1) -> "GroupElement":
        return cls((0.0,) * n, (0.0,) * n, 0.0)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def to_dict(self) -> dict:
        return {"x": list(self.x), "y": list(self.y), "t": self.t}

    @classmethod
    def from_dict(cls, data: dict) -> "GroupElement":
        return cls(tuple(data["x"]), tuple(data["y"]), data["t"])


@dataclass(frozen=True)
class Ball:
    """Korányi ball B(center, radius)."""

    center: GroupElement
    radius: float

    def __post_init__(self):
        r = float(self.radius)
        if not np.isfinite(r) or r <= 0.0:
            raise InvalidParameterError(f"ball radius must be positive and finite, got {r}")
        object.__setattr__(self, "radius", r)

    @property
    def params(self) -> GroupParams:
        return self.center.params

    def scaled(self, factor: float) -> "Ball":
        """Concentric ball with radius multiplied by factor."""
        return Ball(self.center, self.radius * factor)

    def contains(self, points) -> np.ndarray:
        points = as_points(points, self.center.n)
        return koranyi_distance(self.center.as_array(), points) < self.radius


PointsLike = Union[GroupElement, Sequence[float], np.ndarray]


def as_points(u: PointsLike, n: int = None) -> np.ndarray:
    """Coerce a GroupElement or coordinate array to a float64 array (..., 2n+1)."""
    if isinstance(u, GroupElement):
        arr = u.as_array()
    else:
        arr = np.asarray(u, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] % 2 != 1 or arr.shape[-1] < 3:
        raise DimensionMismatchError(f"last axis must hold 2n+1 coordinates, got shape {arr.shape}")
    if n is not None and arr.shape[-1] != 2 * n + 1:
        raise DimensionMismatchError(
            f"expected points of H^{n} ({2 * n + 1} coordinates), got {arr.shape[-1]}"
        )
    return arr


def _split(a: np.ndarray):
    n = (a.shape[-1] - 1) // 2
    return a[..., :n], a[..., n : 2 * n], a[..., 2 * n]


def group_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(z, t)(z', t') = (z + z', t + t' + 2 Im(z conj z')) on broadcast arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatchError(
            f"cannot multiply points with {a.shape[-1]} and {b.shape[-1]} coordinates"
        )
    x1, y1, t1 = _split(a)
    x2, y2, t2 = _split(b)
    n = x1.shape[-1]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=np.float64)
    out[..., : 2 * n] = a[..., : 2 * n] + b[..., : 2 * n]
    out[..., 2 * n] = t1 + t2 + 2.0 * np.sum(y1 * x2 - x1 * y2, axis=-1)
    return out


def group_inverse(a: np.ndarray) -> np.ndarray:
    return -np.asarray(a, dtype=np.float64)


def dilation(a: np.ndarray, r) -> np.ndarray:
    """delta_r(z, t) = (r z, r^2 t); r broadcasts against the batch shape."""
    a = np.asarray(a, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)[..., None]
    n = (a.shape[-1] - 1) // 2
    scale = np.concatenate(
        [np.broadcast_to(r, r.shape[:-1] + (2 * n,)), r**2], axis=-1
    )
    return a * scale


def horizontal_radius_sq(a: np.ndarray) -> np.ndarray:
    """|z|^2 of each point."""
    a = np.asarray(a, dtype=np.float64)
    n = (a.shape[-1] - 1) // 2
    return np.sum(a[..., : 2 * n] ** 2, axis=-1)


def koranyi_norm(a: np.ndarray) -> np.ndarray:
    """(|z|^4 + t^2)^(1/4)."""
    a = np.asarray(a, dtype=np.float64)
    return np.sqrt(np.hypot(horizontal_radius_sq(a), a[..., -1]))


def koranyi_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """|a^-1 b|, left invariant."""
    return koranyi_norm(group_product(group_inverse(a), b))


def polar_angle(a: np.ndarray) -> np.ndarray:
    """Korányi polar angle phi in [-pi/2, pi/2] with |z|^2 = r^2 cos(phi), t = r^2 sin(phi)."""
    a = np.asarray(a, dtype=np.float64)
    return np.arctan2(a[..., -1], horizontal_radius_sq(a))


def _check_same(u: GroupElement, v: GroupElement):
    if u.n != v.n:
        raise DimensionMismatchError(f"elements of H^{u.n} and H^{v.n} cannot be combined")


def multiply(u: GroupElement, v: GroupElement) -> GroupElement:
    _check_same(u, v)
    return GroupElement.from_array(group_product(u.as_array(), v.as_array()))


def inverse(u: GroupElement) -> GroupElement:
    return GroupElement.from_array(group_inverse(u.as_array()))


def dilate(a: float, u: GroupElement) -> GroupElement:
    if not a > 0:
        raise InvalidParameterError(f"dilation factor must be positive, got {a}")
    return GroupElement.from_array(dilation(u.as_array(), a))


def norm(u: GroupElement) -> float:
    return float(koranyi_norm(u.as_array()))


def distance(u: GroupElement, v: GroupElement) -> float:
    _check_same(u, v)
    return float(koranyi_distance(u.as_array(), v.as_array()))


def sphere_area(params: GroupParams) -> float:
    """Surface measure of S^{2n-1} in C^n."""
    n = params.n
    return 2.0 * np.pi**n / special.gamma(n)


def polar_angle_mass(params: GroupParams) -> float:
    """Integral of cos^{n-1}(phi) over [-pi/2, pi/2]."""
    n = params.n
    return np.sqrt(np.pi) * special.gamma(n / 2.0) / special.gamma((n + 1) / 2.0)


def unit_ball_volume(params: GroupParams) -> float:
    """Lebesgue measure of {|z|^4 + t^2 < 1}."""
    n = params.n
    return (
        np.pi**n
        * special.gamma(n / 2.0)
        * special.gamma(1.5)
        / (special.gamma(n) * special.gamma((n + 3) / 2.0))
    )


def displayed_unit_ball_volume(params: GroupParams) -> float:
    """Commonly printed constant 2 pi^(n+1/2) Gamma(n/2) / ((n+1) Gamma(n) Gamma((n+1)/2)).

    It is exactly twice unit_ball_volume; kept only for the errata report.
    """
    n = params.n
    return (
        2.0
        * np.pi ** (n + 0.5)
        * special.gamma(n / 2.0)
        / ((n + 1) * special.gamma(n) * special.gamma((n + 1) / 2.0))
    )


def radial_unit_ball_volume(params: GroupParams) -> float:
    """Unit-ball volume from the radial integral (2 pi^n / Gamma(n)) int_0^1 r^{2n-1} 2 sqrt(1 - r^4) dr."""
    n = params.n
    value, _ = integrate.quad(
        lambda r: r ** (2 * n - 1) * 2.0 * np.sqrt(max(1.0 - r**4, 0.0)),
        0.0,
        1.0,
        epsabs=1e-13,
        epsrel=1e-12,
    )
    return sphere_area(params) * value


def monte_carlo_unit_ball_volume(
    params: GroupParams, samples: int = 10**7, seed: int = 0, chunk: int = 10**6
) -> Tuple[float, float]:
    """Rejection estimate of the unit-ball volume over [-1, 1]^(2n+1).

    Returns:
        (estimate, standard error)
    """
    if samples < 2:
        raise InvalidParameterError("Monte-Carlo volume needs at least 2 samples")
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = int(samples)
    while remaining > 0:
        size = min(chunk, remaining)
        pts = rng.uniform(-1.0, 1.0, size=(size, params.dim))
        hits += int(np.count_nonzero(koranyi_norm(pts) < 1.0))
        remaining -= size
    box = 2.0**params.dim
    p = hits / samples
    return box * p, box * np.sqrt(p * (1.0 - p) / samples)


def ball_volume(b: Ball) -> float:
    """|B(u, r)| = r^Q |B(0, 1)|."""
    params = b.params
    return b.radius**params.Q * unit_ball_volume(params)


def horizontal_gradient(f, u: PointsLike, h: float = None) -> np.ndarray:
    """Central differences along the left-invariant fields X_j, Y_j.

    X_j f(u) ~ (f(u (h e_xj)) - f(u (-h e_xj))) / 2h, so the stencil moves
    along the exact integral curves of the fields. Returns an array whose
    last axis is (X_1 f, .., X_n f, Y_1 f, .., Y_n f).
    """
    pts = as_points(u)
    d = pts.shape[-1]
    n = (d - 1) // 2
    if h is None:
        step = 1e-4 * (1.0 + koranyi_norm(pts))
    else:
        if not h > 0:
            raise InvalidParameterError(f"finite-difference step must be positive, got {h}")
        step = np.full(pts.shape[:-1], float(h))
    step = np.asarray(step, dtype=np.float64)
    out = np.empty(pts.shape[:-1] + (2 * n,), dtype=np.float64)
    for k in range(2 * n):
        e = np.zeros(pts.shape[:-1] + (d,))
        e[..., k] = step
        forward = np.asarray(f(group_product(pts, e)), dtype=np.float64)
        backward = np.asarray(f(group_product(pts, -e)), dtype=np.float64)
        out[..., k] = (forward - backward) / (2.0 * step)
    if isinstance(u, GroupElement):
        return out.reshape(2 * n)
    return out
