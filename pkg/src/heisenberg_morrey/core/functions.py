"""
Closed-form test functions on H^n.

Each function evaluates on coordinate arrays of shape (M, 2n+1) and knows
its support (when compact) and, where the level sets are Korányi balls,
the exact measure of {|f| > lambda}.
"""

from abc import ABC, abstractmethod
from numbers import Real
from typing import Optional, Sequence, Tuple

import numpy as np

from ..exceptions import InvalidParameterError
from .group import (
    Ball,
    GroupElement,
    GroupParams,
    as_points,
    ball_volume,
    dilation,
    distance,
    group_product,
    horizontal_gradient,
    inverse,
    koranyi_distance,
    multiply,
    unit_ball_volume,
)

BUMP_SUPPORT = 6.0


class TestFunction(ABC):
    """Scalar function on H^n evaluable at any point."""

    __test__ = False

    def __init__(self, params: GroupParams):
        self.params = params

    @abstractmethod
    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Values at points of shape (M, 2n+1)."""

    def __call__(self, u):
        if isinstance(u, GroupElement):
            return float(self.evaluate(u.as_array()[None, :])[0])
        pts = as_points(u, self.params.n)
        flat = pts.reshape(-1, pts.shape[-1])
        return self.evaluate(flat).reshape(pts.shape[:-1])

    def support_ball(self) -> Optional[Ball]:
        return None

    def focus_ball(self) -> Optional[Ball]:
        return self.support_ball()

    def mass_ball(self, eps: float = 1e-6) -> Optional[Ball]:
        """Ball outside which |f| < eps sup|f|; the support ball unless known sharper."""
        return self.support_ball()

    def level_set_volume(self, lam: float) -> Optional[float]:
        """|{|f| > lam}| when known in closed form, else None."""
        return None

    def level_candidates(self) -> Tuple[float, ...]:
        """Levels at which |{|f| > lam}| jumps."""
        return ()

    def sup_value(self) -> float:
        return np.inf

    def terms(self) -> Tuple[Tuple[float, "TestFunction"], ...]:
        return ((1.0, self),)

    @property
    def label(self) -> str:
        return type(self).__name__.lower()

    def to_dict(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} has no serialized form")

    def translate(self, g: GroupElement) -> "TestFunction":
        """u -> f(g^-1 u)."""
        return Translated(self, g)

    def compose_dilation(self, a: float) -> "TestFunction":
        """u -> f(delta_a u)."""
        return Dilated(self, a)

    def __add__(self, other):
        if isinstance(other, Real):
            other = ConstantFunction(float(other), self.params)
        return LinearCombination(self.terms() + other.terms())

    __radd__ = __add__

    def __mul__(self, c):
        if not isinstance(c, Real):
            return NotImplemented
        return LinearCombination(tuple((float(c) * a, f) for a, f in self.terms()))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)


class Bump(TestFunction):
    """exp(-(d(center, u) / width)^2), truncated at 6 widths."""

    def __init__(self, center: GroupElement, width: float):
        if not width > 0:
            raise InvalidParameterError(f"bump width must be positive, got {width}")
        super().__init__(center.params)
        self.center = center
        self.width = float(width)

    def evaluate(self, points):
        d = koranyi_distance(self.center.as_array(), points) / self.width
        out = np.exp(-(d**2))
        out[d >= BUMP_SUPPORT] = 0.0
        return out

    def support_ball(self):
        return Ball(self.center, BUMP_SUPPORT * self.width)

    def mass_ball(self, eps=1e-6):
        radius = self.width * np.sqrt(np.log(1.0 / eps))
        return Ball(self.center, min(radius, BUMP_SUPPORT * self.width))

    def level_set_volume(self, lam):
        if lam >= 1.0:
            return 0.0
        if lam <= np.exp(-(BUMP_SUPPORT**2)):
            return ball_volume(self.support_ball())
        radius = self.width * np.sqrt(np.log(1.0 / lam))
        return unit_ball_volume(self.params) * radius**self.params.Q

    def level_candidates(self):
        return (1.0,)

    def sup_value(self):
        return 1.0

    @property
    def label(self):
        return f"bump(w={self.width:.4g},c={_fmt(self.center)})"

    def to_dict(self):
        return {"kind": "bump", "center": self.center.to_dict(), "width": self.width}


class SmoothBump(TestFunction):
    """exp(-|z'|^2 / w^2 - t'^2 / w^4) with (z', t') = center^-1 u.

    Unlike Bump this is smooth at the t-axis, which grid propagation needs.
    Below exp(-36) it is cut to 0 (outside the Korányi ball of radius ~6.1 w).
    """

    def __init__(self, center: GroupElement, width: float):
        if not width > 0:
            raise InvalidParameterError(f"bump width must be positive, got {width}")
        super().__init__(center.params)
        self.center = center
        self.width = float(width)

    def evaluate(self, points):
        local = group_product(inverse(self.center).as_array(), points)
        n = self.params.n
        q = np.sum(local[..., : 2 * n] ** 2, axis=-1) / self.width**2 + local[..., -1] ** 2 / self.width**4
        out = np.exp(-q)
        out[koranyi_distance(self.center.as_array(), points) >= self.support_ball().radius] = 0.0
        return out

    def support_ball(self):
        return Ball(self.center, np.sqrt(37.0) * self.width)

    def mass_ball(self, eps=1e-6):
        # for r >= w the slowest decay on the sphere of radius r is along z
        radius = self.width * max(1.0, np.sqrt(np.log(1.0 / eps)))
        return Ball(self.center, min(radius, np.sqrt(37.0) * self.width))

    def sup_value(self):
        return 1.0

    @property
    def label(self):
        return f"smooth-bump(w={self.width:.4g},c={_fmt(self.center)})"

    def to_dict(self):
        return {"kind": "smooth-bump", "center": self.center.to_dict(), "width": self.width}


class Power(TestFunction):
    """min(d(center, u)^-gamma, cap) on d < radius, 0 outside."""

    def __init__(
        self,
        gamma: float,
        radius: float = np.inf,
        cap: float = np.inf,
        center: Optional[GroupElement] = None,
        params: Optional[GroupParams] = None,
    ):
        if center is None:
            center = GroupElement.identity((params or GroupParams()).n)
        if not radius > 0 or not cap > 0:
            raise InvalidParameterError("power radius and cap must be positive")
        super().__init__(center.params)
        self.gamma = float(gamma)
        self.radius = float(radius)
        self.cap = float(cap)
        self.center = center

    def evaluate(self, points):
        d = koranyi_distance(self.center.as_array(), points)
        with np.errstate(divide="ignore"):
            out = np.minimum(d ** (-self.gamma), self.cap)
        if np.isfinite(self.radius):
            out[d >= self.radius] = 0.0
        return out

    def support_ball(self):
        return Ball(self.center, self.radius) if np.isfinite(self.radius) else None

    def focus_ball(self):
        if self.gamma > 0 and np.isfinite(self.cap):
            return Ball(self.center, min(2.0 * self.cap ** (-1.0 / self.gamma), self.radius))
        return self.support_ball()

    def level_set_volume(self, lam):
        Q = self.params.Q
        vol1 = unit_ball_volume(self.params)
        if lam >= self.sup_value():
            return 0.0
        if self.gamma > 0:
            r = min(lam ** (-1.0 / self.gamma), self.radius)
            return vol1 * r**Q
        if not np.isfinite(self.radius):
            return np.inf
        if self.gamma == 0:
            return vol1 * self.radius**Q
        inner = lam ** (1.0 / -self.gamma)
        return vol1 * max(self.radius**Q - inner**Q, 0.0)

    def level_candidates(self):
        levels = []
        if np.isfinite(self.cap):
            levels.append(self.cap)
        if np.isfinite(self.radius) and self.gamma > 0:
            levels.append(min(self.radius ** (-self.gamma), self.cap))
        return tuple(levels)

    def sup_value(self):
        if self.gamma > 0:
            return self.cap
        if self.gamma == 0:
            return min(1.0, self.cap)
        return min(self.radius ** (-self.gamma), self.cap)

    @property
    def label(self):
        return f"power(g={self.gamma:.4g},R={self.radius:.4g},c={_fmt(self.center)})"

    def to_dict(self):
        return {
            "kind": "power",
            "gamma": self.gamma,
            "radius": self.radius,
            "cap": self.cap,
            "center": self.center.to_dict(),
        }


class Indicator(TestFunction):
    def __init__(self, ball: Ball):
        super().__init__(ball.params)
        self.ball = ball

    def evaluate(self, points):
        return self.ball.contains(points).astype(np.float64)

    def support_ball(self):
        return self.ball

    def level_set_volume(self, lam):
        return ball_volume(self.ball) if lam < 1.0 else 0.0

    def level_candidates(self):
        return (1.0,)

    def sup_value(self):
        return 1.0

    @property
    def label(self):
        return f"indicator(r={self.ball.radius:.4g},c={_fmt(self.ball.center)})"

    def to_dict(self):
        return {"kind": "indicator", "center": self.ball.center.to_dict(), "radius": self.ball.radius}


class LogNorm(TestFunction):
    """ln d(center, u)."""

    def __init__(self, center: GroupElement):
        super().__init__(center.params)
        self.center = center

    def evaluate(self, points):
        with np.errstate(divide="ignore"):
            return np.log(koranyi_distance(self.center.as_array(), points))

    @property
    def label(self):
        return f"log(c={_fmt(self.center)})"

    def to_dict(self):
        return {"kind": "log", "center": self.center.to_dict()}


class Coordinate(TestFunction):
    """The index-th coordinate function (x_1..x_n, y_1..y_n, t)."""

    def __init__(self, index: int, params: GroupParams = GroupParams()):
        if not 0 <= index < params.dim:
            raise InvalidParameterError(f"coordinate index {index} out of range for H^{params.n}")
        super().__init__(params)
        self.index = int(index)

    def evaluate(self, points):
        return np.array(points[..., self.index], dtype=np.float64)

    @property
    def label(self):
        return f"coordinate({self.index})"

    def to_dict(self):
        return {"kind": "coordinate", "index": self.index}


class ConstantFunction(TestFunction):
    def __init__(self, value: float, params: GroupParams = GroupParams()):
        super().__init__(params)
        self.value = float(value)

    def evaluate(self, points):
        return np.full(points.shape[:-1], self.value)

    def sup_value(self):
        return abs(self.value)

    def level_set_volume(self, lam):
        return np.inf if lam < abs(self.value) else 0.0

    @property
    def label(self):
        return f"constant({self.value:.4g})"

    def to_dict(self):
        return {"kind": "constant", "value": self.value}


class LinearCombination(TestFunction):
    def __init__(self, terms: Sequence[Tuple[float, TestFunction]]):
        terms = tuple((float(c), f) for c, f in terms)
        if not terms:
            raise InvalidParameterError("linear combination needs at least one term")
        params = terms[0][1].params
        if any(f.params != params for _, f in terms):
            raise InvalidParameterError("cannot combine functions on different groups")
        super().__init__(params)
        self._terms = terms

    def evaluate(self, points):
        out = np.zeros(points.shape[:-1])
        for c, f in self._terms:
            out += c * f.evaluate(points)
        return out

    def terms(self):
        return self._terms

    def _enclosing(self, balls):
        if any(b is None for b in balls):
            return None
        anchor = balls[0].center
        radius = max(distance(anchor, b.center) + b.radius for b in balls)
        return Ball(anchor, radius)

    def support_ball(self):
        return self._enclosing([f.support_ball() for _, f in self._terms])

    def focus_ball(self):
        return self._enclosing([f.focus_ball() for _, f in self._terms])

    def level_set_volume(self, lam):
        if len(self._terms) != 1:
            return None
        c, f = self._terms[0]
        if c == 0.0:
            return 0.0
        return f.level_set_volume(lam / abs(c))

    def level_candidates(self):
        if len(self._terms) != 1:
            return ()
        c, f = self._terms[0]
        return tuple(abs(c) * v for v in f.level_candidates())

    def sup_value(self):
        return float(sum(abs(c) * f.sup_value() for c, f in self._terms))

    @property
    def label(self):
        return " + ".join(f"{c:.4g}*{f.label}" for c, f in self._terms)

    def to_dict(self):
        return {
            "kind": "combination",
            "terms": [{"coefficient": c, "function": f.to_dict()} for c, f in self._terms],
        }


class Translated(TestFunction):
    """u -> base(g^-1 u)."""

    def __init__(self, base: TestFunction, g: GroupElement):
        super().__init__(base.params)
        self.base = base
        self.g = g
        self._g_inv = inverse(g).as_array()

    def evaluate(self, points):
        return self.base.evaluate(group_product(self._g_inv, points))

    def support_ball(self):
        b = self.base.support_ball()
        return None if b is None else Ball(multiply(self.g, b.center), b.radius)

    def focus_ball(self):
        b = self.base.focus_ball()
        return None if b is None else Ball(multiply(self.g, b.center), b.radius)

    def mass_ball(self, eps=1e-6):
        b = self.base.mass_ball(eps)
        return None if b is None else Ball(multiply(self.g, b.center), b.radius)

    def level_set_volume(self, lam):
        return self.base.level_set_volume(lam)

    def level_candidates(self):
        return self.base.level_candidates()

    def sup_value(self):
        return self.base.sup_value()

    @property
    def label(self):
        return f"{self.base.label}@{_fmt(self.g)}"

    def to_dict(self):
        return {"kind": "translated", "base": self.base.to_dict(), "by": self.g.to_dict()}


class Dilated(TestFunction):
    """u -> base(delta_a u)."""

    def __init__(self, base: TestFunction, a: float):
        if not a > 0:
            raise InvalidParameterError(f"dilation factor must be positive, got {a}")
        super().__init__(base.params)
        self.base = base
        self.a = float(a)

    def evaluate(self, points):
        return self.base.evaluate(dilation(points, self.a))

    def _pull(self, b):
        if b is None:
            return None
        center = GroupElement.from_array(dilation(b.center.as_array(), 1.0 / self.a))
        return Ball(center, b.radius / self.a)

    def support_ball(self):
        return self._pull(self.base.support_ball())

    def focus_ball(self):
        return self._pull(self.base.focus_ball())

    def mass_ball(self, eps=1e-6):
        return self._pull(self.base.mass_ball(eps))

    def level_set_volume(self, lam):
        v = self.base.level_set_volume(lam)
        return None if v is None else v * self.a ** (-self.params.Q)

    def level_candidates(self):
        return self.base.level_candidates()

    def sup_value(self):
        return self.base.sup_value()

    @property
    def label(self):
        return f"{self.base.label}/dil={self.a:.4g}"

    def to_dict(self):
        return {"kind": "dilated", "base": self.base.to_dict(), "factor": self.a}


class GradientMagnitude(TestFunction):
    """|grad_H f| from central differences along X_j, Y_j."""

    def __init__(self, base: TestFunction, h: Optional[float] = None):
        super().__init__(base.params)
        self.base = base
        self.h = h

    def evaluate(self, points):
        grad = horizontal_gradient(self.base, points, self.h)
        return np.sqrt(np.sum(grad**2, axis=-1))

    def support_ball(self):
        return self.base.support_ball()

    def focus_ball(self):
        return self.base.focus_ball()

    @property
    def label(self):
        return f"|grad {self.base.label}|"


def _fmt(u: GroupElement) -> str:
    return "(" + ",".join(f"{v:.3g}" for v in u.as_array()) + ")"


def function_from_dict(data: dict, params: GroupParams = GroupParams()) -> TestFunction:
    """Build a catalog function from its serialized form."""
    kind = data.get("kind")

    def center(key="center"):
        if key in data:
            return GroupElement.from_dict(data[key])
        return GroupElement.identity(params.n)

    if kind == "bump":
        return Bump(center(), data["width"])
    if kind == "smooth-bump":
        return SmoothBump(center(), data["width"])
    if kind == "power":
        return Power(
            data["gamma"],
            data.get("radius", np.inf),
            data.get("cap", np.inf),
            center(),
        )
    if kind == "indicator":
        return Indicator(Ball(center(), data["radius"]))
    if kind == "log":
        return LogNorm(center())
    if kind == "coordinate":
        return Coordinate(data["index"], params)
    if kind == "constant":
        return ConstantFunction(data["value"], params)
    if kind == "combination":
        return LinearCombination(
            [(t["coefficient"], function_from_dict(t["function"], params)) for t in data["terms"]]
        )
    if kind == "translated":
        return Translated(function_from_dict(data["base"], params), GroupElement.from_dict(data["by"]))
    if kind == "dilated":
        return Dilated(function_from_dict(data["base"], params), data["factor"])
    raise InvalidParameterError(f"unknown test function kind {kind!r}")
