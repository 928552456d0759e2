"""
Closed-form potentials V >= 0, the reverse Hölder constant, and the
critical radius function

    rho(u) = sup{ r > 0 : r^(2-Q) int_{B(u,r)} V <= 1 }.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import BracketingError, FitInfeasibleError, InvalidParameterError
from .group import (
    Ball,
    GroupElement,
    GroupParams,
    as_points,
    dilation,
    distance,
    group_product,
    koranyi_distance,
    koranyi_norm,
)
from .quadrature import QuadratureSpec, ball_family, sample_ball

KINDS = ("zero", "constant", "power")
BRACKET = (1e-8, 1e8, 64)


@dataclass(frozen=True)
class Potential:
    """zero, constant(value) or power: value * |u|^exponent."""

    kind: str = "zero"
    value: float = 0.0
    exponent: float = 0.0

    def __post_init__(self):
        kind = {"homogeneous-power": "power", "homogeneouspower": "power"}.get(
            str(self.kind).lower(), str(self.kind).lower()
        )
        if kind not in KINDS:
            raise InvalidParameterError(f"potential kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "exponent", float(self.exponent))
        if kind == "zero":
            object.__setattr__(self, "value", 0.0)
            object.__setattr__(self, "exponent", 0.0)
        elif not self.value > 0 or not np.isfinite(self.value):
            raise InvalidParameterError(f"{kind} potential needs a positive value, got {self.value}")
        if kind == "power" and not self.exponent >= 0:
            raise InvalidParameterError(f"power exponent must be >= 0, got {self.exponent}")

    @classmethod
    def zero(cls) -> "Potential":
        return cls("zero")

    @classmethod
    def constant(cls, c: float) -> "Potential":
        return cls("constant", c)

    @classmethod
    def homogeneous_power(cls, a: float, scale: float = 1.0) -> "Potential":
        return cls("power", scale, a)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @property
    def constant_value(self) -> Optional[float]:
        """The constant c when V == c everywhere (0 for Zero), else None."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant" or self.exponent == 0.0:
            return self.value
        return None

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        if self.kind == "zero":
            return np.zeros(pts.shape[:-1])
        if self.kind == "constant":
            return np.full(pts.shape[:-1], self.value)
        return self.value * koranyi_norm(pts) ** self.exponent

    @property
    def label(self) -> str:
        if self.kind == "zero":
            return "zero"
        if self.kind == "constant":
            return f"constant({self.value:g})"
        return f"power(a={self.exponent:g},k={self.value:g})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "exponent": self.exponent}

    @classmethod
    def from_dict(cls, data: dict) -> "Potential":
        return cls(data.get("kind", "zero"), data.get("value", 0.0), data.get("exponent", 0.0))


def evaluate_potential(V: Potential, u: GroupElement) -> float:
    return float(V(u.as_array()))


@dataclass
class RHEstimate:
    s: float
    constant: float
    balls_tested: int
    witness: Ball


def rh_constant_estimate(
    V: Potential,
    s: float,
    sampler: QuadratureSpec,
    ball_count: int,
    params: GroupParams = GroupParams(),
    center_box: float = 10.0,
    radius_min: float = 1e-2,
    radius_max: float = 1e2,
) -> RHEstimate:
    """sup over a ball family of (avg_B V^s)^(1/s) / avg_B V."""
    if not s > 1:
        raise InvalidParameterError(f"reverse Hölder exponent must exceed 1, got {s}")
    if V.is_zero:
        raise InvalidParameterError("reverse Hölder constant is undefined for the zero potential")
    balls = ball_family(
        params, ball_count, sampler.seed, radius_min, radius_max, center_box
    )
    ratios = np.empty(len(balls))
    for i, b in enumerate(balls):
        nodes = sample_ball(b, sampler, i)
        w = nodes.weights / np.sum(nodes.weights)
        v = V(nodes.points)
        ratios[i] = np.dot(w, v**s) ** (1.0 / s) / np.dot(w, v)
    k = int(np.argmax(ratios))
    return RHEstimate(float(s), float(ratios[k]), len(balls), balls[k])


def _unit_nodes(params: GroupParams, spec: QuadratureSpec):
    return sample_ball(Ball(GroupElement.identity(params.n), 1.0), spec)


def _F(V: Potential, centers: np.ndarray, radii: np.ndarray, unit, chunk: int = 2_000_000):
    """r^2 * sum_i w_i V(u . delta_r w_i) for paired (centers, radii)."""
    M = len(unit.weights)
    step = max(1, chunk // max(M, 1))
    out = np.empty(len(centers))
    for a in range(0, len(centers), step):
        c = centers[a : a + step]
        r = radii[a : a + step]
        pts = group_product(c[:, None, :], dilation(unit.points[None, :, :], r[:, None]))
        out[a : a + step] = r**2 * (V(pts) @ unit.weights)
    return out


def critical_radii(
    V: Potential, points, tol: float = 1e-8, spec: Optional[QuadratureSpec] = None
) -> np.ndarray:
    """rho at each row of points (shape (P, 2n+1)).

    F(r) is bracketed on a 64-point log grid over [1e-8, 1e8]; the largest
    grid crossing of F = 1 is bisected in log r to relative width tol.
    """
    if V.is_zero:
        raise InvalidParameterError("the zero potential has rho = infinity")
    if not tol > 0:
        raise InvalidParameterError(f"tolerance must be positive, got {tol}")
    pts = as_points(points)
    pts = pts.reshape(-1, pts.shape[-1])
    params = GroupParams((pts.shape[-1] - 1) // 2)
    spec = spec or QuadratureSpec(resolution=16)
    unit = _unit_nodes(params, spec)

    grid = np.geomspace(*BRACKET)
    P = len(pts)
    F = np.empty((P, len(grid)))
    for j, r in enumerate(grid):
        F[:, j] = _F(V, pts, np.full(P, r), unit)
    if not np.all(np.isfinite(F)):
        raise BracketingError("F(r) is not finite on the bracketing grid")

    below = F <= 1.0
    crossing = below[:, :-1] & ~below[:, 1:]
    has = crossing.any(axis=1)
    if not np.all(has):
        bad = int(np.flatnonzero(~has)[0])
        raise BracketingError(
            f"F(r) never crosses 1 on [{BRACKET[0]:g}, {BRACKET[1]:g}] at point {pts[bad].tolist()}"
        )
    last = crossing.shape[1] - 1 - np.argmax(crossing[:, ::-1], axis=1)
    lo = grid[last].copy()
    hi = grid[last + 1].copy()
    while np.max(hi / lo) - 1.0 > tol:
        mid = np.sqrt(lo * hi)
        ok = _F(V, pts, mid, unit) <= 1.0
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return np.sqrt(lo * hi)


def critical_radius(
    V: Potential, u: GroupElement, tol: float = 1e-8, spec: Optional[QuadratureSpec] = None
) -> float:
    return float(critical_radii(V, u.as_array()[None, :], tol, spec)[0])


class RhoCache:
    """Lazily evaluated rho, memoized per point; infinite for the zero potential."""

    def __init__(self, V: Potential, tol: float = 1e-8, spec: Optional[QuadratureSpec] = None):
        self.V = V
        self.tol = tol
        self.spec = spec
        self._values = {}

    def __call__(self, u) -> float:
        return float(self.many(as_points(u)[None, :])[0])

    def many(self, points) -> np.ndarray:
        pts = as_points(points)
        pts = pts.reshape(-1, pts.shape[-1])
        if self.V.is_zero:
            return np.full(len(pts), np.inf)
        if self.V.constant_value is not None:
            pts = np.zeros((1, pts.shape[-1])).repeat(len(pts), axis=0)
        keys = [tuple(p) for p in pts]
        missing = sorted({k for k in keys if k not in self._values})
        if missing:
            values = critical_radii(self.V, np.array(missing), self.tol, self.spec)
            self._values.update(zip(missing, values))
        return np.array([self._values[k] for k in keys])


@dataclass(frozen=True)
class RhoComparability:
    """Constants of C0^-1 (1 + d/rho(u))^-N0 <= rho(v)/rho(u) <= C0 (1 + d/rho(u))^(N0/(N0+1))."""

    C0: float
    N0: float

    def __post_init__(self):
        if not self.C0 >= 1 or not self.N0 > 0:
            raise InvalidParameterError(f"need C0 >= 1 and N0 > 0, got ({self.C0}, {self.N0})")

    def holds(self, rho_u, rho_v, d, slack: float = 1e-9) -> np.ndarray:
        return _comparable(np.asarray(rho_v) / rho_u, 1.0 + np.asarray(d) / rho_u, self.C0, self.N0, slack)


def _comparable(ratio, x, C0, N0, slack):
    upper = ratio <= C0 * x ** (N0 / (N0 + 1.0)) * (1.0 + slack)
    lower = ratio >= x ** (-N0) / C0 * (1.0 - slack)
    return upper & lower


def fit_rho_comparability(
    V: Potential,
    pairs: Sequence[Tuple[GroupElement, GroupElement]],
    rho: Optional[RhoCache] = None,
    C0_grid: Optional[np.ndarray] = None,
    N0_grid: Optional[np.ndarray] = None,
) -> RhoComparability:
    """Smallest C0, then smallest N0, on a 32x32 log grid satisfying both bounds on all pairs."""
    if len(pairs) < 10:
        raise InvalidParameterError(f"need at least 10 pairs, got {len(pairs)}")
    if V.is_zero:
        raise InvalidParameterError("rho comparability is undefined for the zero potential")
    rho = rho or RhoCache(V)
    us = np.array([u.as_array() for u, _ in pairs])
    vs = np.array([v.as_array() for _, v in pairs])
    ru = rho.many(us)
    rv = rho.many(vs)
    d = koranyi_distance(us, vs)
    ratio = rv / ru
    x = 1.0 + d / ru
    C0_grid = np.geomspace(1.0, 16.0, 32) if C0_grid is None else C0_grid
    N0_grid = np.geomspace(0.1, 10.0, 32) if N0_grid is None else N0_grid
    for C0 in C0_grid:
        for N0 in N0_grid:
            if np.all(_comparable(ratio, x, C0, N0, 1e-9)):
                return RhoComparability(float(C0), float(N0))
    raise FitInfeasibleError(
        f"no (C0, N0) in [1, 16] x [0.1, 10] fits {len(pairs)} pairs; "
        f"ratio range [{ratio.min():.4g}, {ratio.max():.4g}]"
    )


@dataclass
class Com2Report:
    checked: int
    violations: int
    worst_margin: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def com2_terms(rho_u: float, rho_v, r: float, k, C0: float, N0: float):
    """(lhs, rhs) of 1 + 2^k r/rho(v) >= C0^-1 (1 + r/rho(u))^(-N0/(N0+1)) (1 + 2^k r/rho(u))."""
    scale = 2.0 ** np.asarray(k, dtype=np.float64) * r
    lhs = 1.0 + scale / rho_v
    rhs = (1.0 + r / rho_u) ** (-N0 / (N0 + 1.0)) * (1.0 + scale / rho_u) / C0
    return np.broadcast_arrays(lhs, rhs)


def check_com2(
    V: Potential,
    C0: float,
    N0: float,
    u: GroupElement,
    r: float,
    k_max: int,
    trials: int,
    seed: int = 0,
    k_min: int = 1,
    rho: Optional[RhoCache] = None,
) -> Com2Report:
    """Sample v in B(u, r) and check the inequality for k = k_min..k_max."""
    rho = rho or RhoCache(V)
    nodes = sample_ball(Ball(u, r), QuadratureSpec("monte-carlo", max(int(trials), 2), seed))
    rv = rho.many(nodes.points)
    ru = rho(u)
    k = np.arange(k_min, k_max + 1)
    lhs, rhs = com2_terms(ru, rv[:, None], r, k[None, :], C0, N0)
    margin = lhs / rhs - 1.0
    violations = int(np.count_nonzero(lhs < rhs * (1.0 - 1e-12)))
    return Com2Report(int(lhs.size), violations, float(margin.min()))
