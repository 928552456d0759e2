"""
The fractional integral I_alpha = L^(-alpha/2).

fractional_integral_apply takes the time route, integrating exp(-sL) f(u)
against s^(alpha/2 - 1) on a log-time rule with both tails estimated.
FractionalIntegral evaluates I_alpha f at many points at once: by the
kernel profiles for zero and constant potentials, by grid propagation
otherwise.
"""

from typing import NamedTuple, Optional

import numpy as np
from scipy import special
from tqdm import tqdm

from ..exceptions import InvalidParameterError, TailError
from .functions import TestFunction
from .group import (
    GroupElement,
    GroupParams,
    as_points,
    dilation,
    group_inverse,
    group_product,
    koranyi_distance,
    koranyi_norm,
    polar_angle,
)
from .heat import HeatQuadrature, group_heat_peak
from .kernels import SubordinationSpec, check_alpha, riesz_profile, subordination_rule
from .potential import Potential, RhoCache, critical_radius
from .quadrature import QuadratureSpec, ball_integration_nodes, polar_rule
from .trotter import TrotterGrid, TrotterSpec, schrodinger_semigroup_values

CHUNK = 2_000_000


class FractionalReport(NamedTuple):
    value: float
    lower_tail: float
    upper_tail: float
    tail_error: float
    s_min: float
    s_max: float
    nodes: int


def _masses(f: TestFunction, spec: QuadratureSpec):
    nodes = ball_integration_nodes(f.support_ball(), spec, f.focus_ball())
    values = f.evaluate(nodes.points)
    return nodes.integrate(values), nodes.integrate(np.abs(values))


def fractional_integral_report(
    V: Potential,
    f: TestFunction,
    u: GroupElement,
    sub: SubordinationSpec,
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    rho: Optional[RhoCache] = None,
    progress: bool = False,
) -> FractionalReport:
    """Time-route I_alpha f(u) with its tail estimates.

    Below s_min exp(-sL) f(u) ~ f(u); above s_max it is bounded through
    heat domination by |f|_1 H_1(0) s^(-Q/2).
    """
    params = f.params
    alpha = sub.alpha
    check_alpha(alpha, params)
    if f.support_ball() is None:
        raise InvalidParameterError(f"{f.label} has no compact support; the time route needs one")
    ball = f.support_ball()
    Q = params.Q
    rho_u = np.inf if V.is_zero else (rho or RhoCache(V))(u)
    D = float(koranyi_distance(ball.center.as_array(), u.as_array())) + ball.radius
    s_min = sub.s_min if sub.s_min is not None else 1e-4 * ball.radius**2
    s_max = sub.window(D, rho_u)[1]
    c = V.constant_value
    grid_route = c is None
    if grid_route:
        s_max = min(s_max, ts.horizon * max(rho_u, ball.radius) ** 2)
    s, w = subordination_rule(alpha, s_min, s_max, sub)
    gamma = special.gamma(0.5 * alpha)

    if grid_route:
        series = _grid_series(V, f, s, u.as_array()[None, :], ts, progress)[:, 0]
    else:
        iterator = tqdm(s, desc="  Time nodes", unit=" s") if progress else s
        series = np.array(
            [float(schrodinger_semigroup_values(V, si, f, u.as_array()[None, :], ts, hq)[0]) for si in iterator]
        )
    value = float(w @ series)

    f_u = float(f(u))
    lower = f_u * s_min ** (0.5 * alpha) / (0.5 * alpha) / gamma
    lower_error = abs(series[0] - f_u) * s_min ** (0.5 * alpha) / (0.5 * alpha) / gamma

    if grid_route:
        g = series * s ** (0.5 * alpha - 1.0)
        upper, upper_error = _decay_tail(g, s, gamma)
    else:
        signed, absolute = _masses(f, QuadratureSpec(resolution=ts.convolution_resolution))
        peak = group_heat_peak(params, hq)
        damping = np.exp(-c * s_max)
        scale = peak * 2.0 / (Q - alpha) * s_max ** (0.5 * (alpha - Q)) / gamma * damping
        upper = signed * scale
        upper_error = absolute * scale * (D * D / s_max if c == 0.0 else 1.0)
    total = value + lower + upper
    tail_error = lower_error + upper_error
    if tail_error > sub.tail_tolerance * max(abs(total), 1e-300):
        raise TailError(
            f"tail error {tail_error:.3e} exceeds {sub.tail_tolerance:g} x |I f(u)| = {abs(total):.3e}"
        )
    return FractionalReport(total, lower, upper, tail_error, s_min, s_max, len(s))


def fractional_integral_apply(
    V: Potential,
    f: TestFunction,
    u: GroupElement,
    sub: SubordinationSpec,
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    rho: Optional[RhoCache] = None,
) -> float:
    return fractional_integral_report(V, f, u, sub, ts, hq, rho).value


def _decay_tail(g: np.ndarray, s: np.ndarray, gamma: float):
    """Tail of sum over the last nodes of a series decaying like exp(-rate s)."""
    if np.all(g[-2:] == 0.0):
        return 0.0, 0.0
    if not (g[-1] > 0 and g[-2] > g[-1]):
        raise TailError(f"subordination integrand is not decaying at s={s[-1]:.4g}")
    rate = np.log(g[-2] / g[-1]) / (s[-1] - s[-2])
    tail = g[-1] / rate / gamma
    return tail, tail


def _grid_series(V, f, times, points, ts, progress=False):
    """Grid read-outs of exp(-sL) f at each time; shape (len(times), P)."""
    mass = f.mass_ball(ts.truncation_eps)
    grid = TrotterGrid.for_sources(
        V, float(times[-1]), mass.center.as_array(), ts, extent=mass.radius, points=points
    )
    g0 = grid.sample(f)
    grid.check_sampling(f, g0)
    return grid.evolve_through(g0, times, points, progress)


class FractionalImage(TestFunction):
    """u -> (I_alpha base)(u) for a fixed operator."""

    def __init__(self, operator: "FractionalIntegral", base: TestFunction):
        super().__init__(base.params)
        self.operator = operator
        self.base = base

    def evaluate(self, points):
        return self.operator.values(self.base, points)

    def focus_ball(self):
        return self.base.focus_ball()

    @property
    def label(self):
        return f"I_{self.operator.alpha:g} {self.base.label}"


class FractionalIntegral:
    """Bulk evaluator of I_alpha for one potential.

    Zero and constant potentials integrate the kernel profile against f:
    near the support of f with a polar rule centred at the evaluation point
    whose radial Jacobi weight absorbs |w|^(alpha-Q), far from it over the
    support. Other potentials propagate f on the Trotter grid.
    """

    def __init__(
        self,
        V: Potential,
        alpha: float,
        params: GroupParams = GroupParams(),
        sub: Optional[SubordinationSpec] = None,
        ts: TrotterSpec = TrotterSpec(),
        hq: HeatQuadrature = HeatQuadrature(),
        resolution: int = 24,
        logger=None,
    ):
        check_alpha(alpha, params)
        self.V = V
        self.alpha = float(alpha)
        self.params = params
        self.sub = sub or SubordinationSpec(alpha)
        self.ts = ts
        self.hq = hq
        self.spec = QuadratureSpec(resolution=resolution)
        self.logger = logger
        c = V.constant_value
        self.profile = None if c is None else riesz_profile(params, self.alpha, float(c), hq)
        self.rule = polar_rule(params, resolution, resolution, resolution, exponent=self.alpha - 1.0)

    def __call__(self, f: TestFunction) -> FractionalImage:
        return FractionalImage(self, f)

    def values(self, f: TestFunction, points, progress: bool = False) -> np.ndarray:
        pts = as_points(points, self.params.n)
        flat = pts.reshape(-1, self.params.dim)
        out = np.zeros(len(flat))
        for coef, g in f.terms():
            if coef == 0.0:
                continue
            if self.profile is None:
                out += coef * self._grid_values(g, flat, progress)
            else:
                out += coef * self._kernel_values(g, flat)
        return out.reshape(pts.shape[:-1])

    def _kernel_values(self, g: TestFunction, pts: np.ndarray) -> np.ndarray:
        ball = g.support_ball()
        if ball is None:
            raise InvalidParameterError(f"{g.label} has no compact support; I_alpha needs one")
        c = ball.center.as_array()
        dist = koranyi_distance(c, pts)
        near = dist <= 2.0 * ball.radius
        out = np.empty(len(pts))
        if np.any(near):
            out[near] = self._near(g, pts[near], dist[near] + ball.radius)
        if np.any(~near):
            out[~near] = self._far(g, ball, pts[~near])
        return out

    def _near(self, g, pts, radii):
        unit = self.rule.points
        weights = self.rule.weights
        out = np.empty(len(pts))
        step = max(1, CHUNK // len(weights))
        phi = polar_angle(unit)
        for a in range(0, len(pts), step):
            u = pts[a : a + step]
            R = radii[a : a + step]
            w = dilation(unit[None, :, :], R[:, None])
            sigma = self.profile.c * koranyi_norm(w) ** 2
            k = self.profile.unit(np.broadcast_to(phi, sigma.shape), sigma)
            moved = group_product(u[:, None, :], group_inverse(w))
            gv = g.evaluate(moved.reshape(-1, moved.shape[-1])).reshape(moved.shape[:-1])
            out[a : a + step] = R**self.alpha * np.sum(weights * k * gv, axis=1)
        return out

    def _far(self, g, ball, pts):
        nodes = ball_integration_nodes(ball, self.spec, g.focus_ball())
        gw = g.evaluate(nodes.points) * nodes.weights
        v_inv = group_inverse(nodes.points)
        out = np.empty(len(pts))
        step = max(1, CHUNK // len(gw))
        for a in range(0, len(pts), step):
            K = self.profile(group_product(v_inv[None, :, :], pts[a : a + step, None, :]))
            out[a : a + step] = K @ gw
        return out

    def _grid_values(self, g: TestFunction, pts: np.ndarray, progress: bool) -> np.ndarray:
        ball = g.support_ball()
        if ball is None:
            raise InvalidParameterError(f"{g.label} has no compact support; I_alpha needs one")
        rho0 = critical_radius(self.V, ball.center)
        s_min = 1e-4 * ball.radius**2
        s_max = self.ts.horizon * max(rho0, ball.radius) ** 2
        s, w = subordination_rule(self.alpha, s_min, s_max, self.sub)
        series = _grid_series(self.V, g, s, pts, self.ts, progress)
        gamma = special.gamma(0.5 * self.alpha)
        value = w @ series
        lower = g.evaluate(pts) * s_min ** (0.5 * self.alpha) / (0.5 * self.alpha) / gamma
        decaying = series * s[:, None] ** (0.5 * self.alpha - 1.0)
        upper = np.zeros(len(pts))
        for i in range(len(pts)):
            upper[i], _ = _decay_tail(decaying[:, i], s, gamma)
        if self.logger is not None:
            self.logger.info(f"grid route for {g.label}: {len(s)} time nodes up to s={s_max:.4g}")
        return value + lower + upper
