"""
Subordinated kernels of L^(-alpha/2) and checkers for the kernel estimates.

    K_alpha(u, v) = Gamma(alpha/2)^-1 int_0^inf P_s(u, v) s^(alpha/2 - 1) ds

For V = 0 and V = c the integral is taken in the scaled time tau = s/|w|^2,
w = v^-1 u, which makes the free kernel exactly homogeneous:
K(w) = |w|^(alpha-Q) k(phi, c|w|^2) with phi the Korányi polar angle.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import interpolate, special
from tqdm import tqdm

from ..exceptions import InvalidParameterError, SeparationError, TailError
from .group import (
    GroupElement,
    GroupParams,
    as_points,
    dilation,
    distance,
    group_inverse,
    group_product,
    koranyi_norm,
    polar_angle,
)
from .heat import BoundFit, HeatQuadrature, group_heat_kernel, group_heat_peak
from .potential import Potential, RhoCache
from .quadrature import log_time_rule
from .trotter import TrotterSpec, schrodinger_kernel_series

UNIT_WINDOW = (1e-4, 1e4)
SIGMA_RANGE = (-10.0, 5.0)


@dataclass(frozen=True)
class SubordinationSpec:
    """Log-time Gauss rule for the subordination integral.

    s_min / s_max of None take the window [1e-4 d^2, 1e4 max(d^2, rho^2)]
    around the scale d of the problem.
    """

    alpha: float = 1.0
    s_min: Optional[float] = None
    s_max: Optional[float] = None
    nodes: int = 128
    order: int = 16
    tail_tolerance: float = 1e-3

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidParameterError(f"alpha must be positive, got {self.alpha}")
        if self.s_min is not None and self.s_max is not None and not 0 < self.s_min < self.s_max:
            raise InvalidParameterError(
                f"subordination window must satisfy 0 < s_min < s_max, got [{self.s_min}, {self.s_max}]"
            )
        if self.nodes < 2 or self.order < 2:
            raise InvalidParameterError("subordination rule needs at least 2 nodes")
        if not self.tail_tolerance > 0:
            raise InvalidParameterError("tail tolerance must be positive")

    def window(self, d: float, rho: float = np.inf) -> Tuple[float, float]:
        scale = d * d
        lo = 1e-4 * scale if self.s_min is None else self.s_min
        hi = 1e4 * max(scale, rho * rho if np.isfinite(rho) else 0.0) if self.s_max is None else self.s_max
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "s_min": self.s_min,
            "s_max": self.s_max,
            "nodes": self.nodes,
            "order": self.order,
            "tail_tolerance": self.tail_tolerance,
        }


def check_alpha(alpha: float, params: GroupParams):
    if not 0 < alpha < params.Q:
        raise InvalidParameterError(f"alpha must lie in (0, Q) = (0, {params.Q}), got {alpha}")


def subordination_rule(
    alpha: float, s_lo: float, s_hi: float, sub: SubordinationSpec = SubordinationSpec(), max_panel_width: float = 1.0
) -> Tuple[np.ndarray, np.ndarray]:
    """(s, w) with sum(w * g(s)) ~ Gamma(alpha/2)^-1 int g(s) s^(alpha/2 - 1) ds."""
    s, w = log_time_rule(s_lo, s_hi, sub.nodes, sub.order, max_panel_width)
    return s, w * s ** (0.5 * alpha - 1.0) / special.gamma(0.5 * alpha)


def gamma_identity(
    alpha: float, d: float, A: float, Q: int, sub: SubordinationSpec = SubordinationSpec()
) -> Tuple[float, float]:
    """int_0^inf exp(-d^2/(A s)) s^((alpha-Q)/2 - 1) ds by the log-time rule, and its closed form.

    The rule covers [1e-4 a, 1e4 a] with a = d^2/A; the upper tail is added
    from the expansion of exp(-a/s) to second order.
    """
    if not 0 < alpha < Q or not d > 0 or not A > 0:
        raise InvalidParameterError("need 0 < alpha < Q, d > 0 and A > 0")
    beta = 0.5 * (alpha - Q)
    a = d * d / A
    lo, hi = 1e-4 * a, 1e4 * a
    s, w = log_time_rule(lo, hi, sub.nodes, sub.order)
    value = float(np.sum(w * np.exp(-a / s) * s ** (beta - 1.0)))
    value += (
        hi**beta / -beta
        - a * hi ** (beta - 1.0) / (1.0 - beta)
        + a * a * hi ** (beta - 2.0) / (2.0 * (2.0 - beta))
    )
    closed = special.gamma(-beta) * (A / (d * d)) ** (-beta)
    return value, float(closed)


def _unit_kernel(
    alpha: float, omega: np.ndarray, sigma: float, sub: SubordinationSpec, hq: HeatQuadrature
) -> np.ndarray:
    """k(phi, sigma) at unit-norm points omega (P, 2n+1)."""
    Q = omega.shape[-1] + 1
    lo, hi = UNIT_WINDOW
    width = 1.0
    if sigma > 0:
        hi = min(hi, 60.0 / sigma)
        width = min(1.0, 0.5 / sigma**0.25)
    if hi <= lo:
        return np.zeros(len(omega))
    tau, w = subordination_rule(alpha, lo, hi, sub, width)
    w = w * np.exp(-sigma * tau)
    out = np.empty(len(omega))
    step = max(1, 400_000 // len(tau))
    for a in range(0, len(omega), step):
        block = omega[a : a + step]
        H = group_heat_kernel(
            tau[:, None], np.broadcast_to(block[None, :, :], (len(tau),) + block.shape), hq
        )
        out[a : a + step] = w @ H
    if hi == UNIT_WINDOW[1]:
        params = GroupParams((Q - 2) // 2)
        tail = group_heat_peak(params, hq) * hi ** (0.5 * (alpha - Q)) * 2.0 / (Q - alpha)
        out += np.exp(-sigma * hi) * tail / special.gamma(0.5 * alpha)
    return out


def _normalized(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    d = koranyi_norm(points)
    if np.any(d == 0.0):
        raise InvalidParameterError("the fractional kernel is singular at the identity")
    return d, dilation(points, 1.0 / d)


def constant_kernel_values(
    alpha: float,
    c: float,
    points,
    sub: SubordinationSpec = SubordinationSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
) -> np.ndarray:
    """Gamma(alpha/2)^-1 int exp(-cs) H_s(w) s^(alpha/2-1) ds at points w (c = 0 is the free kernel)."""
    pts = as_points(points)
    flat = pts.reshape(-1, pts.shape[-1])
    check_alpha(alpha, GroupParams((flat.shape[-1] - 1) // 2))
    if c < 0:
        raise InvalidParameterError(f"potential constant must be nonnegative, got {c}")
    d, omega = _normalized(flat)
    Q = flat.shape[-1] + 1
    if c == 0.0:
        k = _unit_kernel(alpha, omega, 0.0, sub, hq)
    else:
        k = np.array([_unit_kernel(alpha, o[None, :], c * r * r, sub, hq)[0] for o, r in zip(omega, d)])
    return (d ** (alpha - Q) * k).reshape(pts.shape[:-1])


def riesz_kernel_free_values(
    alpha: float, points, sub: SubordinationSpec = SubordinationSpec(), hq: HeatQuadrature = HeatQuadrature()
) -> np.ndarray:
    return constant_kernel_values(alpha, 0.0, points, sub, hq)


def riesz_kernel_free(
    alpha: float, u: GroupElement, sub: SubordinationSpec = SubordinationSpec(), hq: HeatQuadrature = HeatQuadrature()
) -> float:
    return float(riesz_kernel_free_values(alpha, u.as_array(), sub, hq))


class RieszProfile:
    """Spline tables of k(phi) (free) or log k(log10 sigma, phi) (constant potential).

    K(w) = |w|^(alpha-Q) k(|phi(w)|, c|w|^2); the kernel is even in t.
    """

    def __init__(
        self,
        params: GroupParams,
        alpha: float,
        c: float = 0.0,
        hq: HeatQuadrature = HeatQuadrature(),
        sub: SubordinationSpec = SubordinationSpec(),
        phi_nodes: int = 33,
        sigma_nodes: int = 61,
    ):
        check_alpha(alpha, params)
        self.params = params
        self.alpha = float(alpha)
        self.c = float(c)
        self.phi = np.linspace(0.0, 0.5 * np.pi, phi_nodes)
        omega = np.zeros((phi_nodes, params.dim))
        omega[:, 0] = np.sqrt(np.cos(self.phi))
        omega[:, -1] = np.sin(self.phi)
        if self.c == 0.0:
            self._free = interpolate.CubicSpline(self.phi, _unit_kernel(alpha, omega, 0.0, sub, hq))
            self._table = None
        else:
            self.log_sigma = np.linspace(*SIGMA_RANGE, sigma_nodes)
            table = np.array([_unit_kernel(alpha, omega, 10.0**ls, sub, hq) for ls in self.log_sigma])
            self._free = None
            self._table = interpolate.RectBivariateSpline(
                self.log_sigma, self.phi, np.log(np.maximum(table, 1e-300)), kx=3, ky=3
            )

    def unit(self, phi, sigma=None) -> np.ndarray:
        phi = np.abs(np.asarray(phi, dtype=np.float64))
        if self._free is not None:
            return self._free(phi)
        ls = np.log10(np.maximum(np.asarray(sigma, dtype=np.float64), 1e-300))
        values = np.exp(self._table.ev(np.clip(ls, *SIGMA_RANGE), phi))
        return np.where(ls > SIGMA_RANGE[1], 0.0, values)

    def __call__(self, points) -> np.ndarray:
        pts = as_points(points, self.params.n)
        d = koranyi_norm(pts)
        with np.errstate(divide="ignore"):
            radial = d ** (self.alpha - self.params.Q)
        return radial * self.unit(polar_angle(pts), self.c * d * d)


@lru_cache(maxsize=16)
def riesz_profile(
    params: GroupParams, alpha: float, c: float = 0.0, hq: HeatQuadrature = HeatQuadrature()
) -> RieszProfile:
    return RieszProfile(params, alpha, c, hq)


def _grid_time_integrals(
    V: Potential,
    alpha: float,
    us: np.ndarray,
    v: GroupElement,
    rho_u: np.ndarray,
    sub: SubordinationSpec,
    ts: TrotterSpec,
    hq: HeatQuadrature,
    progress: bool = False,
) -> np.ndarray:
    """K(u_i, v) for every row of us from one grid propagation out of v."""
    d = koranyi_norm(group_product(group_inverse(v.as_array())[None, :], us))
    windows = np.array([sub.window(di, ri) for di, ri in zip(d, rho_u)])
    lo = float(windows[:, 0].min())
    hi = min(float(windows[:, 1].max()), ts.horizon * float(np.max(np.maximum(rho_u, d))) ** 2)
    s, w = subordination_rule(alpha, lo, hi, sub)
    P = schrodinger_kernel_series(V, s, us, v, ts, hq, method="grid", progress=progress)
    values = w @ P
    g = P * s[:, None] ** (0.5 * alpha - 1.0)
    gamma = special.gamma(0.5 * alpha)
    out = np.empty(len(us))
    for i in range(len(us)):
        if g[-1, i] <= 0.0:
            out[i] = values[i]
            continue
        rate = np.log(g[-2, i] / g[-1, i]) / (s[-1] - s[-2]) if g[-2, i] > 0 else 0.0
        if not rate > 0:
            raise TailError(f"subordination integrand does not decay at s={s[-1]:.4g} for point {i}")
        tail = g[-1, i] / rate / gamma
        if tail > sub.tail_tolerance * abs(values[i]):
            raise TailError(f"tail beyond s={s[-1]:.4g} is {tail:.3e}, value {values[i]:.3e}")
        out[i] = values[i] + tail
    return out


def fractional_kernel_values(
    V: Potential,
    alpha: float,
    us,
    v: GroupElement,
    sub: SubordinationSpec = SubordinationSpec(),
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    rho: Optional[RhoCache] = None,
    progress: bool = False,
) -> np.ndarray:
    """K_alpha(u, v) for a batch of u sharing the source v.

    Off the closed-form route one grid propagation serves the whole batch.
    """
    check_alpha(alpha, v.params)
    pts = as_points(us, v.n).reshape(-1, v.params.dim)
    w = group_product(group_inverse(v.as_array())[None, :], pts)
    if np.any(koranyi_norm(w) == 0.0):
        raise InvalidParameterError("the fractional kernel is singular on the diagonal")
    c = V.constant_value
    if c is not None:
        return constant_kernel_values(alpha, c, w, sub, hq)
    rho = rho or RhoCache(V)
    return _grid_time_integrals(V, alpha, pts, v, rho.many(pts), sub, ts, hq, progress)


def fractional_kernel(
    V: Potential,
    alpha: float,
    u: GroupElement,
    v: GroupElement,
    sub: SubordinationSpec = SubordinationSpec(),
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    rho: Optional[RhoCache] = None,
) -> float:
    """K_alpha(u, v) of L = -Delta + V."""
    check_alpha(alpha, u.params)
    if distance(u, v) == 0.0:
        raise InvalidParameterError("the fractional kernel is singular on the diagonal")
    return float(fractional_kernel_values(V, alpha, u.as_array()[None, :], v, sub, ts, hq, rho)[0])


def _by_source(sources: Sequence[GroupElement]):
    """Indices grouped by equal source element, in first-seen order."""
    groups = {}
    for i, v in enumerate(sources):
        groups.setdefault(v, []).append(i)
    return groups.items()


def _fit(values: np.ndarray, **extra) -> BoundFit:
    half = max(len(values) // 2, 1)
    return BoundFit(
        C_fit=float(np.max(values)),
        half_C=float(np.max(values[:half])),
        samples=len(values),
        witness=int(np.argmax(values)),
        **extra,
    )


def _rho_many(V: Potential, rho: Optional[RhoCache], points: np.ndarray) -> np.ndarray:
    if V.is_zero:
        return np.full(len(points), np.inf)
    return (rho or RhoCache(V)).many(points)


def check_kernel_bound(
    V: Potential,
    alpha: float,
    N: float,
    pairs: Sequence[Tuple[GroupElement, GroupElement]],
    sub: SubordinationSpec = SubordinationSpec(),
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    rho: Optional[RhoCache] = None,
    progress: bool = False,
) -> BoundFit:
    """C_fit = max K(u, v) |v^-1 u|^(Q-alpha) (1 + |v^-1 u| / rho(u))^N over pairs.

    Pairs sharing a source v are evaluated as one batch.
    """
    if len(pairs) == 0:
        raise InvalidParameterError("kernel bound check needs at least one pair")
    rho = rho if V.is_zero else (rho or RhoCache(V))
    Q = pairs[0][0].params.Q
    us = np.array([u.as_array() for u, _ in pairs])
    ru = _rho_many(V, rho, us)
    K = np.empty(len(pairs))
    groups = list(_by_source([v for _, v in pairs]))
    iterator = tqdm(groups, desc="  Kernel bound", unit=" sources") if progress else groups
    for v, idx in iterator:
        K[idx] = fractional_kernel_values(V, alpha, us[idx], v, sub, ts, hq, rho)
    d = np.array([distance(u, v) for u, v in pairs])
    values = K * d ** (Q - alpha) * (1.0 + d / ru) ** N
    return _fit(values, N=float(N))


def check_kernel_smoothness(
    V: Potential,
    alpha: float,
    delta: float,
    triples: Sequence[Tuple[GroupElement, GroupElement, GroupElement]],
    N: float = 0.0,
    sub: SubordinationSpec = SubordinationSpec(),
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    rho: Optional[RhoCache] = None,
    beyond_unit: bool = False,
) -> BoundFit:
    """C_fit = max |K(u,w) - K(v,w)| |w^-1 u|^(Q-alpha+delta) (1 + |w^-1 u|/rho(u))^N / |v^-1 u|^delta.

    Every triple must satisfy |v^-1 u| <= |w^-1 u| / 2. delta above 1 is
    accepted only with beyond_unit=True. Triples sharing w are evaluated as one batch.
    """
    if not delta > 0 or (delta > 1 and not beyond_unit):
        raise InvalidParameterError(f"smoothness exponent must lie in (0, 1], got {delta}")
    if len(triples) == 0:
        raise InvalidParameterError("kernel smoothness check needs at least one triple")
    rho = rho if V.is_zero else (rho or RhoCache(V))
    Q = triples[0][0].params.Q
    us = np.array([u.as_array() for u, _, _ in triples])
    vs = np.array([v.as_array() for _, v, _ in triples])
    ru = _rho_many(V, rho, us)
    h = np.array([distance(v, u) for u, v, _ in triples])
    d = np.array([distance(w, u) for u, _, w in triples])
    bad = np.flatnonzero(h > 0.5 * d)
    if len(bad):
        i = int(bad[0])
        raise SeparationError(f"triple {i}: |v^-1 u| = {h[i]:.4g} exceeds |w^-1 u| / 2 = {0.5 * d[i]:.4g}")
    values = np.zeros(len(triples))
    for w, idx in _by_source([w for _, _, w in triples]):
        idx = [i for i in idx if h[i] > 0.0]
        if not idx:
            continue
        K = fractional_kernel_values(V, alpha, np.vstack([us[idx], vs[idx]]), w, sub, ts, hq, rho)
        diff = np.abs(K[: len(idx)] - K[len(idx) :])
        values[idx] = diff * d[idx] ** (Q - alpha + delta) * (1.0 + d[idx] / ru[idx]) ** N / h[idx] ** delta
    return _fit(values, N=float(N), delta=float(delta))


def fit_smoothness_exponent(
    V: Potential,
    alpha: float,
    u: GroupElement,
    w: GroupElement,
    levels: int = 6,
    sub: SubordinationSpec = SubordinationSpec(),
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    rho: Optional[RhoCache] = None,
) -> float:
    """Order delta in |K(u h, w) - K(u, w)| ~ |h|^delta, clipped to [0, 1].

    h runs along X_1 from |w^-1 u| / 4 down by halves; delta is the
    least-squares slope of the log differences.
    """
    d = distance(w, u)
    if d == 0.0:
        raise InvalidParameterError("u and w must differ")
    if levels < 3:
        raise InvalidParameterError(f"need at least 3 levels, got {levels}")
    h = 0.25 * d * 0.5 ** np.arange(levels)
    steps = np.zeros((levels, u.params.dim))
    steps[:, 0] = h
    moved = group_product(u.as_array()[None, :], steps)
    K = fractional_kernel_values(V, alpha, np.vstack([u.as_array()[None, :], moved]), w, sub, ts, hq, rho)
    diff = np.abs(K[1:] - K[0])
    keep = diff > 0.0
    if np.count_nonzero(keep) < 2:
        return 1.0
    slope = np.polyfit(np.log(h[keep]), np.log(diff[keep]), 1)[0]
    return float(np.clip(slope, 0.0, 1.0))


def check_on_diagonal_decay(
    V: Potential,
    N: float,
    sample: Sequence[Tuple[float, GroupElement]],
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    rho: Optional[RhoCache] = None,
) -> BoundFit:
    """C_fit = max s^(Q/2) P_s(u, u) (1 + sqrt(s) / rho(u))^N."""
    if len(sample) == 0:
        raise InvalidParameterError("on-diagonal check needs a nonempty sample")
    Q = sample[0][1].params.Q
    ru = _rho_many(V, rho, np.array([u.as_array() for _, u in sample]))
    values = np.empty(len(sample))
    for i, (s, u) in enumerate(sample):
        P = float(schrodinger_kernel_series(V, [s], u, u, ts, hq)[0, 0])
        values[i] = s ** (0.5 * Q) * P * (1.0 + np.sqrt(s) / ru[i]) ** N
    return _fit(values, N=float(N))


def check_heat_smoothness(
    V: Potential,
    delta: float,
    N: float,
    A: float,
    quads: Sequence[Tuple[float, GroupElement, GroupElement, GroupElement]],
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    rho: Optional[RhoCache] = None,
) -> BoundFit:
    """Fit |P_s(u h, v) - P_s(u, v)| <= C (|h|/sqrt s)^delta s^(-Q/2) exp(-|v^-1 u|^2/(A s)) (1 + sqrt s / rho(u))^-N.

    Each entry is (s, u, v, h) with |h| <= |v^-1 u| / 2.
    """
    if not 0 < delta <= 1:
        raise InvalidParameterError(f"smoothness exponent must lie in (0, 1], got {delta}")
    if len(quads) == 0:
        raise InvalidParameterError("heat smoothness check needs a nonempty sample")
    Q = quads[0][1].params.Q
    ru = _rho_many(V, rho, np.array([u.as_array() for _, u, _, _ in quads]))
    values = np.zeros(len(quads))
    for i, (s, u, v, h) in enumerate(quads):
        step = float(koranyi_norm(h.as_array()))
        d = distance(v, u)
        if step > 0.5 * d:
            raise SeparationError(f"entry {i}: |h| = {step:.4g} exceeds |v^-1 u| / 2 = {0.5 * d:.4g}")
        if step == 0.0:
            continue
        moved = group_product(u.as_array(), h.as_array())
        P = schrodinger_kernel_series(V, [s], np.vstack([moved, u.as_array()]), v, ts, hq)[0]
        bound = (
            (step / np.sqrt(s)) ** delta
            * s ** (-0.5 * Q)
            * np.exp(-d * d / (A * s))
            * (1.0 + np.sqrt(s) / ru[i]) ** (-N)
        )
        values[i] = abs(P[0] - P[1]) / bound
    return _fit(values, N=float(N), delta=float(delta), A_fit=float(A))
