"""
Heat kernel of the sub-Laplacian from its oscillatory lambda-integral.

In scaled variables r2 = |z|^2 / s and tau = t / s the kernel is

    H_s(z, t) = s^(-Q/2) I(r2, tau),
    I(r2, tau) = (2 pi)^-1 (4 pi)^-n 2 int_0^inf (mu / sinh mu)^n
                 exp(-r2 mu coth(mu) / 4) cos(mu tau) dmu.

I is evaluated with a composite Gauss-Legendre rule compiled by numba
(batched over points with prange) or, on request, by QUADPACK's QAWO
through scipy.integrate.quad.
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import jit, prange
from scipy import integrate, special

from ..exceptions import InvalidParameterError, QuadratureError
from .group import GroupElement, GroupParams, as_points, horizontal_radius_sq, koranyi_norm

NEGATIVE_CLAMP = 1e-12


@dataclass(frozen=True)
class HeatQuadrature:
    """Settings of the lambda-quadrature.

    The integral is cut where the log of the integrand's envelope has fallen
    by lambda_cutoff; lambda_nodes is the Gauss-Legendre order per panel.
    """

    lambda_cutoff: float = 44.0
    lambda_nodes: int = 16
    adaptive: bool = False
    tau_cutoff: float = 24.0
    node_budget: int = 4096

    def __post_init__(self):
        if not self.lambda_cutoff > 0:
            raise InvalidParameterError(f"lambda_cutoff must be positive, got {self.lambda_cutoff}")
        if int(self.lambda_nodes) != self.lambda_nodes or self.lambda_nodes < 2:
            raise InvalidParameterError(f"lambda_nodes must be an integer >= 2, got {self.lambda_nodes}")
        if not self.tau_cutoff > 0:
            raise InvalidParameterError(f"tau_cutoff must be positive, got {self.tau_cutoff}")
        if self.node_budget < 21:
            raise InvalidParameterError(f"node budget must be at least 21, got {self.node_budget}")

    def to_dict(self) -> dict:
        return {
            "lambda_cutoff": self.lambda_cutoff,
            "lambda_nodes": self.lambda_nodes,
            "adaptive": self.adaptive,
            "tau_cutoff": self.tau_cutoff,
            "node_budget": self.node_budget,
        }


@jit(nopython=True, cache=True)
def _log_sinhc(mu):
    """log(sinh(mu) / mu)."""
    if mu < 1e-4:
        return mu * mu / 6.0
    if mu < 20.0:
        return np.log(np.sinh(mu) / mu)
    return mu - np.log(2.0 * mu)


@jit(nopython=True, cache=True)
def _mu_coth(mu):
    if mu < 1e-8:
        return 1.0
    return mu / np.tanh(mu)


@jit(nopython=True, cache=True)
def _envelope_decay(mu, r2, n):
    return n * _log_sinhc(mu) + 0.25 * r2 * (_mu_coth(mu) - 1.0)


@jit(nopython=True, cache=True)
def _mu_cutoff(r2, n, level):
    """Smallest mu at which the envelope has decayed by exp(-level) from mu = 0."""
    lo = 0.0
    hi = 1.0
    while _envelope_decay(hi, r2, n) < level:
        lo = hi
        hi *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _envelope_decay(mid, r2, n) < level:
            lo = mid
        else:
            hi = mid
    return hi


@jit(nopython=True, cache=True)
def _integrand(mu, r2, tau, n):
    return np.exp(-n * _log_sinhc(mu) - 0.25 * r2 * _mu_coth(mu)) * np.cos(mu * tau)


@jit(nopython=True, cache=True)
def _scaled_heat(r2, tau, n, level, x, w, tau_cutoff, const):
    if abs(tau) > tau_cutoff or 0.25 * r2 > 740.0:
        return 0.0
    mu_c = _mu_cutoff(r2, n, level)
    width = 1.0
    if tau != 0.0:
        width = min(width, 2.0 * np.pi / abs(tau))
    if r2 > 0.0:
        width = min(width, 7.3 / np.sqrt(r2))
    panels = int(np.ceil(mu_c / width))
    h = mu_c / panels
    total = 0.0
    for p in range(panels):
        a = p * h
        for k in range(x.shape[0]):
            mu = a + 0.5 * h * (x[k] + 1.0)
            total += w[k] * _integrand(mu, r2, tau, n)
    return 2.0 * const * 0.5 * h * total


@jit(nopython=True, parallel=True, cache=True)
def _scaled_heat_batch(r2, tau, n, level, x, w, tau_cutoff, const):
    out = np.empty(r2.shape[0])
    for i in prange(r2.shape[0]):
        out[i] = _scaled_heat(r2[i], tau[i], n, level, x, w, tau_cutoff, const)
    return out


def _normalizer(n: int) -> float:
    return 1.0 / (2.0 * np.pi * (4.0 * np.pi) ** n)


def _adaptive_scaled_heat(r2: float, tau: float, n: int, hq: HeatQuadrature) -> float:
    if abs(tau) > hq.tau_cutoff or 0.25 * r2 > 740.0:
        return 0.0
    mu_c = _mu_cutoff(r2, n, hq.lambda_cutoff)
    envelope = lambda mu: np.exp(-n * _log_sinhc(mu) - 0.25 * r2 * _mu_coth(mu))
    limit = max(hq.node_budget // 21, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if tau == 0.0:
                value, _ = integrate.quad(envelope, 0.0, mu_c, limit=limit, epsabs=1e-16, epsrel=1e-12)
            else:
                value, _ = integrate.quad(
                    envelope, 0.0, mu_c, weight="cos", wvar=tau, limit=limit, epsabs=1e-16, epsrel=1e-12
                )
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(
                f"adaptive lambda-quadrature exceeded its budget at r2={r2:.4g}, tau={tau:.4g}: {exc}"
            ) from exc
    return 2.0 * _normalizer(n) * value


def scaled_heat_values(r2, tau, n: int, hq: HeatQuadrature = HeatQuadrature()) -> np.ndarray:
    """I(r2, tau) on flat arrays, clamped and checked."""
    r2 = np.ascontiguousarray(r2, dtype=np.float64).ravel()
    tau = np.ascontiguousarray(tau, dtype=np.float64).ravel()
    if hq.adaptive:
        values = np.array([_adaptive_scaled_heat(a, b, n, hq) for a, b in zip(r2, tau)])
    else:
        x, w = special.roots_legendre(hq.lambda_nodes)
        values = _scaled_heat_batch(
            r2, tau, n, hq.lambda_cutoff, x, w, hq.tau_cutoff, _normalizer(n)
        )
    return _clamp(values, scaled_heat_peak(n, hq))


def _clamp(values: np.ndarray, peak: float) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise QuadratureError("heat-kernel quadrature produced non-finite values")
    floor = -NEGATIVE_CLAMP * peak
    if np.any(values < floor):
        worst = float(values.min())
        raise QuadratureError(
            f"heat-kernel quadrature returned {worst:.3e}, below the clamp floor {floor:.3e}"
        )
    return np.maximum(values, 0.0)


@lru_cache(maxsize=32)
def scaled_heat_peak(n: int, hq: HeatQuadrature = HeatQuadrature()) -> float:
    """I(0, 0) = s^(Q/2) H_s(0)."""
    x, w = special.roots_legendre(hq.lambda_nodes)
    return float(_scaled_heat(0.0, 0.0, n, hq.lambda_cutoff, x, w, hq.tau_cutoff, _normalizer(n)))


def _check_time(s):
    s = np.asarray(s, dtype=np.float64)
    if not np.all(s > 0):
        raise InvalidParameterError("heat time s must be positive")
    return s


def heat_kernel_values(s, points, hq: HeatQuadrature = HeatQuadrature()) -> np.ndarray:
    """H_s at points (..., 2n+1); s broadcasts against the batch shape."""
    pts = as_points(points)
    s = _check_time(s)
    n = (pts.shape[-1] - 1) // 2
    shape = np.broadcast_shapes(pts.shape[:-1], s.shape)
    s = np.broadcast_to(s, shape)
    r2 = np.broadcast_to(horizontal_radius_sq(pts), shape) / s
    tau = np.broadcast_to(pts[..., -1], shape) / s
    values = scaled_heat_values(r2, tau, n, hq).reshape(shape)
    return s ** (-(n + 1.0)) * values


def heat_kernel(s: float, u: GroupElement, hq: HeatQuadrature = HeatQuadrature()) -> float:
    return float(heat_kernel_values(s, u.as_array(), hq))


def heat_kernel_axis(s: float, t) -> np.ndarray:
    """Closed form H_s(0, t) = sech^2(pi t / 2s) / (16 s^2) on H^1."""
    s = float(_check_time(s))
    return 1.0 / (16.0 * s**2 * np.cosh(0.5 * np.pi * np.asarray(t, dtype=np.float64) / s) ** 2)


def group_heat_kernel(s, points, hq: HeatQuadrature = HeatQuadrature()) -> np.ndarray:
    """Convolution kernel of exp(s Delta) for this group law: H_s(z, t/4) / 4."""
    pts = np.array(as_points(points), dtype=np.float64)
    pts[..., -1] *= 0.25
    return 0.25 * heat_kernel_values(s, pts, hq)


def group_heat_peak(params: GroupParams, hq: HeatQuadrature = HeatQuadrature()) -> float:
    """H^G_1(0); 1/64 on H^1."""
    return 0.25 * scaled_heat_peak(params.n, hq)


def heat_kernel_mass(
    params: GroupParams = GroupParams(),
    hq: HeatQuadrature = HeatQuadrature(),
    r2_max: float = 160.0,
    t_max: float = 16.0,
    order: int = 16,
) -> float:
    """Integral of H_1 over H^n by Gauss-Legendre in (|z|^2, t)."""
    n = params.n
    x, w = special.roots_legendre(order)

    def panels(a, b, width):
        count = int(np.ceil((b - a) / width))
        edges = np.linspace(a, b, count + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()

    r2, wr = panels(0.0, r2_max, 4.0)
    t, wt = panels(0.0, t_max, 1.0)
    R2, T = np.meshgrid(r2, t, indexing="ij")
    values = scaled_heat_values(R2, T, n, hq).reshape(R2.shape)
    area = np.pi**n / special.gamma(n) * r2 ** (n - 1)
    return float(2.0 * np.einsum("i,ij,j->", wr * area, values, wt))


@dataclass
class BoundFit:
    """Fitted constant of a sampled kernel inequality.

    half_C is the constant fitted on the first half of the sample, so
    C_fit / half_C measures stability under doubling.
    """

    C_fit: float
    N: float = 0.0
    A_fit: Optional[float] = None
    delta: float = 1.0
    samples: int = 0
    half_C: Optional[float] = None
    witness: Optional[int] = None

    @property
    def stability(self) -> float:
        if self.half_C is None or self.half_C == 0.0:
            return 1.0
        return self.C_fit / self.half_C

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.C_fit))

    def to_dict(self) -> dict:
        return {
            "C_fit": self.C_fit,
            "N": self.N,
            "A_fit": self.A_fit,
            "delta": self.delta,
            "samples": self.samples,
            "half_C": self.half_C,
            "stability": self.stability,
        }


def _sample_arrays(sample: Sequence[Tuple[float, object]]):
    if len(sample) == 0:
        raise InvalidParameterError("Gaussian bound fit needs a nonempty sample")
    s = np.array([float(a) for a, _ in sample])
    pts = np.array([as_points(u) for _, u in sample])
    return s, pts


def gaussian_bound_profile(
    hq: HeatQuadrature, sample, a_grid: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(a_grid, C(A) over the full sample, C(A) over its first half)."""
    s, pts = _sample_arrays(sample)
    Q = pts.shape[-1] + 1
    a_grid = np.geomspace(0.5, 64.0, 48) if a_grid is None else np.asarray(a_grid, dtype=np.float64)
    scaled = s ** (Q / 2.0) * heat_kernel_values(s, pts, hq)
    d2 = koranyi_norm(pts) ** 2 / s
    with np.errstate(over="ignore", invalid="ignore"):
        ratios = scaled[None, :] * np.exp(d2[None, :] / a_grid[:, None])
    ratios = np.where(scaled[None, :] > 0.0, ratios, 0.0)
    half = max(len(s) // 2, 1)
    return a_grid, ratios.max(axis=1), ratios[:, :half].max(axis=1)


def fit_gaussian_bound(
    hq: HeatQuadrature,
    sample: Sequence[Tuple[float, object]],
    a_grid: Optional[np.ndarray] = None,
    margin: float = 0.05,
) -> BoundFit:
    """Fit H_s(u) <= C s^(-Q/2) exp(-|u|^2 / (A s)).

    A_fit is the smallest grid A whose constant is within (1 + margin) of
    the best one; C_fit carries the same margin on top.
    """
    a_grid, C, C_half = gaussian_bound_profile(hq, sample, a_grid)
    best = np.min(C)
    k = int(np.flatnonzero(C <= (1.0 + margin) * best)[0])
    return BoundFit(
        C_fit=float((1.0 + margin) * C[k]),
        A_fit=float(a_grid[k]),
        samples=len(sample),
        half_C=float((1.0 + margin) * C_half[k]),
    )


def gaussian_bound_violations(fit: BoundFit, hq: HeatQuadrature, sample) -> int:
    """Number of sample points where H_s(u) exceeds the fitted bound."""
    s, pts = _sample_arrays(sample)
    Q = pts.shape[-1] + 1
    values = heat_kernel_values(s, pts, hq)
    bound = fit.C_fit * s ** (-Q / 2.0) * np.exp(-(koranyi_norm(pts) ** 2) / (fit.A_fit * s))
    return int(np.count_nonzero(values > bound))


def heat_sample(
    params: GroupParams,
    count: int,
    seed: int = 0,
    s_range: Tuple[float, float] = (0.1, 10.0),
    scaled_radius: float = 4.0,
) -> List[Tuple[float, np.ndarray]]:
    """Random (s, u) with s log-uniform and |u| / sqrt(s) uniform in the ball of scaled_radius."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x4EA7,)))
    out = []
    while len(out) < count:
        w = rng.uniform(-1.0, 1.0, size=params.dim)
        if koranyi_norm(w) >= 1.0:
            continue
        s = float(np.exp(rng.uniform(np.log(s_range[0]), np.log(s_range[1]))))
        r = scaled_radius * np.sqrt(s)
        u = w * np.concatenate([np.full(2 * params.n, r), [r * r]])
        out.append((s, u))
    return out
