"""
Heat and Schrödinger semigroups.

exp(s Delta) is applied by quadrature against the group heat kernel.
exp(-s(-Delta + V)) is exact for constant V (it factors as
exp(-cs) exp(s Delta)); for other potentials it is propagated on a
periodic (x, y, t) grid of H^1 by Strang splitting,

    exp(-hV/2) exp(h X^2 / 2) exp(h Y^2) exp(h X^2 / 2) exp(-hV/2),

where X^2 and Y^2 are diagonal after a partial Fourier transform:
exp(-h (xi + 2 y lam)^2) over axes (x, t) and exp(-h (eta - 2 x lam)^2)
over axes (y, t).
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import fft, ndimage
from tqdm import tqdm

from ..exceptions import (
    DeltaApproximationError,
    GridResolutionError,
    InvalidParameterError,
    TruncationError,
)
from .functions import TestFunction
from .group import (
    Ball,
    GroupElement,
    as_points,
    group_inverse,
    group_product,
    horizontal_radius_sq,
)
from .heat import HeatQuadrature, group_heat_kernel
from .potential import Potential, critical_radius
from .quadrature import QuadratureSpec, ball_integration_nodes, sample_ball

BOUNDARY_BAND = 0.05
CHUNK = 2_000_000


@dataclass(frozen=True)
class TrotterSpec:
    """Grid and truncation settings of the semigroup routes.

    half_widths (L_xy, L_t) of None sizes the box from the sources and the
    final time, and then nodes_t grows (up to max_nodes_t) until
    dt <= dt_ratio dx^2. c_R scales the heat truncation radius
    c_R sqrt(4 s (ln(1/truncation_eps) + 4)).
    """

    steps: int = 32
    nodes_xy: int = 80
    nodes_t: int = 128
    dt_ratio: float = 2.5
    max_nodes_t: int = 2048
    half_widths: Optional[Tuple[float, float]] = None
    c_R: float = 1.0
    truncation_eps: float = 1e-6
    mass_tolerance: float = 1e-3
    delta_tolerance: float = 1e-2
    convolution_resolution: int = 32
    horizon: float = 16.0
    workers: int = -1

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidParameterError(f"Trotter steps must be an integer >= 1, got {self.steps}")
        if min(self.nodes_xy, self.nodes_t) < 8:
            raise InvalidParameterError("Trotter grid needs at least 8 nodes per axis")
        if not self.dt_ratio > 0 or self.max_nodes_t < self.nodes_t:
            raise InvalidParameterError("need dt_ratio > 0 and max_nodes_t >= nodes_t")
        if self.half_widths is not None and not min(self.half_widths) > 0:
            raise InvalidParameterError(f"grid half-widths must be positive, got {self.half_widths}")
        if not self.c_R > 0 or not 0 < self.truncation_eps < 1:
            raise InvalidParameterError("need c_R > 0 and 0 < truncation_eps < 1")
        if not self.mass_tolerance > 0 or not self.delta_tolerance > 0:
            raise InvalidParameterError("tolerances must be positive")
        if self.convolution_resolution < 2:
            raise InvalidParameterError("convolution resolution must be >= 2")

    def with_steps(self, steps: int) -> "TrotterSpec":
        return replace(self, steps=int(steps))

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "nodes_xy": self.nodes_xy,
            "nodes_t": self.nodes_t,
            "dt_ratio": self.dt_ratio,
            "max_nodes_t": self.max_nodes_t,
            "half_widths": None if self.half_widths is None else list(self.half_widths),
            "c_R": self.c_R,
            "truncation_eps": self.truncation_eps,
            "mass_tolerance": self.mass_tolerance,
            "delta_tolerance": self.delta_tolerance,
            "convolution_resolution": self.convolution_resolution,
            "horizon": self.horizon,
        }


def truncation_radius(s: float, ts: TrotterSpec) -> float:
    return ts.c_R * np.sqrt(4.0 * s * (np.log(1.0 / ts.truncation_eps) + 4.0))


def _chunks(count: int, per_item: int):
    step = max(1, CHUNK // max(per_item, 1))
    for a in range(0, count, step):
        yield slice(a, min(a + step, count))


def heat_semigroup_values(
    s: float,
    f: TestFunction,
    points,
    hq: HeatQuadrature = HeatQuadrature(),
    ts: TrotterSpec = TrotterSpec(),
) -> np.ndarray:
    """(exp(s Delta) f) at points (P, 2n+1).

    Kernel-centred rule f(u w^-1) H_s(w) over |w| < R_T unless the kernel is
    much wider than the support of f, in which case the rule is centred on
    the support.
    """
    if not s > 0:
        raise InvalidParameterError(f"heat time must be positive, got {s}")
    pts = as_points(points, f.params.n).reshape(-1, f.params.dim)
    spec = QuadratureSpec(resolution=ts.convolution_resolution)
    R_T = truncation_radius(s, ts)
    support = f.support_ball()
    out = np.empty(len(pts))

    if support is None or R_T <= 2.0 * support.radius:
        rule = sample_ball(Ball(GroupElement.identity(f.params.n), R_T), spec)
        kw = rule.weights * group_heat_kernel(s, rule.points, hq)
        mass = float(np.sum(kw))
        if abs(1.0 - mass) > ts.mass_tolerance:
            raise TruncationError(
                f"heat kernel mass inside radius {R_T:.4g} is {mass:.6f} at s={s:.4g}"
            )
        w_inv = group_inverse(rule.points)
        for sl in _chunks(len(pts), len(kw)):
            moved = group_product(pts[sl, None, :], w_inv[None, :, :])
            values = f.evaluate(moved.reshape(-1, moved.shape[-1])).reshape(moved.shape[:-1])
            out[sl] = values @ kw
        return out

    nodes = ball_integration_nodes(support, spec, f.focus_ball())
    fw = f.evaluate(nodes.points) * nodes.weights
    v_inv = group_inverse(nodes.points)
    for sl in _chunks(len(pts), len(fw)):
        out[sl] = group_heat_kernel(s, group_product(v_inv[None, :, :], pts[sl, None, :]), hq) @ fw
    return out


def heat_semigroup_apply(
    s: float,
    f: TestFunction,
    u: GroupElement,
    hq: HeatQuadrature = HeatQuadrature(),
    ts: TrotterSpec = TrotterSpec(),
) -> float:
    return float(heat_semigroup_values(s, f, u.as_array()[None, :], hq, ts)[0])


class HeatEvolved(TestFunction):
    """u -> (exp(s Delta) base)(u)."""

    def __init__(
        self,
        base: TestFunction,
        s: float,
        hq: HeatQuadrature = HeatQuadrature(),
        ts: TrotterSpec = TrotterSpec(),
    ):
        super().__init__(base.params)
        self.base = base
        self.s = float(s)
        self.hq = hq
        self.ts = ts

    def evaluate(self, points):
        return heat_semigroup_values(self.s, self.base, points, self.hq, self.ts)

    def focus_ball(self):
        b = self.base.focus_ball()
        return None if b is None else Ball(b.center, b.radius + truncation_radius(self.s, self.ts))

    @property
    def label(self):
        return f"heat(s={self.s:.4g}) {self.base.label}"


class TrotterGrid:
    """Periodic grid on [-L_xy, L_xy)^2 x [-L_t, L_t) carrying exp(-sL) on H^1."""

    def __init__(self, V: Potential, half_widths: Tuple[float, float], ts: TrotterSpec = TrotterSpec()):
        self.V = V
        self.ts = ts
        self.L_xy, self.L_t = (float(w) for w in half_widths)
        N, M = ts.nodes_xy, ts.nodes_t
        self.dx = 2.0 * self.L_xy / N
        self.dt = 2.0 * self.L_t / M
        self.x = -self.L_xy + self.dx * np.arange(N)
        self.t = -self.L_t + self.dt * np.arange(M)
        self.xi = 2.0 * np.pi * fft.fftfreq(N, d=self.dx)
        self.lam = 2.0 * np.pi * fft.fftfreq(M, d=self.dt)
        X, Y, T = np.meshgrid(self.x, self.x, self.t, indexing="ij")
        self.points = np.stack([X, Y, T], axis=-1)
        self.potential = V(self.points)
        self._multipliers = {}

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dx * self.dt

    @classmethod
    def for_sources(
        cls,
        V: Potential,
        s_max: float,
        sources,
        ts: TrotterSpec = TrotterSpec(),
        extent: float = 0.0,
        points=None,
    ) -> "TrotterGrid":
        """Box holding the mass of balls B(source, extent) up to time s_max.

        The heat kernel moves |z| by at most R_T(s_max) and t by R_T^2 / pi;
        the group law adds 2 |z_c| (extent + R_T) + extent R_T to t. Read-out
        points only have to lie inside the box.
        """
        if ts.half_widths is not None:
            return cls(V, ts.half_widths, ts)
        centers = as_points(sources, 1).reshape(-1, 3)
        spread = truncation_radius(s_max, ts)
        if V.constant_value is None:
            # exp(-sV) confines the mass to a few critical radii
            rho0 = critical_radius(V, GroupElement.identity(1))
            spread = min(spread, max(7.0 * rho0, truncation_radius(min(s_max, rho0**2), ts)))
        z_c = np.sqrt(horizontal_radius_sq(centers))
        L_xy = float(z_c.max()) + extent + spread
        L_t = float(np.max(np.abs(centers[:, 2]) + 2.0 * z_c * (extent + spread)))
        L_t += extent**2 + extent * spread + spread**2 / np.pi
        if points is not None:
            pts = as_points(points, 1).reshape(-1, 3)
            L_xy = max(L_xy, 1.1 * float(np.sqrt(horizontal_radius_sq(pts).max())))
            L_t = max(L_t, 1.1 * float(np.abs(pts[:, 2]).max()))
        dx = 2.0 * L_xy / ts.nodes_xy
        wanted = fft.next_fast_len(int(np.ceil(2.0 * L_t / (ts.dt_ratio * dx * dx))))
        nodes_t = min(max(ts.nodes_t, wanted), ts.max_nodes_t)
        return cls(V, (L_xy, L_t), replace(ts, nodes_t=nodes_t))

    def sample(self, f: TestFunction) -> np.ndarray:
        if f.params.n != 1:
            raise InvalidParameterError("grid propagation is implemented on H^1 only")
        return f.evaluate(self.points.reshape(-1, 3)).reshape(self.points.shape[:-1])

    def mass(self, grid: np.ndarray) -> float:
        return float(np.sum(grid) * self.cell_volume)

    def check_sampling(self, f: TestFunction, grid: np.ndarray):
        """Compare the grid mass of f with its ball quadrature."""
        support = f.support_ball()
        if support is None:
            return
        nodes = ball_integration_nodes(
            support, QuadratureSpec(resolution=self.ts.convolution_resolution), f.focus_ball()
        )
        exact = nodes.integrate(f.evaluate(nodes.points))
        scale = max(abs(exact), float(np.sum(np.abs(grid)) * self.cell_volume), 1e-300)
        if abs(self.mass(grid) - exact) > self.ts.mass_tolerance * scale:
            raise GridResolutionError(
                f"grid mass {self.mass(grid):.6g} differs from quadrature mass {exact:.6g}; "
                f"refine the grid (dx={self.dx:.3g}, dt={self.dt:.3g})"
            )

    def boundary_fraction(self, grid: np.ndarray) -> float:
        total = float(np.sum(np.abs(grid)))
        if total == 0.0:
            return 0.0
        band = np.zeros(grid.shape, dtype=bool)
        for axis, size in enumerate(grid.shape):
            k = max(1, int(np.ceil(BOUNDARY_BAND * size)))
            idx = [slice(None)] * 3
            idx[axis] = np.r_[0:k, size - k : size]
            band[tuple(idx)] = True
        return float(np.sum(np.abs(grid[band]))) / total

    def check_boundary(self, grid: np.ndarray, s: float):
        fraction = self.boundary_fraction(grid)
        if fraction > self.ts.mass_tolerance:
            raise GridResolutionError(
                f"{fraction:.2e} of the mass reached the box boundary at s={s:.4g} "
                f"(L_xy={self.L_xy:.3g}, L_t={self.L_t:.3g})"
            )

    def _factors(self, h: float):
        if h not in self._multipliers:
            xi = self.xi[:, None, None]
            eta = self.xi[None, :, None]
            lam = self.lam[None, None, :]
            x = self.x[:, None, None]
            y = self.x[None, :, None]
            half_x = np.exp(-0.5 * h * (xi + 2.0 * y * lam) ** 2)
            full_y = np.exp(-h * (eta - 2.0 * x * lam) ** 2)
            damp = np.exp(-0.5 * h * self.potential)
            self._multipliers = {h: (half_x, full_y, damp)}
        return self._multipliers[h]

    def step(self, grid: np.ndarray, h: float) -> np.ndarray:
        half_x, full_y, damp = self._factors(h)
        w = self.ts.workers
        g = grid * damp
        g = fft.ifftn(fft.fftn(g, axes=(0, 2), workers=w) * half_x, axes=(0, 2), workers=w)
        g = fft.ifftn(fft.fftn(g, axes=(1, 2), workers=w) * full_y, axes=(1, 2), workers=w)
        g = fft.ifftn(fft.fftn(g, axes=(0, 2), workers=w) * half_x, axes=(0, 2), workers=w)
        return g.real * damp

    def read(self, grid: np.ndarray, points) -> np.ndarray:
        """Periodic cubic-spline read-out; zero outside the box."""
        pts = as_points(points, 1).reshape(-1, 3)
        coords = np.stack(
            [
                (pts[:, 0] - self.x[0]) / self.dx,
                (pts[:, 1] - self.x[0]) / self.dx,
                (pts[:, 2] - self.t[0]) / self.dt,
            ]
        )
        values = ndimage.map_coordinates(grid, coords, order=3, mode="grid-wrap")
        inside = (
            (np.abs(pts[:, 0]) <= self.L_xy)
            & (np.abs(pts[:, 1]) <= self.L_xy)
            & (np.abs(pts[:, 2]) <= self.L_t)
        )
        return np.where(inside, values, 0.0)

    def evolve_through(
        self, grid: np.ndarray, times: Sequence[float], points, progress: bool = False
    ) -> np.ndarray:
        """Read-outs at points after propagating to each of the increasing times.

        Each interval (s_prev, s_k] uses ceil(steps (s_k - s_prev) / s_k)
        Strang steps, so a single time gets exactly `steps` steps.
        Returns an array (len(times), P).
        """
        times = np.asarray(times, dtype=np.float64)
        if np.any(times <= 0) or np.any(np.diff(times) <= 0):
            raise InvalidParameterError("propagation times must be positive and increasing")
        out = np.empty((len(times), len(as_points(points, 1).reshape(-1, 3))))
        current = 0.0
        iterator = tqdm(enumerate(times), total=len(times), desc="  Trotter", unit=" t") if progress else enumerate(times)
        for k, s in iterator:
            ds = s - current
            m = max(1, int(np.ceil(self.ts.steps * ds / s)))
            h = ds / m
            for _ in range(m):
                grid = self.step(grid, h)
            current = s
            self.check_boundary(grid, s)
            out[k] = self.read(grid, points)
        return out

    def source_time(self, cells: float) -> float:
        """Start time whose heat kernel spans `cells` grid steps in x and t."""
        h = max(self.dx, np.sqrt(self.dt))
        return 0.25 * (cells * h) ** 2

    def point_source(self, v, s0: float, hq: HeatQuadrature = HeatQuadrature()) -> np.ndarray:
        """exp(-s0 V(v)) H_s0(v^-1 .) sampled on the grid, grid-normalized to that mass."""
        c = as_points(v, 1)
        g = group_heat_kernel(s0, group_product(group_inverse(c), self.points), hq)
        total = float(np.sum(g) * self.cell_volume)
        if not total > 0.0:
            raise GridResolutionError(f"point source at {c.tolist()} is not resolved by the grid")
        return np.exp(-s0 * float(self.V(c))) * g / total


def _require_h1(n: int):
    if n != 1:
        raise InvalidParameterError(
            "grid propagation is implemented on H^1 only; use a constant or zero potential for n >= 2"
        )


def schrodinger_semigroup_values(
    V: Potential,
    s: float,
    f: TestFunction,
    points,
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    method: str = "auto",
) -> np.ndarray:
    """exp(-s(-Delta + V)) f at points.

    method "auto" factors zero and constant potentials exactly and uses the
    grid otherwise; "grid" always propagates on the grid.
    """
    if not s > 0:
        raise InvalidParameterError(f"time must be positive, got {s}")
    if method not in ("auto", "grid"):
        raise InvalidParameterError(f"unknown semigroup method {method!r}")
    c = V.constant_value
    if method == "auto" and c is not None:
        return np.exp(-c * s) * heat_semigroup_values(s, f, points, hq, ts)
    _require_h1(f.params.n)
    support = f.support_ball()
    if support is None:
        raise InvalidParameterError("grid propagation needs a compactly supported function")
    pts = as_points(points, 1).reshape(-1, 3)
    mass = f.mass_ball(ts.truncation_eps)
    grid = TrotterGrid.for_sources(V, s, mass.center.as_array(), ts, extent=mass.radius, points=pts)
    g0 = grid.sample(f)
    grid.check_sampling(f, g0)
    return grid.evolve_through(g0, [s], pts)[0]


def schrodinger_semigroup_apply(
    V: Potential,
    s: float,
    f: TestFunction,
    u: GroupElement,
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    method: str = "auto",
) -> float:
    return float(schrodinger_semigroup_values(V, s, f, u.as_array()[None, :], ts, hq, method)[0])


def schrodinger_kernel_series(
    V: Potential,
    times,
    u,
    v: GroupElement,
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    method: str = "auto",
    progress: bool = False,
) -> np.ndarray:
    """P_s(u, v) for each s in times and each row of u; shape (len(times), P).

    Grid values start from exp(-s0 V(v)) H_s0(v^-1 .) with s0 = h^2 and 4h^2
    (h the larger of dx and sqrt(dt)) and are combined by one Richardson
    step; times below s0 use the start itself.
    """
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    us = as_points(u, v.n).reshape(-1, v.params.dim)
    c = V.constant_value
    if method == "auto" and c is not None:
        w = group_product(group_inverse(v.as_array())[None, None, :], us[None, :, :])
        return np.exp(-c * times)[:, None] * group_heat_kernel(times[:, None], np.broadcast_to(w, (len(times),) + us.shape), hq)
    _require_h1(v.n)
    grid = TrotterGrid.for_sources(V, float(times.max()), v.as_array(), ts, points=us)
    series = []
    for cells in (4.0, 2.0):
        s0 = grid.source_time(cells)
        values = np.empty((len(times), len(us)))
        early = times <= s0
        if np.any(early):
            w = group_product(group_inverse(v.as_array())[None, :], us)
            values[early] = np.exp(-times[early] * float(V(v.as_array())))[:, None] * group_heat_kernel(
                times[early][:, None], np.broadcast_to(w, (int(early.sum()),) + us.shape), hq
            )
        if not np.all(early):
            values[~early] = grid.evolve_through(grid.point_source(v, s0, hq), times[~early] - s0, us, progress)
        series.append(values)
    coarse, fine = series
    combined = (4.0 * fine - coarse) / 3.0
    scale = float(np.max(np.abs(combined)))
    gap = float(np.max(np.abs(fine - coarse)))
    if scale > 0.0 and gap > ts.delta_tolerance * scale:
        raise DeltaApproximationError(
            f"point-source start times disagree by {gap / scale:.2%} (> {ts.delta_tolerance:.2%})"
        )
    return combined


def schrodinger_kernel(
    V: Potential,
    s: float,
    u: GroupElement,
    v: GroupElement,
    ts: TrotterSpec = TrotterSpec(),
    hq: HeatQuadrature = HeatQuadrature(),
    method: str = "auto",
) -> float:
    if not s > 0:
        raise InvalidParameterError(f"time must be positive, got {s}")
    return float(schrodinger_kernel_series(V, [s], u, v, ts, hq, method)[0, 0])
