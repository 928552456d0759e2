"""
Quadrature on Korányi balls and in log-time.

Ball nodes come from one of two generators: a deterministic polar rule
(Gauss-Jacobi in the Korányi radius, Gauss-Legendre in the polar angle,
equally spaced directions on S^1) or seeded rejection sampling from the
enclosing box. Either way the nodes of B(u0, r) are the images
u0 . delta_r(w) of unit-ball nodes w.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import special

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
    koranyi_distance,
    koranyi_norm,
    polar_angle_mass,
    sphere_area,
    unit_ball_volume,
)

METHODS = ("uniform-grid", "monte-carlo")


@dataclass(frozen=True)
class QuadratureSpec:
    """How ball integrals are discretized.

    For "uniform-grid" the resolution is the node count per polar axis
    (radius, angle, direction); for "monte-carlo" it is the sample count.
    """

    method: str = "uniform-grid"
    resolution: int = 24
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameterError(
                f"quadrature method must be one of {METHODS}, got {self.method!r}"
            )
        if int(self.resolution) != self.resolution or self.resolution < 2:
            raise InvalidParameterError(
                f"quadrature resolution must be an integer >= 2, got {self.resolution}"
            )
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidParameterError(f"seed must be a nonnegative integer, got {self.seed}")
        object.__setattr__(self, "resolution", int(self.resolution))
        object.__setattr__(self, "seed", int(self.seed))

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return QuadratureSpec(self.method, self.resolution * int(factor), self.seed)

    def to_dict(self) -> dict:
        return {"method": self.method, "resolution": self.resolution, "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "QuadratureSpec":
        return cls(
            data.get("method", "uniform-grid"),
            data.get("resolution", 24),
            data.get("seed", 0),
        )


class QuadratureNodes(NamedTuple):
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))


@dataclass(frozen=True, eq=False)
class PolarRule:
    """Unit-ball rule integrating h(w) |w|^(exponent - Q + 1) dw.

    With the default exponent Q - 1 this is plain Lebesgue measure; a
    smaller exponent absorbs a radial singularity |w|^(exponent - Q + 1)
    into the weights.
    """

    params: GroupParams
    points: np.ndarray
    weights: np.ndarray
    exponent: float

    def nodes(self, radius: float, center=None) -> QuadratureNodes:
        pts = dilation(self.points, radius)
        if center is not None:
            pts = group_product(as_points(center, self.params.n), pts)
        return QuadratureNodes(pts, self.weights * radius ** (self.exponent + 1.0))


def _directions(params: GroupParams, count: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    area = sphere_area(params)
    if params.n == 1:
        theta = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xD1,)))
        dirs = rng.standard_normal((count, 2 * params.n))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return dirs, np.full(count, area / count)


@lru_cache(maxsize=64)
def polar_rule(
    params: GroupParams,
    radial_nodes: int,
    angle_nodes: int,
    direction_nodes: int,
    exponent: Optional[float] = None,
    inner: float = 0.0,
    seed: int = 0,
) -> PolarRule:
    """Korányi polar product rule on the unit ball (or the shell inner < |w| < 1).

    Uses |z| = r sqrt(cos phi), t = r^2 sin phi, for which
    dvol = r^(Q-1) cos^(n-1)(phi) dr dphi dsigma.
    """
    n = params.n
    e = params.Q - 1.0 if exponent is None else float(exponent)
    if e <= -1.0:
        raise InvalidParameterError(f"radial exponent must exceed -1, got {e}")
    if min(radial_nodes, angle_nodes, direction_nodes) < 2:
        raise InvalidParameterError("polar rule needs at least 2 nodes per axis")
    if not 0.0 <= inner < 1.0:
        raise InvalidParameterError(f"inner radius fraction must be in [0, 1), got {inner}")

    if inner == 0.0:
        xi, wj = special.roots_jacobi(radial_nodes, 0.0, e)
        r = 0.5 * (1.0 + xi)
        wr = wj * 0.5 ** (e + 1.0)
    else:
        xi, wl = special.roots_legendre(radial_nodes)
        r = inner + (1.0 - inner) * 0.5 * (1.0 + xi)
        wr = wl * 0.5 * (1.0 - inner) * r**e

    xa, wa = special.roots_legendre(angle_nodes)
    phi = 0.5 * np.pi * xa
    wphi = 0.5 * np.pi * wa * np.cos(phi) ** (n - 1)
    wphi *= polar_angle_mass(params) / np.sum(wphi)

    dirs, wdir = _directions(params, direction_nodes, seed)

    R = r[:, None, None]
    PHI = phi[None, :, None]
    zscale = R * np.sqrt(np.cos(PHI))
    z = zscale[..., None] * dirs[None, None, :, :]
    t = np.broadcast_to(R**2 * np.sin(PHI), z.shape[:-1])
    pts = np.concatenate([z, t[..., None]], axis=-1).reshape(-1, params.dim)
    w = (wr[:, None, None] * wphi[None, :, None] * wdir[None, None, :]).ravel()
    pts.setflags(write=False)
    w.setflags(write=False)
    return PolarRule(params, pts, w, e)


CANDIDATES = 8
CHUNK = 1 << 16


def _first_inside(batch: np.ndarray, inner: float) -> Tuple[np.ndarray, np.ndarray]:
    r = koranyi_norm(batch)
    ok = (r < 1.0) & (r >= inner)
    first = np.argmax(ok, axis=-1)
    return batch[np.arange(len(batch)), first], ok.any(axis=-1)


def _unit_ball_samples(
    params: GroupParams, count: int, seed: int, key: Tuple[int, ...], inner: float = 0.0
) -> np.ndarray:
    """Uniform points of inner <= |w| < 1; node j depends only on (seed, key, j).

    Node j takes the first hit among its own block of CANDIDATES draws from the
    box, so a longer run extends a shorter one. Empty blocks redraw from the
    node's own stream.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
    out = np.empty((count, params.dim))
    for a in range(0, count, CHUNK):
        m = min(CHUNK, count - a)
        batch = rng.uniform(-1.0, 1.0, size=(m, CANDIDATES, params.dim))
        out[a : a + m], hit = _first_inside(batch, inner)
        for j in np.flatnonzero(~hit):
            node = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key + (a + int(j),)))
            while True:
                w, found = _first_inside(node.uniform(-1.0, 1.0, size=(1, CANDIDATES, params.dim)), inner)
                if found[0]:
                    out[a + j] = w[0]
                    break
    return out


def sample_ball(b: Ball, spec: QuadratureSpec, ball_index: int = 0, stream: int = 0) -> QuadratureNodes:
    """Nodes and weights for integrals over the Korányi ball b."""
    params = b.params
    N = spec.resolution
    if spec.method == "uniform-grid":
        return polar_rule(params, N, N, N, seed=spec.seed).nodes(b.radius, b.center)
    unit = _unit_ball_samples(params, N, spec.seed, (int(ball_index), int(stream)))
    pts = group_product(b.center.as_array(), dilation(unit, b.radius))
    return QuadratureNodes(pts, np.full(N, ball_volume(b) / N))


def sample_shell(
    center: GroupElement,
    inner_radius: float,
    outer_radius: float,
    spec: QuadratureSpec,
    ball_index: int = 0,
) -> QuadratureNodes:
    """Nodes for the annulus inner_radius <= |center^-1 u| < outer_radius."""
    if not 0.0 <= inner_radius < outer_radius:
        raise InvalidParameterError(
            f"shell radii must satisfy 0 <= inner < outer, got {inner_radius}, {outer_radius}"
        )
    params = center.params
    fraction = inner_radius / outer_radius
    N = spec.resolution
    if spec.method == "uniform-grid":
        return polar_rule(params, N, N, N, inner=fraction, seed=spec.seed).nodes(
            outer_radius, center
        )
    unit = _unit_ball_samples(params, N, spec.seed, (int(ball_index), 7), inner=fraction)
    pts = group_product(center.as_array(), dilation(unit, outer_radius))
    volume = unit_ball_volume(params) * (outer_radius**params.Q - inner_radius**params.Q)
    return QuadratureNodes(pts, np.full(N, volume / N))


def ball_integration_nodes(
    b: Ball, spec: QuadratureSpec, focus: Optional[Ball] = None, ball_index: int = 0
) -> QuadratureNodes:
    """Ball nodes, refined inside a focus ball when b is much larger than it.

    Nodes of b falling inside the focus are replaced by the focus' own nodes
    (restricted to b), so small features are resolved inside large balls.
    """
    base = sample_ball(b, spec, ball_index)
    if focus is None or b.radius <= 4.0 * focus.radius:
        return base
    if distance(b.center, focus.center) >= b.radius + focus.radius:
        return base
    outside = koranyi_distance(focus.center.as_array(), base.points) >= focus.radius
    inner = sample_ball(focus, spec, ball_index, stream=1)
    keep = koranyi_distance(b.center.as_array(), inner.points) < b.radius
    return QuadratureNodes(
        np.concatenate([base.points[outside], inner.points[keep]]),
        np.concatenate([base.weights[outside], inner.weights[keep]]),
    )


def ball_family(
    params: GroupParams,
    count: int,
    seed: int = 0,
    radius_min: float = 1e-2,
    radius_max: float = 1e2,
    center_box: float = 10.0,
    anchors: Optional[Sequence[GroupElement]] = None,
    anchor_every: int = 2,
    strata: int = 8,
) -> List[Ball]:
    """Stratified log-uniform ball sample.

    Ball i depends only on (seed, i), so the first half of a family of size
    2N is the family of size N. Every anchor_every-th ball is centred on an
    anchor (the identity by default), the rest in [-center_box, center_box]^d.
    """
    if count < 1:
        raise InvalidParameterError(f"ball family needs at least one ball, got {count}")
    if not 0.0 < radius_min < radius_max:
        raise InvalidParameterError(
            f"radius range must satisfy 0 < min < max, got [{radius_min}, {radius_max}]"
        )
    anchors = [GroupElement.identity(params.n)] if anchors is None else list(anchors)
    lo, hi = np.log(radius_min), np.log(radius_max)
    balls = []
    for i in range(int(count)):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        stratum = (i + i // 2) % strata
        radius = float(np.exp(lo + (stratum + rng.random()) / strata * (hi - lo)))
        coords = rng.uniform(-center_box, center_box, size=params.dim)
        if anchors and anchor_every and i % anchor_every == 0:
            center = anchors[(i // anchor_every) % len(anchors)]
        else:
            center = GroupElement.from_array(coords)
        balls.append(Ball(center, radius))
    return balls


def log_time_rule(
    s_lo: float, s_hi: float, nodes: int = 128, order: int = 16, max_panel_width: float = 1.0
) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule in log s on [s_lo, s_hi].

    Returns (s, w) with sum(w * g(s)) ~ int g(s) ds.
    """
    if not 0.0 < s_lo < s_hi:
        raise InvalidParameterError(f"time window must satisfy 0 < s_lo < s_hi, got [{s_lo}, {s_hi}]")
    a, b = np.log(s_lo), np.log(s_hi)
    panels = max(int(np.ceil(nodes / order)), int(np.ceil((b - a) / max_panel_width)), 1)
    x, w = special.roots_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    logs = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    s = np.exp(logs)
    return s, weights * s
