"""
Norm estimators for the Lebesgue, Morrey, BMO and Hölder scales.

The ball-type norms are suprema over a sampled ball family; each report
carries the witness ball and the ratio of the sup over the first half of
the family to the full sup, the membership diagnostic. All ball integrals
of one ball share a single node set, so per-ball inequalities between the
estimators (weak <= strong, theta monotonicity) hold exactly.
"""

from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from ..exceptions import InvalidParameterError
from .functions import TestFunction
from .group import Ball, ball_volume
from .potential import Potential, RhoCache
from .quadrature import QuadratureNodes, QuadratureSpec, ball_integration_nodes, sample_ball, sample_shell

SPACE_KINDS = ("lebesgue", "weak-lebesgue", "morrey", "weak-morrey", "bmo", "hoelder")
LEVEL_GRID = np.geomspace(1e-8, 1e8, 321)
STABLE_DRIFT = 0.1


@dataclass(frozen=True)
class SpaceSpec:
    """A point of the scale: kind plus (p, kappa, theta, beta).

    beta = 0 for "hoelder" is BMO; beta > 1 is accepted only with beyond_unit=True.
    """

    kind: str = "morrey"
    p: float = 2.0
    kappa: float = 0.0
    theta: float = 0.0
    beta: float = 0.0
    beyond_unit: bool = False

    def __post_init__(self):
        kind = self.kind.lower().replace("_", "-")
        if kind not in SPACE_KINDS:
            raise InvalidParameterError(f"space kind must be one of {SPACE_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not self.p >= 1:
            raise InvalidParameterError(f"p must be >= 1, got {self.p}")
        if not 0 <= self.kappa < 1:
            raise InvalidParameterError(f"kappa must lie in [0, 1), got {self.kappa}")
        if not self.theta >= 0:
            raise InvalidParameterError(f"theta must be nonnegative, got {self.theta}")
        if kind == "hoelder":
            _check_beta(self.beta, self.beyond_unit)

    def with_theta(self, theta: float) -> "SpaceSpec":
        return SpaceSpec(self.kind, self.p, self.kappa, theta, self.beta, self.beyond_unit)

    @property
    def label(self) -> str:
        if self.kind in ("lebesgue", "weak-lebesgue"):
            return f"{self.kind}(p={self.p:g})"
        if self.kind == "bmo":
            return f"bmo(theta={self.theta:g})"
        if self.kind == "hoelder":
            return f"hoelder(beta={self.beta:g},theta={self.theta:g})"
        return f"{self.kind}(p={self.p:g},kappa={self.kappa:g},theta={self.theta:g})"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "p": self.p,
            "kappa": self.kappa,
            "theta": self.theta,
            "beta": self.beta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpaceSpec":
        return cls(
            data.get("kind", "morrey"),
            float(data.get("p", 2.0)),
            float(data.get("kappa", 0.0)),
            float(data.get("theta", 0.0)),
            float(data.get("beta", 0.0)),
        )


@dataclass
class NormReport:
    value: float
    witness: Optional[Ball]
    balls_tested: int
    convergence: float
    per_ball: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    growth: Optional[float] = None

    @property
    def stabilized(self) -> bool:
        """Sup settled under halving the family and not growing with the radii."""
        if not np.isfinite(self.value):
            return False
        if abs(self.convergence - 1.0) > STABLE_DRIFT:
            return False
        return self.growth is None or self.growth <= 1.0 + STABLE_DRIFT

    def to_row(self) -> dict:
        w = self.witness
        return {
            "value": self.value,
            "witness_center": "" if w is None else " ".join(f"{c:.6g}" for c in w.center.as_array()),
            "witness_radius": np.nan if w is None else w.radius,
            "balls_tested": self.balls_tested,
            "convergence": self.convergence,
            "growth": np.nan if self.growth is None else self.growth,
        }


class BallSample(NamedTuple):
    nodes: QuadratureNodes
    values: np.ndarray


def _check_beta(beta: float, beyond_unit: bool = False):
    if not 0 <= beta <= 1 and not (beyond_unit and beta > 1):
        raise InvalidParameterError(f"beta must lie in [0, 1], got {beta}")


def theta_weight(r, rho, theta: float) -> np.ndarray:
    """(1 + r/rho)^-theta; 1 for rho = inf."""
    r = np.asarray(r, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.isinf(rho), 0.0, r / rho)
    return (1.0 + ratio) ** (-float(theta))


def check_2rx(r, rho, theta) -> np.ndarray:
    """1 <= (1 + 2r/rho)^theta <= 2^theta (1 + r/rho)^theta, elementwise."""
    r = np.asarray(r, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    middle = (1.0 + 2.0 * r / rho) ** theta
    upper = 2.0**theta * (1.0 + r / rho) ** theta
    return (middle >= 1.0) & (middle <= upper * (1.0 + 1e-12))


def domain_nodes(
    f: TestFunction, spec: QuadratureSpec, domain: Optional[Ball] = None, reach: float = 64.0
) -> QuadratureNodes:
    """Nodes covering the domain, the support of f, or its focus ball plus
    dyadic shells out to reach times the focus radius."""
    focus = f.focus_ball()
    ball = domain or f.support_ball()
    if ball is not None:
        return ball_integration_nodes(ball, spec, focus)
    if focus is None:
        raise InvalidParameterError(f"{f.label} is not localized; pass an integration domain")
    parts = [sample_ball(focus, spec)]
    radius = focus.radius
    for k in range(int(np.ceil(np.log2(reach)))):
        parts.append(sample_shell(focus.center, radius * 2.0**k, radius * 2.0 ** (k + 1), spec, ball_index=k))
    return QuadratureNodes(
        np.concatenate([q.points for q in parts]), np.concatenate([q.weights for q in parts])
    )


def lebesgue_norm(
    f: TestFunction, p: float, spec: QuadratureSpec = QuadratureSpec(), domain: Optional[Ball] = None
) -> float:
    """(int |f|^p)^(1/p) over the region of domain_nodes."""
    if not p >= 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")
    nodes = domain_nodes(f, spec, domain)
    return nodes.integrate(np.abs(f.evaluate(nodes.points)) ** p) ** (1.0 / p)


def _sampled_weak(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    """max_k v_k W_k^(1/p) over |f| values sorted descending, W_k the cumulative weight."""
    a = np.abs(values)
    order = np.argsort(-a, kind="stable")
    v = a[order]
    W = np.cumsum(weights[order])
    if len(v) == 0 or v[0] == 0.0:
        return 0.0
    # ties share the measure of the whole tie group
    last = np.r_[v[1:] != v[:-1], True]
    return float(np.max(v[last] * W[last] ** (1.0 / p)))


def weak_profile(f: TestFunction, p: float, levels) -> Optional[np.ndarray]:
    """lambda |{|f| > lambda}|^(1/p) from closed-form level sets, or None."""
    levels = np.asarray(levels, dtype=np.float64)
    out = np.empty(len(levels))
    for i, lam in enumerate(levels):
        vol = f.level_set_volume(float(lam))
        if vol is None:
            return None
        out[i] = lam * vol ** (1.0 / p)
    return out


def weak_lebesgue_norm(
    f: TestFunction, p: float, spec: QuadratureSpec = QuadratureSpec(), domain: Optional[Ball] = None
) -> float:
    """sup_lambda lambda |{|f| > lambda}|^(1/p).

    Exact level-set volumes are used when f has them, with the levels
    approached from below at each jump; otherwise the sup runs over the
    sampled values of |f| on the domain.
    """
    if not p >= 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")
    if domain is None and f.level_set_volume(1.0) is not None:
        top = f.sup_value()
        jumps = np.array(f.level_candidates(), dtype=np.float64) * (1.0 - 1e-12)
        levels = np.concatenate([LEVEL_GRID[LEVEL_GRID < top], jumps[jumps > 0]])
        profile = weak_profile(f, p, levels)
        if profile is not None:
            return float(np.max(profile)) if len(profile) else 0.0
    nodes = domain_nodes(f, spec, domain)
    return _sampled_weak(f.evaluate(nodes.points), nodes.weights, p)


def ball_samples(
    f: TestFunction,
    balls: Sequence[Ball],
    quad: QuadratureSpec = QuadratureSpec(resolution=16),
    focus: Optional[Ball] = None,
) -> List[BallSample]:
    """Nodes of every ball and the values of f there, from one evaluation call.

    focus defaults to f's own focus ball.
    """
    focus = focus or f.focus_ball()
    nodes = [ball_integration_nodes(b, quad, focus, ball_index=i) for i, b in enumerate(balls)]
    values = f.evaluate(np.concatenate([nd.points for nd in nodes]))
    cuts = np.cumsum([len(nd.weights) for nd in nodes])[:-1]
    return [BallSample(nd, v) for nd, v in zip(nodes, np.split(values, cuts))]


def _oscillation(data: BallSample) -> float:
    """|B|^-1 int_B |f - f_B| with f_B the mean on the same nodes."""
    v = data.values
    if v.max() == v.min():
        return 0.0
    w = data.nodes.weights
    total = float(np.sum(w))
    mean = float(np.dot(w, v)) / total
    return float(np.dot(w, np.abs(v - mean))) / total


def ball_functionals(samples: Sequence[BallSample], spec: SpaceSpec, balls: Sequence[Ball]) -> np.ndarray:
    """Per-ball functional of spec.kind before the theta weight."""
    Q = balls[0].params.Q
    p = spec.p
    out = np.empty(len(balls))
    for i, (b, d) in enumerate(zip(balls, samples)):
        vol = ball_volume(b)
        if spec.kind == "morrey":
            out[i] = (vol ** (-spec.kappa) * d.nodes.integrate(np.abs(d.values) ** p)) ** (1.0 / p)
        elif spec.kind == "weak-morrey":
            out[i] = vol ** (-spec.kappa / p) * _sampled_weak(d.values, d.nodes.weights, p)
        elif spec.kind == "bmo":
            out[i] = _oscillation(d)
        else:
            out[i] = vol ** (-spec.beta / Q) * _oscillation(d)
    return out


def _report(per_ball: np.ndarray, balls: Sequence[Ball]) -> NormReport:
    best = int(np.argmax(per_ball))
    value = float(per_ball[best])
    half = float(np.max(per_ball[: max(len(per_ball) // 2, 1)]))
    convergence = half / value if value > 0 else 1.0
    return NormReport(value, balls[best], len(balls), convergence, per_ball)


def _rho_of(V: Optional[Potential], balls: Sequence[Ball], rho: Optional[RhoCache]) -> np.ndarray:
    if V is None or V.is_zero:
        return np.full(len(balls), np.inf)
    cache = rho or RhoCache(V)
    return cache.many(np.array([b.center.as_array() for b in balls]))


def ball_norm(
    f: TestFunction,
    spec: SpaceSpec,
    V: Optional[Potential],
    balls: Sequence[Ball],
    quad: QuadratureSpec = QuadratureSpec(resolution=16),
    rho: Optional[RhoCache] = None,
    growth_factor: Optional[float] = None,
    logger=None,
) -> NormReport:
    """sup over balls of (1 + r/rho(u0))^-theta times the per-ball functional of spec.kind.

    V = None (or the zero potential) is the free case, rho = inf. With
    growth_factor the family is re-evaluated with radii multiplied by it
    and the ratio of the two sups is reported as growth.
    """
    if spec.kind not in ("morrey", "weak-morrey", "bmo", "hoelder"):
        raise InvalidParameterError(f"{spec.kind} is not a ball-family norm")
    if len(balls) == 0:
        raise InvalidParameterError("norm estimation needs a nonempty ball family")
    radii = np.array([b.radius for b in balls])
    if logger is not None and radii.max() < 1e3 * radii.min():
        logger.warning(f"ball radii span only {np.log10(radii.max() / radii.min()):.2f} decades")
    weights = theta_weight(radii, _rho_of(V, balls, rho), spec.theta)
    raw = ball_functionals(ball_samples(f, balls, quad), spec, balls)
    report = _report(weights * raw, balls)
    if growth_factor is not None:
        wider = [b.scaled(growth_factor) for b in balls]
        again = ball_norm(f, spec, V, wider, quad, rho)
        report.growth = again.value / report.value if report.value > 0 else 1.0
    return report


def morrey_norm(f, spec: SpaceSpec, V, balls, quad=QuadratureSpec(resolution=16), rho=None, **kw) -> NormReport:
    if spec.kind != "morrey":
        raise InvalidParameterError(f"morrey_norm needs a morrey space, got {spec.kind}")
    return ball_norm(f, spec, V, balls, quad, rho, **kw)


def weak_morrey_norm(f, spec: SpaceSpec, V, balls, quad=QuadratureSpec(resolution=16), rho=None, **kw) -> NormReport:
    if spec.kind != "weak-morrey":
        raise InvalidParameterError(f"weak_morrey_norm needs a weak-morrey space, got {spec.kind}")
    return ball_norm(f, spec, V, balls, quad, rho, **kw)


def bmo_norm(f, theta: float, V, balls, quad=QuadratureSpec(resolution=16), rho=None, **kw) -> NormReport:
    return ball_norm(f, SpaceSpec("bmo", theta=theta), V, balls, quad, rho, **kw)


def hoelder_norm(
    f, beta: float, theta: float, V, balls, quad=QuadratureSpec(resolution=16), rho=None, beyond_unit=False, **kw
) -> NormReport:
    _check_beta(beta, beyond_unit)
    return ball_norm(f, SpaceSpec("hoelder", theta=theta, beta=beta, beyond_unit=beyond_unit), V, balls, quad, rho, **kw)


def estimate_norm(
    f: TestFunction,
    spec: SpaceSpec,
    V: Optional[Potential] = None,
    balls: Optional[Sequence[Ball]] = None,
    quad: QuadratureSpec = QuadratureSpec(resolution=16),
    rho: Optional[RhoCache] = None,
    **kw,
) -> NormReport:
    """Any norm of the scale as a NormReport (no witness for the Lebesgue pair)."""
    if spec.kind == "lebesgue":
        return NormReport(lebesgue_norm(f, spec.p, quad), None, 0, 1.0)
    if spec.kind == "weak-lebesgue":
        return NormReport(weak_lebesgue_norm(f, spec.p, quad), None, 0, 1.0)
    return ball_norm(f, spec, V, balls or [], quad, rho, **kw)
