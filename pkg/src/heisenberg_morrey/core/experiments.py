"""
Seeded sweeps that put the boundedness theorems to an empirical test.

Boundedness cannot be proven numerically. A sweep reports the largest
ratio ||T f|| / ||f|| over a test family and how far it drifts when both
the test family and the ball family are doubled. Function i of a family
and ball i of a ball family depend only on (seed, i), so the doubled
families contain the base ones and a single evaluation serves both.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..exceptions import AdmissibilityError, FitInfeasibleError, InvalidParameterError
from .fractional import FractionalIntegral
from .functions import Bump, GradientMagnitude, Indicator, Power, SmoothBump, TestFunction
from .group import (
    Ball,
    GroupElement,
    GroupParams,
    displayed_unit_ball_volume,
    group_product,
    koranyi_distance,
    koranyi_norm,
    dilation,
    monte_carlo_unit_ball_volume,
    radial_unit_ball_volume,
    unit_ball_volume,
)
from .heat import HeatQuadrature, heat_kernel_axis, heat_kernel_mass, heat_kernel_values
from .kernels import SubordinationSpec, fit_smoothness_exponent
from .potential import (
    Potential,
    RhoCache,
    RhoComparability,
    check_com2,
    critical_radii,
    fit_rho_comparability,
)
from .quadrature import QuadratureSpec, ball_family, sample_ball
from .spaces import (
    SpaceSpec,
    NormReport,
    ball_functionals,
    ball_norm,
    ball_samples,
    check_2rx,
    lebesgue_norm,
    theta_weight,
    weak_lebesgue_norm,
)
from .trotter import TrotterSpec

EXPERIMENTS = (
    "heat-kernel",
    "rho",
    "norm",
    "hls",
    "thm-morrey",
    "thm-weak",
    "thm-hoelder",
    "free-case",
    "inequalities",
)
FAMILY_KINDS = ("bump", "smooth-bump", "power", "indicator")
STABLE_DRIFT = 0.1
SLACK = 1e-9
# settings meeting each theorem's hypotheses when the config leaves them out
EXPERIMENT_DEFAULTS = {
    "thm-weak": {"p": 1.0, "kappa": 0.5},
    "thm-hoelder": {"kappa": 0.6},
    "hls": {"potential": "zero"},
    "free-case": {"potential": "zero"},
}


def sobolev_exponent(p: float, alpha: float, Q: int) -> float:
    """q with 1/q = 1/p - alpha/Q."""
    if not 0 < alpha < Q:
        raise AdmissibilityError(f"alpha must lie in (0, Q) = (0, {Q}), got {alpha}")
    if not 1 <= p < Q / alpha:
        raise AdmissibilityError(f"need 1 <= p < Q/alpha = {Q / alpha:g}, got p={p}")
    return 1.0 / (1.0 / p - alpha / Q)


def hoelder_exponent(kappa: float, p: float, q: float, Q: int) -> float:
    """beta with beta/Q = kappa/p - 1/q."""
    return Q * (kappa / p - 1.0 / q)


def output_kappa(kappa: float, p: float, q: float) -> float:
    return kappa * q / p


def gradient_exponent(kappa: float, p: float, Q: int) -> float:
    """beta = 1 - (1 - kappa) Q / p of the Morrey lemma."""
    return 1.0 - (1.0 - kappa) * Q / p


def theta_sweep(theta: float) -> Tuple[float, ...]:
    return (0.0,) if theta == 0 else (theta, 2.0 * theta, 4.0 * theta)


def _as_tuple(value, cast=float) -> Optional[tuple]:
    if value is None:
        return None
    if isinstance(value, str):
        value = [v for v in value.replace(";", ",").split(",") if v.strip()]
    if not isinstance(value, (list, tuple)):
        value = [value]
    return tuple(cast(v.strip()) if isinstance(v, str) else cast(v) for v in value)


def _potential(data: dict) -> Potential:
    raw = data.get("potential", "constant")
    if isinstance(raw, dict):
        return Potential.from_dict(raw)
    kind = str(raw).lower()
    value = float(data.get("potential_value", 0.0 if kind == "zero" else 1.0))
    exponent = float(data.get("potential_exponent", 1.0 if kind == "power" else 0.0))
    return Potential(kind, value, exponent)


@dataclass
class ExperimentConfig:
    """Everything one run needs; validated against the targeted theorem on construction."""

    experiment: str = "thm-morrey"
    name: Optional[str] = None
    n: int = 1
    potential: Potential = field(default_factory=lambda: Potential.constant(1.0))
    alpha: float = 1.0
    p: float = 2.0
    q: Optional[float] = None
    kappa: float = 0.25
    theta: float = 0.0
    theta_out: Optional[Tuple[float, ...]] = None
    beta: Optional[float] = None
    delta: float = 1.0
    space: str = "morrey"
    kappa_weak: float = 0.5
    kappa_hoelder: float = 0.6
    p_gradient: float = 3.0
    kappa_gradient: float = 0.5
    family: Tuple[str, ...] = ("bump", "power", "indicator")
    function_count: int = 16
    width_min: float = 0.25
    width_max: float = 4.0
    family_box: float = 2.0
    ball_count: int = 32
    radius_min: float = 1e-2
    radius_max: float = 1e2
    center_box: float = 10.0
    norm_resolution: int = 12
    operator_resolution: int = 16
    dilations: Tuple[float, ...] = (0.25, 1.0, 4.0)
    translation: Optional[Tuple[float, ...]] = None
    doubling: bool = True
    sub: SubordinationSpec = SubordinationSpec()
    trotter: TrotterSpec = TrotterSpec()
    heat: HeatQuadrature = HeatQuadrature()
    heat_times: Tuple[float, ...] = (0.1, 1.0, 10.0)
    heat_grid: int = 33
    volume_samples: int = 10**6
    rho_points: int = 64
    inequality_samples: int = 1000
    seed: int = 0
    output: Optional[str] = None

    def __post_init__(self):
        self.experiment = self.experiment.lower().replace("_", "-")
        if self.experiment not in EXPERIMENTS:
            raise InvalidParameterError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        self.family = tuple(k.lower() for k in self.family)
        bad = [k for k in self.family if k not in FAMILY_KINDS]
        if bad or not self.family:
            raise InvalidParameterError(f"family kinds must be drawn from {FAMILY_KINDS}, got {self.family}")
        for key in ("function_count", "ball_count", "norm_resolution", "operator_resolution"):
            if int(getattr(self, key)) < 1:
                raise InvalidParameterError(f"{key} must be positive")
        if not 0 < self.width_min <= self.width_max:
            raise InvalidParameterError("need 0 < width_min <= width_max")
        if self.translation is not None and len(self.translation) != self.params.dim:
            raise InvalidParameterError(f"translation needs {self.params.dim} coordinates")
        if self.sub.alpha != self.alpha:
            self.sub = replace(self.sub, alpha=self.alpha)
        self.validate()

    @property
    def params(self) -> GroupParams:
        return GroupParams(self.n)

    @property
    def Q(self) -> int:
        return self.params.Q

    @property
    def run_name(self) -> str:
        return self.name or self.experiment

    @property
    def theta_outputs(self) -> Tuple[float, ...]:
        return tuple(self.theta_out) if self.theta_out else theta_sweep(self.theta)

    @property
    def q_value(self) -> float:
        return sobolev_exponent(self.p, self.alpha, self.Q)

    @property
    def beta_value(self) -> float:
        return hoelder_exponent(self.kappa, self.p, self.q_value, self.Q)

    def _check_q(self, q: float):
        if self.q is not None and abs(self.q - q) > SLACK * q:
            raise AdmissibilityError(f"q={self.q} violates 1/q = 1/p - alpha/Q (q should be {q:g})")

    def _check_morrey(self, p: float, kappa: float):
        if not 1 < p < self.Q / self.alpha:
            raise AdmissibilityError(f"need 1 < p < Q/alpha = {self.Q / self.alpha:g}, got p={p}")
        q = sobolev_exponent(p, self.alpha, self.Q)
        if not 0 < kappa < p / q:
            raise AdmissibilityError(f"need 0 < kappa < p/q = {p / q:g}, got kappa={kappa}")

    def _check_weak(self, kappa: float):
        q = sobolev_exponent(1.0, self.alpha, self.Q)
        if not 0 < kappa < 1.0 / q:
            raise AdmissibilityError(f"need 0 < kappa < 1/q = {1.0 / q:g}, got kappa={kappa}")

    def _check_hoelder(self, p: float, kappa: float) -> float:
        if not 1 < p < self.Q / self.alpha:
            raise AdmissibilityError(f"need 1 < p < Q/alpha = {self.Q / self.alpha:g}, got p={p}")
        q = sobolev_exponent(p, self.alpha, self.Q)
        if not p / q - SLACK <= kappa < 1:
            raise AdmissibilityError(f"need p/q = {p / q:g} <= kappa < 1, got kappa={kappa}")
        beta = max(hoelder_exponent(kappa, p, q, self.Q), 0.0)
        if beta > 1:
            raise AdmissibilityError(f"beta = {beta:g} exceeds 1")
        if beta > SLACK and not beta < self.delta:
            raise AdmissibilityError(f"beta = {beta:g} must stay below the kernel smoothness delta = {self.delta:g}")
        return beta

    def _require_potential(self, zero: bool):
        if zero and not self.potential.is_zero:
            raise AdmissibilityError(f"{self.experiment} runs the free case; the potential must be zero")
        if not zero and self.potential.is_zero:
            raise AdmissibilityError(f"{self.experiment} needs a nonzero potential")

    def validate(self):
        """Exponent hypotheses of the targeted theorem; raises AdmissibilityError."""
        if not 0 < self.delta <= 1:
            raise AdmissibilityError(f"delta must lie in (0, 1], got {self.delta}")
        if any(t < 0 for t in self.theta_outputs) or self.theta < 0:
            raise AdmissibilityError("theta values must be nonnegative")
        exp = self.experiment
        if exp == "hls":
            self._check_q(sobolev_exponent(self.p, self.alpha, self.Q))
        elif exp == "thm-morrey":
            self._require_potential(False)
            self._check_morrey(self.p, self.kappa)
            self._check_q(self.q_value)
        elif exp == "thm-weak":
            self._require_potential(False)
            if self.p != 1:
                raise AdmissibilityError(f"the weak-type theorem needs p = 1, got {self.p}")
            self._check_q(self.q_value)
            self._check_weak(self.kappa)
        elif exp == "thm-hoelder":
            self._require_potential(False)
            self._check_q(sobolev_exponent(self.p, self.alpha, self.Q))
            beta = self._check_hoelder(self.p, self.kappa)
            if self.beta is not None and abs(self.beta - beta) > SLACK:
                raise AdmissibilityError(f"beta={self.beta} violates beta/Q = kappa/p - 1/q (should be {beta:g})")
        elif exp == "free-case":
            self._require_potential(True)
            if self.theta != 0 or any(t != 0 for t in self.theta_outputs):
                raise AdmissibilityError("the free case uses theta = 0")
            self._check_morrey(self.p, self.kappa)
            self._check_weak(self.kappa_weak)
            self._check_hoelder(self.p, self.kappa_hoelder)
            beta = gradient_exponent(self.kappa_gradient, self.p_gradient, self.Q)
            if not 0 < beta <= 1:
                raise AdmissibilityError(f"Morrey-lemma exponent beta = {beta:g} must lie in (0, 1]")
        elif exp == "norm":
            SpaceSpec(self.space, self.p, self.kappa, self.theta, self.beta or 0.0)
        elif exp == "rho":
            self._require_potential(False)

    def to_dict(self) -> dict:
        out = {
            "experiment": self.experiment,
            "n": self.n,
            "potential": self.potential.label,
            "alpha": self.alpha,
            "p": self.p,
            "q": self.q,
            "kappa": self.kappa,
            "theta": self.theta,
            "theta_out": ",".join(f"{t:g}" for t in self.theta_outputs),
            "family": ",".join(self.family),
            "function_count": self.function_count,
            "ball_count": self.ball_count,
            "radius_range": f"{self.radius_min:g},{self.radius_max:g}",
            "norm_resolution": self.norm_resolution,
            "operator_resolution": self.operator_resolution,
            "doubling": self.doubling,
            "seed": self.seed,
        }
        out.update({f"subordination_{k}": v for k, v in self.sub.to_dict().items()})
        out.update({f"trotter_{k}": v for k, v in self.trotter.to_dict().items()})
        out.update({f"heat_{k}": v for k, v in self.heat.to_dict().items()})
        return out

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "ExperimentConfig":
        """Typed config from flat keys (the config-file format); unknown keys are ignored."""
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        experiment = str(data.get("experiment", "thm-morrey")).lower().replace("_", "-")
        data = {**EXPERIMENT_DEFAULTS.get(experiment, {}), **data}
        kw = {}
        plain = {
            "experiment": str,
            "name": str,
            "n": int,
            "alpha": float,
            "p": float,
            "q": float,
            "kappa": float,
            "theta": float,
            "beta": float,
            "delta": float,
            "space": str,
            "kappa_weak": float,
            "kappa_hoelder": float,
            "p_gradient": float,
            "kappa_gradient": float,
            "function_count": int,
            "width_min": float,
            "width_max": float,
            "family_box": float,
            "ball_count": int,
            "radius_min": float,
            "radius_max": float,
            "center_box": float,
            "norm_resolution": int,
            "operator_resolution": int,
            "doubling": bool,
            "heat_grid": int,
            "volume_samples": int,
            "rho_points": int,
            "inequality_samples": int,
            "seed": int,
            "output": str,
        }
        for key, cast in plain.items():
            if data.get(key) is not None:
                kw[key] = cast(data[key])
        for key, cast in (("theta_out", float), ("dilations", float), ("translation", float), ("heat_times", float)):
            if data.get(key) is not None:
                kw[key] = _as_tuple(data[key], cast)
        if data.get("family") is not None:
            kw["family"] = _as_tuple(data["family"], str)
        kw["potential"] = _potential(data)

        sub = SubordinationSpec()
        kw["sub"] = SubordinationSpec(
            alpha=float(data.get("alpha", 1.0)),
            nodes=int(data.get("subordination_nodes", sub.nodes)),
            order=int(data.get("subordination_order", sub.order)),
            tail_tolerance=float(data.get("tail_tolerance", sub.tail_tolerance)),
        )
        ts = TrotterSpec()
        half = data.get("trotter_half_widths")
        kw["trotter"] = TrotterSpec(
            steps=int(data.get("trotter_steps", ts.steps)),
            nodes_xy=int(data.get("trotter_nodes_xy", ts.nodes_xy)),
            nodes_t=int(data.get("trotter_nodes_t", ts.nodes_t)),
            dt_ratio=float(data.get("trotter_dt_ratio", ts.dt_ratio)),
            max_nodes_t=int(data.get("trotter_max_nodes_t", ts.max_nodes_t)),
            half_widths=None if half is None else _as_tuple(half),
            truncation_eps=float(data.get("truncation_eps", ts.truncation_eps)),
            mass_tolerance=float(data.get("mass_tolerance", ts.mass_tolerance)),
            delta_tolerance=float(data.get("delta_tolerance", ts.delta_tolerance)),
            convolution_resolution=int(data.get("convolution_resolution", ts.convolution_resolution)),
            horizon=float(data.get("horizon", ts.horizon)),
        )
        hq = HeatQuadrature()
        kw["heat"] = HeatQuadrature(
            lambda_cutoff=float(data.get("lambda_cutoff", hq.lambda_cutoff)),
            lambda_nodes=int(data.get("lambda_nodes", hq.lambda_nodes)),
            adaptive=bool(data.get("adaptive", hq.adaptive)),
        )
        return cls(**kw)


# ---------------------------------------------------------------------------
# families


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _member(config: ExperimentConfig, kind: str, i: int, gamma_max: float) -> TestFunction:
    params = config.params
    rng = _rng(config.seed, 1 + FAMILY_KINDS.index(kind), i)
    widths = np.geomspace(config.width_min, config.width_max, 4)
    width = float(widths[i % 4])
    if i // 4 == 0:
        center = GroupElement.identity(params.n)
    else:
        center = GroupElement.from_array(rng.uniform(-config.family_box, config.family_box, params.dim))
    if kind == "bump":
        f = Bump(center, width)
    elif kind == "smooth-bump":
        f = SmoothBump(center, width)
    elif kind == "power":
        gamma = float(rng.uniform(0.5, 0.9)) * gamma_max
        f = Power(gamma, radius=width, cap=(width / 16.0) ** (-gamma), center=center)
    else:
        f = Indicator(Ball(center, width))
    if config.translation is not None:
        f = f.translate(GroupElement.from_array(config.translation))
    return f


def build_family(
    config: ExperimentConfig, scale: int = 1, gamma_max: Optional[float] = None, kinds: Optional[Sequence[str]] = None
) -> Tuple[List[TestFunction], np.ndarray]:
    """Test functions of the configured kinds and the mask of the base family.

    Per kind: function_count bumps, function_count // 2 powers and
    indicators; scale = 2 doubles every count.
    """
    gamma_max = config.Q / config.p if gamma_max is None else gamma_max
    functions, base = [], []
    for kind in kinds or config.family:
        count = config.function_count if "bump" in kind else max(config.function_count // 2, 1)
        for i in range(count * scale):
            functions.append(_member(config, kind, i, gamma_max))
            base.append(i < count)
    return functions, np.array(base)


def _anchors(functions: Sequence[TestFunction]) -> List[GroupElement]:
    anchors = []
    for f in functions:
        b = f.support_ball() or f.focus_ball()
        if b is not None and all(not np.array_equal(a.as_array(), b.center.as_array()) for a in anchors):
            anchors.append(b.center)
        if len(anchors) == 4:
            break
    return anchors


def build_balls(
    config: ExperimentConfig, scale: int = 1, anchors: Optional[Sequence[GroupElement]] = None
) -> Tuple[List[Ball], np.ndarray]:
    """Ball family (first ball_count balls form the base) anchored at the family centres."""
    count = config.ball_count
    if anchors is not None and config.translation is not None:
        g_inv = -np.asarray(config.translation)
        anchors = [GroupElement.from_array(group_product(g_inv, a.as_array())) for a in anchors]
    balls = ball_family(
        config.params,
        count * scale,
        config.seed,
        config.radius_min,
        config.radius_max,
        config.center_box,
        anchors=anchors or None,
    )
    if config.translation is not None:
        g = np.asarray(config.translation)
        balls = [Ball(GroupElement.from_array(group_product(g, b.center.as_array())), b.radius) for b in balls]
    return balls, np.arange(len(balls)) < count


# ---------------------------------------------------------------------------
# reports


@dataclass
class RatioRow:
    function: str
    input_norm: float
    output_norm: float
    ratio: float
    theta_out: float = 0.0
    extra: Dict[str, float] = field(default_factory=dict)


@dataclass
class RatioReport:
    experiment: str
    rows: List[RatioRow]
    max_ratio: float
    stability: Optional[float]
    theta_out: float = 0.0
    sweep: Dict[float, Tuple[float, Optional[float]]] = field(default_factory=dict)
    scale_invariance: Optional[float] = None
    notes: Dict[str, float] = field(default_factory=dict)

    @property
    def stable(self) -> bool:
        if not np.isfinite(self.max_ratio):
            return False
        return self.stability is None or self.stability <= STABLE_DRIFT

    @property
    def smallest_stable_theta(self) -> Optional[float]:
        for theta in sorted(self.sweep):
            ratio, drift = self.sweep[theta]
            if np.isfinite(ratio) and (drift is None or drift <= STABLE_DRIFT):
                return theta
        return None

    def summary(self) -> dict:
        return {
            "experiment": self.experiment,
            "functions": len({r.function for r in self.rows}),
            "max_ratio": self.max_ratio,
            "stability": np.nan if self.stability is None else self.stability,
            "theta_out": self.theta_out,
            "smallest_stable_theta": np.nan if self.smallest_stable_theta is None else self.smallest_stable_theta,
            "scale_invariance": np.nan if self.scale_invariance is None else self.scale_invariance,
            **self.notes,
        }


def _drift(full: float, base: float) -> float:
    if base == 0.0:
        return 0.0 if full == 0.0 else np.inf
    return abs(full / base - 1.0)


class _Matrix:
    """Per-ball functionals of a list of functions, computed once."""

    def __init__(self, functions, specs, balls, quad, focus=None, progress=False, desc="  Functions"):
        keys = {s.with_theta(0.0) for s in specs}
        self.raw = {k: np.empty((len(functions), len(balls))) for k in keys}
        iterator = tqdm(functions, desc=desc, unit=" f") if progress else functions
        for i, f in enumerate(iterator):
            samples = ball_samples(f, balls, quad, None if focus is None else focus[i])
            for k in keys:
                self.raw[k][i] = ball_functionals(samples, k, balls)

    def norms(self, spec: SpaceSpec, weights: np.ndarray, ball_mask: np.ndarray) -> np.ndarray:
        values = self.raw[spec.with_theta(0.0)] * weights[None, :]
        return np.max(values[:, ball_mask], axis=1)


class _Sweep:
    """Family, balls and rho shared by the ratio computations of one run."""

    def __init__(self, config: ExperimentConfig, V: Potential, functions, base, progress=False, logger=None):
        self.config = config
        self.V = V
        self.progress = progress
        self.logger = logger
        scale = 2 if config.doubling else 1
        self.functions, self.base = functions, base
        self.balls, self.ball_base = build_balls(config, scale, _anchors([f for f, b in zip(functions, base) if b]))
        self.radii = np.array([b.radius for b in self.balls])
        if V.is_zero:
            self.rho = np.full(len(self.balls), np.inf)
        else:
            self.rho = RhoCache(V).many(np.array([b.center.as_array() for b in self.balls]))
        self.quad = QuadratureSpec(resolution=config.norm_resolution)

    def weights(self, theta: float) -> np.ndarray:
        return theta_weight(self.radii, self.rho, theta)

    def matrix(self, functions, specs, focus=None, desc="  Functions") -> _Matrix:
        return _Matrix(functions, specs, self.balls, self.quad, focus, self.progress, desc)

    def report(
        self,
        name: str,
        inputs: np.ndarray,
        input_base: np.ndarray,
        outputs: Dict[float, Tuple[np.ndarray, np.ndarray]],
        extra: Optional[Dict[str, np.ndarray]] = None,
    ) -> RatioReport:
        """Ratios per theta' from full / base-ball norms; rows list the base family."""
        labels = [f.label for f in self.functions]
        rows, sweep = [], {}
        for theta, (out_full, out_base) in outputs.items():
            with np.errstate(divide="ignore", invalid="ignore"):
                r_base = out_base / input_base
                r_full = out_full / inputs
            max_base = float(np.max(r_base[self.base]))
            drift = _drift(float(np.max(r_full)), max_base) if self.config.doubling else None
            sweep[theta] = (max_base, drift)
            for i in np.flatnonzero(self.base):
                row_extra = {k: float(v[i]) for k, v in (extra or {}).items()}
                rows.append(RatioRow(labels[i], float(input_base[i]), float(out_base[i]), float(r_base[i]), theta, row_extra))
        theta0 = min(outputs)
        ratio, drift = sweep[theta0]
        if self.logger is not None:
            self.logger.info(f"{name}: max ratio {ratio:.6g} at theta'={theta0:g}, drift {drift}")
        return RatioReport(name, rows, ratio, drift, theta0, sweep)


def _operator(config: ExperimentConfig, V: Potential, logger=None) -> FractionalIntegral:
    return FractionalIntegral(
        V, config.alpha, config.params, config.sub, config.trotter, config.heat, config.operator_resolution, logger
    )


def _boundedness(
    config: ExperimentConfig,
    name: str,
    V: Potential,
    in_spec: SpaceSpec,
    out_spec: SpaceSpec,
    companion: Optional[SpaceSpec] = None,
    progress: bool = False,
    logger=None,
) -> RatioReport:
    """||I_alpha f||_out(theta') / ||f||_in(theta) over the family, for every theta' of the sweep."""
    gamma_max = config.Q * (1.0 - in_spec.kappa) / in_spec.p
    functions, base = build_family(config, 2 if config.doubling else 1, gamma_max)
    sweep = _Sweep(config, V, functions, base, progress, logger)
    w_in = sweep.weights(in_spec.theta)
    inputs = sweep.matrix(functions, [in_spec], desc="  Inputs")
    in_full = inputs.norms(in_spec, w_in, np.ones(len(sweep.balls), bool))
    in_base = inputs.norms(in_spec, w_in, sweep.ball_base)

    op = _operator(config, V, logger)
    images = [op(f) for f in functions]
    specs = [out_spec] + ([companion] if companion is not None else [])
    outputs = sweep.matrix(images, specs, [f.focus_ball() for f in functions], desc="  I_alpha f")
    results, extra = {}, {}
    for theta in config.theta_outputs:
        w = sweep.weights(theta)
        spec = out_spec.with_theta(theta)
        results[theta] = (
            outputs.norms(spec, w, np.ones(len(sweep.balls), bool)),
            outputs.norms(spec, w, sweep.ball_base),
        )
    if companion is not None:
        w = sweep.weights(config.theta_outputs[0])
        extra[f"{companion.kind}_output"] = outputs.norms(companion, w, sweep.ball_base)
    report = sweep.report(name, in_full, in_base, results, extra)
    if companion is not None:
        primary = results[config.theta_outputs[0]][1]
        bad = np.count_nonzero(primary[base] > extra[f"{companion.kind}_output"][base] * (1.0 + 1e-12))
        report.notes[f"{out_spec.kind}_above_{companion.kind}"] = float(bad)
    return report


# ---------------------------------------------------------------------------
# theorem sweeps


def run_hls(config: ExperimentConfig, progress: bool = False, logger=None) -> RatioReport:
    """||I_alpha f||_q / ||f||_p (weak-q norm for p = 1), with the dilation check for V = 0."""
    q = config.q_value
    weak = config.p == 1
    functions, base = build_family(config, 2 if config.doubling else 1, config.Q / config.p)
    op = _operator(config, config.potential, logger)
    quad = QuadratureSpec(resolution=config.norm_resolution)

    def ratio(f):
        denominator = lebesgue_norm(f, config.p, quad)
        image = op(f)
        numerator = weak_lebesgue_norm(image, q, quad) if weak else lebesgue_norm(image, q, quad)
        return denominator, numerator

    iterator = tqdm(functions, desc="  HLS", unit=" f") if progress else functions
    pairs = np.array([ratio(f) for f in iterator])
    inputs, outputs = pairs[:, 0], pairs[:, 1]
    ratios = outputs / inputs
    max_base = float(np.max(ratios[base]))
    drift = _drift(float(np.max(ratios)), max_base) if config.doubling else None
    rows = [
        RatioRow(functions[i].label, float(inputs[i]), float(outputs[i]), float(ratios[i]))
        for i in np.flatnonzero(base)
    ]
    report = RatioReport("hls", rows, max_base, drift, sweep={0.0: (max_base, drift)})
    if config.potential.is_zero and len(config.dilations) > 1:
        spreads = []
        for i in np.flatnonzero(base):
            scaled = [ratio(functions[i].compose_dilation(a)) for a in config.dilations]
            r = np.array([num / den for den, num in scaled])
            for a, value in zip(config.dilations, r):
                rows.append(RatioRow(f"{functions[i].label}/dil={a:g}", np.nan, np.nan, float(value)))
            spreads.append(float(r.max() / r.min() - 1.0))
        report.scale_invariance = max(spreads)
    if logger is not None:
        logger.info(f"hls: max ratio {max_base:.6g}, drift {drift}, scale spread {report.scale_invariance}")
    return report


def run_morrey_boundedness(config: ExperimentConfig, progress: bool = False, logger=None) -> RatioReport:
    q = config.q_value
    in_spec = SpaceSpec("morrey", config.p, config.kappa, config.theta)
    out_spec = SpaceSpec("morrey", q, output_kappa(config.kappa, config.p, q))
    return _boundedness(config, "thm-morrey", config.potential, in_spec, out_spec, None, progress, logger)


def run_weak_morrey_boundedness(config: ExperimentConfig, progress: bool = False, logger=None) -> RatioReport:
    """Weak-Morrey output over Morrey-L^1 input; the strong output norm rides along."""
    q = config.q_value
    in_spec = SpaceSpec("morrey", 1.0, config.kappa, config.theta)
    out_spec = SpaceSpec("weak-morrey", q, output_kappa(config.kappa, 1.0, q))
    strong = SpaceSpec("morrey", q, output_kappa(config.kappa, 1.0, q))
    return _boundedness(config, "thm-weak", config.potential, in_spec, out_spec, strong, progress, logger)


def smoothness_exponent(config: ExperimentConfig) -> float:
    """Kernel smoothness order fitted at unit distance from the origin along X_1."""
    n = config.n
    w = GroupElement.identity(n)
    u = GroupElement.from_array(np.eye(2 * n + 1)[0])
    return fit_smoothness_exponent(config.potential, config.alpha, u, w, sub=config.sub, ts=config.trotter, hq=config.heat)


def run_hoelder_boundedness(config: ExperimentConfig, progress: bool = False, logger=None) -> RatioReport:
    """Hölder output (BMO when kappa = p/q) over Morrey input."""
    beta = max(config.beta_value, 0.0)
    in_spec = SpaceSpec("morrey", config.p, config.kappa, config.theta)
    out_spec = SpaceSpec("bmo") if beta <= SLACK else SpaceSpec("hoelder", beta=beta)
    delta = smoothness_exponent(config)
    if logger is not None:
        logger.info(f"thm-hoelder: fitted kernel smoothness delta = {delta:.4g}")
    if beta > SLACK and not beta < delta:
        raise AdmissibilityError(f"beta = {beta:g} must stay below the fitted kernel smoothness delta = {delta:.4g}")
    report = _boundedness(config, "thm-hoelder", config.potential, in_spec, out_spec, None, progress, logger)
    report.notes["beta"] = beta
    report.notes["delta_fit"] = delta
    return report


def _gradient_lemma(config: ExperimentConfig, progress: bool = False, logger=None) -> RatioReport:
    """||f||_C^beta / ||grad_H f||_(p,kappa), and the reversed ratio as a second column."""
    p, kappa = config.p_gradient, config.kappa_gradient
    beta = gradient_exponent(kappa, p, config.Q)
    functions, base = build_family(config, 2 if config.doubling else 1, kinds=("smooth-bump",))
    sweep = _Sweep(config, Potential.zero(), functions, base, progress, logger)
    ones = sweep.weights(0.0)
    everything = np.ones(len(sweep.balls), bool)
    morrey = SpaceSpec("morrey", p, kappa)
    hoelder = SpaceSpec("hoelder", beta=beta)
    plain = sweep.matrix(functions, [morrey, hoelder], desc="  f")
    grads = [GradientMagnitude(f) for f in functions]
    slopes = sweep.matrix(grads, [morrey, hoelder], desc="  grad f")
    grad_in_full = slopes.norms(morrey, ones, everything)
    grad_in_base = slopes.norms(morrey, ones, sweep.ball_base)
    f_out_full = plain.norms(hoelder, ones, everything)
    f_out_base = plain.norms(hoelder, ones, sweep.ball_base)
    reverse = slopes.norms(hoelder, ones, sweep.ball_base) / plain.norms(morrey, ones, sweep.ball_base)
    report = sweep.report(
        "free-case:morrey-lemma",
        grad_in_full,
        grad_in_base,
        {0.0: (f_out_full, f_out_base)},
        {"reverse_ratio": reverse},
    )
    report.notes["beta"] = beta
    report.notes["max_reverse_ratio"] = float(np.max(reverse[base]))
    return report


def run_free_case(config: ExperimentConfig, progress: bool = False, logger=None) -> Dict[str, RatioReport]:
    """The V = 0 theorems: Morrey, weak Morrey, Hölder/BMO bounds of I_alpha and the Morrey lemma."""
    V = Potential.zero()
    Q, alpha = config.Q, config.alpha
    q = config.q_value
    reports = {}
    reports["morrey"] = _boundedness(
        config,
        "free-case:morrey",
        V,
        SpaceSpec("morrey", config.p, config.kappa),
        SpaceSpec("morrey", q, output_kappa(config.kappa, config.p, q)),
        None,
        progress,
        logger,
    )
    q1 = sobolev_exponent(1.0, alpha, Q)
    kw = config.kappa_weak
    reports["weak-morrey"] = _boundedness(
        config,
        "free-case:weak-morrey",
        V,
        SpaceSpec("morrey", 1.0, kw),
        SpaceSpec("weak-morrey", q1, output_kappa(kw, 1.0, q1)),
        SpaceSpec("morrey", q1, output_kappa(kw, 1.0, q1)),
        progress,
        logger,
    )
    kh = config.kappa_hoelder
    beta = max(hoelder_exponent(kh, config.p, q, Q), 0.0)
    reports["hoelder"] = _boundedness(
        config,
        "free-case:hoelder",
        V,
        SpaceSpec("morrey", config.p, kh),
        SpaceSpec("bmo") if beta <= SLACK else SpaceSpec("hoelder", beta=beta),
        None,
        progress,
        logger,
    )
    reports["hoelder"].notes["beta"] = beta
    reports["morrey-lemma"] = _gradient_lemma(config, progress, logger)
    return reports


# ---------------------------------------------------------------------------
# inequality suite


@dataclass
class InequalityCheck:
    name: str
    checked: int
    violations: int
    worst_margin: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass
class InequalityReport:
    checks: List[InequalityCheck]
    comparability: Optional[RhoComparability] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _unit_sphere(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    g = rng.standard_normal((count, dim))
    return dilation(g, 1.0 / koranyi_norm(g))


def _check_2rx(config: ExperimentConfig) -> InequalityCheck:
    rng = _rng(config.seed, 101)
    m = config.inequality_samples
    r = 10.0 ** rng.uniform(-3, 3, m)
    rho = 10.0 ** rng.uniform(-3, 3, m)
    theta = rng.uniform(0.0, 10.0, m)
    ok = check_2rx(r, rho, theta)
    middle = (1.0 + 2.0 * r / rho) ** theta
    margin = np.minimum(middle - 1.0, 2.0**theta * (1.0 + r / rho) ** theta / middle - 1.0)
    return InequalityCheck("2rx", m, int(np.count_nonzero(~ok)), float(margin.min()))


def _check_annulus(config: ExperimentConfig) -> InequalityCheck:
    """1/2 |v^-1 u0| <= |v^-1 u| <= 3/2 |v^-1 u0| for u in B(u0, r), v outside B(u0, 2r)."""
    rng = _rng(config.seed, 102)
    m = 10 * config.inequality_samples
    dim = config.params.dim
    u0 = rng.uniform(-config.center_box, config.center_box, (m, dim))
    r = 10.0 ** rng.uniform(-2, 2, m)
    unit = sample_ball(
        Ball(GroupElement.identity(config.n), 1.0), QuadratureSpec("monte-carlo", m, config.seed)
    ).points
    u = group_product(u0, dilation(unit, r))
    v = group_product(u0, dilation(_unit_sphere(rng, m, dim), 2.0 * r * rng.uniform(1.0, 10.0, m)))
    d0 = koranyi_distance(v, u0)
    d = koranyi_distance(v, u)
    lower = d / (0.5 * d0) - 1.0
    upper = 1.5 * d0 / d - 1.0
    margin = np.minimum(lower, upper)
    return InequalityCheck("annulus", m, int(np.count_nonzero(margin < -1e-12)), float(margin.min()))


def _check_norms(config: ExperimentConfig, progress: bool) -> List[InequalityCheck]:
    functions, _ = build_family(config, 1, config.Q * (1.0 - config.kappa) / config.p)
    balls, _ = build_balls(config, 1, _anchors(functions))
    rho = (
        np.full(len(balls), np.inf)
        if config.potential.is_zero
        else RhoCache(config.potential).many(np.array([b.center.as_array() for b in balls]))
    )
    radii = np.array([b.radius for b in balls])
    strong = SpaceSpec("morrey", config.p, config.kappa)
    weak = SpaceSpec("weak-morrey", config.p, config.kappa)
    matrix = _Matrix(functions, [strong, weak], balls, QuadratureSpec(resolution=config.norm_resolution), progress=progress)
    S, W = matrix.raw[strong], matrix.raw[weak]
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.where(S > 0, 1.0 - W / S, 0.0)
    checks = [InequalityCheck("weak<=strong", S.size, int(np.count_nonzero(W > S * (1.0 + 1e-12))), float(gap.min()))]

    pairs = [(0.0, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, 4.0)]
    violations, worst, checked = 0, np.inf, 0
    for t1, t2 in pairs:
        a = theta_weight(radii, rho, t1)[None, :] * S
        b = theta_weight(radii, rho, t2)[None, :] * S
        violations += int(np.count_nonzero(b > a))
        with np.errstate(divide="ignore", invalid="ignore"):
            worst = min(worst, float(np.min(np.where(a > 0, 1.0 - b / a, 0.0))))
        checked += S.size
    checks.append(InequalityCheck("theta-monotone", checked, violations, worst))
    return checks


def _check_com2(config: ExperimentConfig) -> Tuple[InequalityCheck, Optional[RhoComparability]]:
    V = config.potential
    rng = _rng(config.seed, 103)
    dim = config.params.dim
    m = max(config.inequality_samples // 10, 10)
    rho = RhoCache(V)
    us = rng.uniform(-config.center_box, config.center_box, (m, dim))
    vs = group_product(us, dilation(_unit_sphere(rng, m, dim), 10.0 ** rng.uniform(-2, 1, m)))
    pairs = [(GroupElement.from_array(u), GroupElement.from_array(v)) for u, v in zip(us, vs)]
    try:
        fit = fit_rho_comparability(V, pairs, rho)
    except FitInfeasibleError:
        return InequalityCheck("com2", len(pairs), len(pairs), -np.inf), None
    checked = violations = 0
    worst = np.inf
    centers = rng.uniform(-config.center_box, config.center_box, (8, dim))
    for j, c in enumerate(centers):
        u = GroupElement.from_array(c)
        r = float(10.0 ** rng.uniform(-1, 1)) * rho(u)
        found = check_com2(V, fit.C0, fit.N0, u, r, 8, max(m // 8, 4), seed=config.seed + j, rho=rho)
        checked += found.checked
        violations += found.violations
        worst = min(worst, found.worst_margin)
    return InequalityCheck("com2", checked, violations, float(worst)), fit


def run_inequality_suite(config: ExperimentConfig, progress: bool = False, logger=None) -> InequalityReport:
    """Batch check of the geometric and norm inequalities the proofs rely on."""
    checks = [_check_2rx(config), _check_annulus(config)]
    fit = None
    if not config.potential.is_zero:
        com2, fit = _check_com2(config)
        checks.append(com2)
    checks.extend(_check_norms(config, progress))
    if logger is not None:
        for c in checks:
            logger.info(f"{c.name}: {c.violations} violations in {c.checked} checks (worst margin {c.worst_margin:.3e})")
    return InequalityReport(checks, fit)


# ---------------------------------------------------------------------------
# tables


@dataclass
class HeatKernelTable:
    times: np.ndarray
    radii: np.ndarray
    heights: np.ndarray
    values: np.ndarray
    origin_error: float
    axis_error: Optional[float]
    mass: float
    volumes: Dict[str, float]


def volume_report(params: GroupParams, samples: int = 10**6, seed: int = 0) -> Dict[str, float]:
    """Unit-ball volume by three routes next to the commonly displayed constant."""
    mc, se = monte_carlo_unit_ball_volume(params, samples, seed)
    closed = unit_ball_volume(params)
    displayed = displayed_unit_ball_volume(params)
    return {
        "closed_form": closed,
        "radial": radial_unit_ball_volume(params),
        "monte_carlo": mc,
        "monte_carlo_se": se,
        "displayed": displayed,
        "displayed_ratio": displayed / closed,
    }


def run_heat_kernel(config: ExperimentConfig, progress: bool = False, logger=None) -> HeatKernelTable:
    """H_s on a (|z|, t) grid with the closed-form oracles and the volume report."""
    params = config.params
    times = np.asarray(config.heat_times, dtype=np.float64)
    m = config.heat_grid
    radii = np.linspace(0.0, 4.0, m)
    heights = np.linspace(-8.0, 8.0, 2 * m - 1)
    R, T = np.meshgrid(radii, heights, indexing="ij")
    pts = np.zeros(R.shape + (params.dim,))
    pts[..., 0] = R
    pts[..., -1] = T
    iterator = tqdm(times, desc="  Heat kernel", unit=" s") if progress else times
    values = np.stack([heat_kernel_values(s, pts, config.heat) for s in iterator])
    origin = np.zeros(params.dim)
    peak = heat_kernel_values(times, np.broadcast_to(origin, (len(times), params.dim)), config.heat)
    if params.n == 1:
        origin_error = float(np.max(np.abs(peak * 16.0 * times**2 - 1.0)))
        axis = np.stack([heat_kernel_axis(s, heights) for s in times])
        axis_error = float(np.max(np.abs(values[:, 0, :] - axis) / axis))
    else:
        origin_error, axis_error = np.nan, None
    mass = heat_kernel_mass(params, config.heat)
    if logger is not None:
        logger.info(f"heat kernel: origin error {origin_error:.3e}, mass {mass:.8f}")
    return HeatKernelTable(
        times, radii, heights, values, origin_error, axis_error, mass, volume_report(params, config.volume_samples, config.seed)
    )


@dataclass
class RhoRow:
    point: np.ndarray
    rho: float
    closed_form: float


def run_rho(config: ExperimentConfig, progress: bool = False, logger=None) -> List[RhoRow]:
    """Critical radius at the identity and at seeded points of the centre box."""
    V = config.potential
    rng = _rng(config.seed, 104)
    pts = np.vstack(
        [np.zeros(config.params.dim), rng.uniform(-config.center_box, config.center_box, (config.rho_points - 1, config.params.dim))]
    )
    values = critical_radii(V, pts)
    c = V.constant_value
    closed = np.nan if c is None else 1.0 / np.sqrt(c * unit_ball_volume(config.params))
    return [RhoRow(p, float(r), closed) for p, r in zip(pts, values)]


def run_norm(config: ExperimentConfig, progress: bool = False, logger=None) -> List[Tuple[str, NormReport]]:
    """The configured norm of every base-family function, with the radius-growth scan."""
    spec = SpaceSpec(config.space, config.p, config.kappa, config.theta, config.beta or 0.0)
    functions, _ = build_family(config, 1, config.Q * (1.0 - config.kappa) / config.p)
    balls, _ = build_balls(config, 1, _anchors(functions))
    quad = QuadratureSpec(resolution=config.norm_resolution)
    V = None if config.potential.is_zero else config.potential
    rho = None if V is None else RhoCache(V)
    iterator = tqdm(functions, desc="  Norms", unit=" f") if progress else functions
    if spec.kind in ("lebesgue", "weak-lebesgue"):
        estimator = lebesgue_norm if spec.kind == "lebesgue" else weak_lebesgue_norm
        return [(f.label, NormReport(estimator(f, spec.p, quad), None, 0, 1.0)) for f in iterator]
    return [(f.label, ball_norm(f, spec, V, balls, quad, rho, growth_factor=10.0, logger=logger)) for f in iterator]


RUNNERS = {
    "heat-kernel": run_heat_kernel,
    "rho": run_rho,
    "norm": run_norm,
    "hls": run_hls,
    "thm-morrey": run_morrey_boundedness,
    "thm-weak": run_weak_morrey_boundedness,
    "thm-hoelder": run_hoelder_boundedness,
    "free-case": run_free_case,
    "inequalities": run_inequality_suite,
}
