import numpy as np
import pytest

from heisenberg_morrey.core import experiments
from heisenberg_morrey.core.experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    RatioReport,
    RatioRow,
    build_balls,
    build_family,
    gradient_exponent,
    hoelder_exponent,
    output_kappa,
    run_free_case,
    run_heat_kernel,
    run_hls,
    run_hoelder_boundedness,
    run_inequality_suite,
    run_morrey_boundedness,
    run_norm,
    run_rho,
    run_weak_morrey_boundedness,
    smoothness_exponent,
    sobolev_exponent,
    theta_sweep,
)
from heisenberg_morrey.core.group import GroupParams, unit_ball_volume
from heisenberg_morrey.exceptions import AdmissibilityError, InvalidParameterError

VOL = unit_ball_volume(GroupParams(1))
SMALL = {
    "function_count": 2,
    "ball_count": 4,
    "norm_resolution": 6,
    "operator_resolution": 8,
    "family": "bump",
}


def test_exponents():
    assert sobolev_exponent(2.0, 1.0, 4) == pytest.approx(4.0)
    assert sobolev_exponent(1.0, 1.0, 4) == pytest.approx(4.0 / 3.0)
    with pytest.raises(AdmissibilityError):
        sobolev_exponent(4.0, 1.0, 4)
    with pytest.raises(AdmissibilityError):
        sobolev_exponent(2.0, 4.0, 4)
    assert hoelder_exponent(0.6, 2.0, 4.0, 4) == pytest.approx(0.2)
    assert hoelder_exponent(0.5, 2.0, 4.0, 4) == pytest.approx(0.0)
    assert output_kappa(0.25, 2.0, 4.0) == pytest.approx(0.5)
    assert gradient_exponent(0.5, 3.0, 4) == pytest.approx(1.0 / 3.0)
    assert theta_sweep(0.0) == (0.0,)
    assert theta_sweep(1.5) == (1.5, 3.0, 6.0)


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_defaults_are_admissible(experiment):
    config = ExperimentConfig.from_dict({}, experiment=experiment)
    assert config.experiment == experiment
    assert config.run_name == experiment


@pytest.mark.parametrize(
    "data",
    [
        {"experiment": "thm-morrey", "p": 4.0},
        {"experiment": "thm-morrey", "kappa": 0.5},
        {"experiment": "thm-morrey", "q": 3.0},
        {"experiment": "thm-morrey", "alpha": 4.0},
        {"experiment": "thm-morrey", "potential": "zero"},
        {"experiment": "thm-weak", "p": 2.0},
        {"experiment": "thm-weak", "kappa": 0.75},
        {"experiment": "thm-hoelder", "kappa": 0.4},
        {"experiment": "thm-hoelder", "kappa": 0.6, "beta": 0.5},
        {"experiment": "thm-hoelder", "kappa": 0.6, "delta": 0.1},
        {"experiment": "thm-hoelder", "potential": "zero"},
        {"experiment": "free-case", "potential": "constant"},
        {"experiment": "free-case", "theta": 1.0},
        {"experiment": "rho", "potential": "zero"},
    ],
)
def test_inadmissible_settings(data):
    with pytest.raises(AdmissibilityError):
        ExperimentConfig.from_dict(data)


def test_invalid_settings():
    with pytest.raises(InvalidParameterError):
        ExperimentConfig(experiment="spectral")
    with pytest.raises(InvalidParameterError):
        ExperimentConfig(family=("gaussian",))
    with pytest.raises(InvalidParameterError):
        ExperimentConfig(function_count=0)
    with pytest.raises(InvalidParameterError):
        ExperimentConfig(translation=(1.0, 2.0))


def test_from_dict_parsing():
    config = ExperimentConfig.from_dict(
        {
            "experiment": "thm_morrey",
            "potential": "power",
            "alpha": 1.5,
            "p": 2.0,
            "kappa": 0.1,
            "family": "bump, power",
            "theta_out": "0.5, 1.0",
            "trotter_steps": 8,
            "trotter_half_widths": [4.0, 8.0],
            "subordination_nodes": 64,
            "adaptive": True,
        },
        seed=7,
    )
    assert config.experiment == "thm-morrey"
    assert config.potential.kind == "power" and config.potential.exponent == 1.0
    assert config.family == ("bump", "power")
    assert config.theta_outputs == (0.5, 1.0)
    assert config.trotter.steps == 8 and config.trotter.half_widths == (4.0, 8.0)
    assert config.sub.alpha == 1.5 and config.sub.nodes == 64
    assert config.heat.adaptive
    assert config.seed == 7
    assert config.q_value == pytest.approx(1.0 / (0.5 - 1.5 / 4.0))


def test_overrides_win_and_defaults_fill_in():
    config = ExperimentConfig.from_dict({"experiment": "thm-morrey", "seed": 1}, experiment="thm-weak", seed=3)
    assert config.experiment == "thm-weak"
    assert config.p == 1.0 and config.kappa == 0.5
    assert config.seed == 3


def test_to_dict_is_flat():
    data = ExperimentConfig().to_dict()
    assert data["experiment"] == "thm-morrey"
    assert data["subordination_alpha"] == 1.0
    assert "trotter_steps" in data and "heat_lambda_nodes" in data
    assert all(not isinstance(v, (dict, list)) for v in data.values())


def test_family_counts_and_prefix():
    config = ExperimentConfig.from_dict({**SMALL, "family": "bump, indicator", "function_count": 4})
    base_only, mask1 = build_family(config, 1)
    doubled, mask2 = build_family(config, 2)
    assert len(base_only) == 6 and mask1.all()
    assert len(doubled) == 12 and mask2.sum() == 6
    assert [f.label for f in base_only] == [f.label for f, b in zip(doubled, mask2) if b]
    again, _ = build_family(config, 1)
    assert [f.label for f in again] == [f.label for f in base_only]


def test_ball_family_prefix():
    config = ExperimentConfig.from_dict(SMALL)
    one, _ = build_balls(config, 1)
    two, mask = build_balls(config, 2)
    assert len(two) == 8 and mask.sum() == 4
    for a, b in zip(one, two[:4]):
        assert a.radius == b.radius
        assert np.array_equal(a.center.as_array(), b.center.as_array())


def test_translated_balls_follow_the_family():
    config = ExperimentConfig.from_dict({**SMALL, "translation": [1.0, 0.0, 2.0]})
    functions, _ = build_family(config, 1)
    assert functions[0](np.array([1.0, 0.0, 2.0])) == pytest.approx(1.0)
    balls, _ = build_balls(config, 1)
    assert len(balls) == 4


def test_ratio_report_logic():
    rows = [RatioRow("f", 1.0, 2.0, 2.0)]
    report = RatioReport("x", rows, 2.0, 0.05, sweep={0.0: (5.0, 0.5), 1.0: (2.0, 0.05), 2.0: (1.0, 0.0)})
    assert report.stable
    assert report.smallest_stable_theta == 1.0
    assert report.summary()["functions"] == 1
    assert not RatioReport("x", rows, np.inf, None).stable
    assert RatioReport("x", rows, 1.0, None).smallest_stable_theta is None


def test_rho_table_constant_potential():
    config = ExperimentConfig.from_dict({"experiment": "rho", "potential_value": 2.0, "rho_points": 5})
    rows = run_rho(config)
    assert len(rows) == 5
    assert np.array_equal(rows[0].point, np.zeros(3))
    for row in rows:
        assert row.rho == pytest.approx(row.closed_form, rel=1e-7)
    assert rows[0].closed_form == pytest.approx(1.0 / np.sqrt(2.0 * VOL))


def test_lebesgue_norm_table():
    config = ExperimentConfig.from_dict(
        {**SMALL, "experiment": "norm", "space": "lebesgue", "family": "indicator", "kappa": 0.0}
    )
    (label, report), = run_norm(config)
    assert report.value == pytest.approx(np.sqrt(VOL * 0.25**4), rel=1e-9)


def test_heat_kernel_table():
    config = ExperimentConfig.from_dict(
        {"experiment": "heat-kernel", "heat_times": [2.0], "heat_grid": 5, "volume_samples": 2000}
    )
    table = run_heat_kernel(config)
    assert table.values.shape == (1, 5, 9)
    assert table.origin_error < 1e-8
    assert table.axis_error < 1e-6
    assert table.mass == pytest.approx(1.0, rel=1e-4)
    assert table.volumes["closed_form"] == pytest.approx(VOL)
    assert table.volumes["displayed_ratio"] == pytest.approx(2.0)


def test_inequality_suite_constant_potential():
    config = ExperimentConfig.from_dict({**SMALL, "experiment": "inequalities", "inequality_samples": 100})
    report = run_inequality_suite(config)
    names = [c.name for c in report.checks]
    assert names == ["2rx", "annulus", "com2", "weak<=strong", "theta-monotone"]
    assert report.passed
    assert report.comparability.C0 == pytest.approx(1.0)


def test_inequality_suite_free_case_skips_comparability():
    config = ExperimentConfig.from_dict(
        {**SMALL, "experiment": "inequalities", "potential": "zero", "inequality_samples": 50}
    )
    report = run_inequality_suite(config)
    assert "com2" not in [c.name for c in report.checks]
    assert report.comparability is None
    assert report.passed


@pytest.mark.slow
def test_morrey_sweep_runs():
    config = ExperimentConfig.from_dict({**SMALL, "experiment": "thm-morrey", "theta": 1.0})
    report = run_morrey_boundedness(config)
    assert np.isfinite(report.max_ratio) and report.max_ratio > 0
    assert sorted(report.sweep) == [1.0, 2.0, 4.0]
    assert len(report.rows) == 2 * 3
    assert report.stability is not None


@pytest.mark.slow
def test_hls_free_case_is_dilation_invariant():
    config = ExperimentConfig.from_dict({**SMALL, "experiment": "hls", "doubling": False})
    report = run_hls(config)
    assert np.isfinite(report.max_ratio) and report.max_ratio > 0
    assert report.stability is None
    assert report.scale_invariance < 0.1


@pytest.mark.slow
def test_weak_morrey_sweep_runs():
    config = ExperimentConfig.from_dict({**SMALL, "experiment": "thm-weak"})
    report = run_weak_morrey_boundedness(config)
    assert np.isfinite(report.max_ratio) and report.max_ratio > 0
    assert report.rows


def test_hoelder_run_rejects_rough_kernel(monkeypatch):
    monkeypatch.setattr(experiments, "smoothness_exponent", lambda config: 0.1)
    config = ExperimentConfig.from_dict({**SMALL, "experiment": "thm-hoelder"})
    assert config.beta_value > 0.1
    with pytest.raises(AdmissibilityError):
        run_hoelder_boundedness(config)


def test_constant_potential_kernel_is_lipschitz():
    config = ExperimentConfig.from_dict({"experiment": "thm-hoelder"})
    assert 0.8 < smoothness_exponent(config) <= 1.0


@pytest.mark.slow
def test_hoelder_sweep_records_beta():
    config = ExperimentConfig.from_dict({**SMALL, "experiment": "thm-hoelder"})
    report = run_hoelder_boundedness(config)
    assert report.notes["beta"] == pytest.approx(max(config.beta_value, 0.0))
    assert report.notes["beta"] < report.notes["delta_fit"] <= 1.0
    assert np.isfinite(report.max_ratio) and report.max_ratio > 0


@pytest.mark.slow
def test_free_case_runs_every_bound():
    config = ExperimentConfig.from_dict({**SMALL, "experiment": "free-case", "doubling": False})
    reports = run_free_case(config)
    assert sorted(reports) == ["hoelder", "morrey", "morrey-lemma", "weak-morrey"]
    for report in reports.values():
        assert report.rows
        assert np.isfinite(report.max_ratio)
