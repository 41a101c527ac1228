import numpy as np
import pytest

from mixedsde.experiments import (
    ConfigError,
    ExperimentSpec,
    fit_rate,
    run_covcheck,
    run_equivalence,
    run_rate,
    run_wongzakai,
)


# ---------------------------------------------------------------------------
# slope fitting


def test_fit_rate_exact_power_laws():
    levels = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    slope, stderr = fit_rate(levels, levels)
    assert slope == 1.0
    assert stderr == pytest.approx(0.0, abs=1e-14)
    slope, stderr = fit_rate(levels, np.sqrt(levels))
    assert slope == pytest.approx(0.5, abs=1e-12)


def test_fit_rate_noisy_power_law():
    rng = np.random.default_rng(0)
    levels = 2.0 ** np.arange(8)
    errors = 3.0 * levels**0.2 * (1.0 + rng.uniform(-0.05, 0.05, size=8))
    slope, stderr = fit_rate(levels, errors)
    assert 0.1 <= slope <= 0.3


def test_fit_rate_contract_errors():
    with pytest.raises(ValueError):
        fit_rate([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        fit_rate([1.0, 2.0, -3.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        fit_rate([1.0, 2.0, 3.0], [1.0, 0.0, 3.0])
    with pytest.raises(ValueError):
        fit_rate([1.0, 2.0, 3.0], [1.0, 2.0])


# ---------------------------------------------------------------------------
# spec validation


def test_spec_rejects_bad_kind_and_ranges():
    with pytest.raises(ConfigError):
        ExperimentSpec(kind="nope").validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(kind="covcheck", M=0).validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(kind="covcheck", H=0.5).validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(kind="covcheck", N=30).validate()  # not divisible by 4


def test_spec_rejects_bad_step_ladders():
    with pytest.raises(ConfigError):
        ExperimentSpec(kind="rate", model="trig", steps=(0.25, 0.5, 0.125)).validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(kind="rate", model="trig", steps=(0.3, 0.2)).validate()  # T/d not int
    with pytest.raises(ConfigError):
        ExperimentSpec(kind="rate", model="trig", steps=(0.25,)).validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(kind="rate", model="trig", steps=(1 / 6, 1 / 8), refine=4).validate()


def test_spec_rejects_bad_smoothing_setup():
    with pytest.raises(ConfigError):
        ExperimentSpec(
            kind="wongzakai", steps=(8, 16), gamma=0.8, gamma_prime=0.6, H=0.9
        ).validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(
            kind="wongzakai", steps=(16, 8), gamma=0.5, gamma_prime=0.6, H=0.9
        ).validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(
            kind="wongzakai", steps=(7, 14), gamma=0.5, gamma_prime=0.6, H=0.9, N=64
        ).validate()  # 1/7 not aligned with N=64


def test_rate_requires_hypothesis_tags():
    spec = ExperimentSpec(
        kind="rate", model="linear-scalar", formulation="rough",
        steps=(0.25, 0.125), M=2, refine=4,
    )
    with pytest.raises(ConfigError):
        run_rate(spec)
    spec = ExperimentSpec(
        kind="equivalence", model="linear-scalar", steps=(0.25, 0.125), M=2, refine=4
    )
    with pytest.raises(ConfigError):
        run_equivalence(spec)


# ---------------------------------------------------------------------------
# runners (small smoke configurations)


def test_rate_deterministic_model_has_euler_order():
    # harness self-test: no noise terms, so the scheme is forward Euler and
    # the error against the refined reference decays at first order
    spec = ExperimentSpec(
        kind="rate",
        model="decay",
        formulation="mixed",
        steps=(2.0**-2, 2.0**-3, 2.0**-4, 2.0**-5, 2.0**-6),
        M=3,
        refine=16,
        seed=1,
    )
    report = run_rate(spec)
    series = report.series[0]
    assert series.slope == pytest.approx(1.0, abs=0.1)
    assert report.passed  # no slope gate for mixed runs
    levels = series.levels()
    assert levels == sorted(levels)


def test_rate_report_is_reproducible_and_echoes_spec():
    spec = ExperimentSpec(
        kind="rate", model="trig", formulation="rough", H=0.75,
        steps=(2.0**-3, 2.0**-4, 2.0**-5), M=8, refine=8, seed=5, slope_tol=2.0,
    )
    first = run_rate(spec)
    second = run_rate(spec)
    assert first.spec == spec.echo()
    assert first.spec["M"] == 8
    for s1, s2 in zip(first.series, second.series):
        assert [r.as_dict() for r in s1.records] == [r.as_dict() for r in s2.records]
        assert s1.slope == s2.slope
    shifted = run_rate(
        ExperimentSpec(
            kind="rate", model="trig", formulation="rough", H=0.75,
            steps=(2.0**-3, 2.0**-4, 2.0**-5), M=8, refine=8, seed=6, slope_tol=2.0,
        )
    )
    assert shifted.series[0].records[0].rms != first.series[0].records[0].rms


def test_wongzakai_smoke_runs_and_reproduces():
    spec = ExperimentSpec(
        kind="wongzakai", H=0.8, gamma=0.55, gamma_prime=0.75,
        N=256, steps=(4, 8, 16), M=4, seed=2,
    )
    first = run_wongzakai(spec)
    names = [s.name for s in first.series]
    assert names == ["holder-seminorm", "levy-area"]
    holder = first.get_series("holder-seminorm")
    assert holder.median_path_slope is not None
    assert all(r.rms > 0 for r in holder.records)
    second = run_wongzakai(spec)
    assert [r.as_dict() for r in second.series[0].records] == [
        r.as_dict() for r in first.series[0].records
    ]


def test_equivalence_smoke_structure():
    spec = ExperimentSpec(
        kind="equivalence", model="trig", H=0.75,
        steps=(2.0**-3, 2.0**-4, 2.0**-5), M=6, refine=8, seed=3,
    )
    report = run_equivalence(spec)
    names = [s.name for s in report.series]
    assert names == [
        "scheme-pair",
        "natural-vs-reference",
        "skewed-vs-reference",
        "skewed-own-error",
    ]
    pair = report.get_series("scheme-pair")
    assert pair.records[0].level < pair.records[-1].level
    assert any("differentiable" in note for note in report.notes)


def test_covcheck_passes_and_control_fails():
    spec = ExperimentSpec(kind="covcheck", H=0.75, M=4000, N=512, seed=4)
    report = run_covcheck(spec)
    assert report.passed
    assert all(abs(r.zscore) <= 4.0 for r in report.records)
    assert max(abs(r.control_zscore) for r in report.records) > 4.0
    again = run_covcheck(spec)
    assert [r.as_dict() for r in again.records] == [r.as_dict() for r in report.records]


def test_covcheck_near_half_boundary():
    spec = ExperimentSpec(kind="covcheck", H=0.51, M=4000, N=512, seed=5)
    report = run_covcheck(spec)
    assert report.passed


def test_report_files_round_trip(tmp_path):
    import csv
    import json

    spec = ExperimentSpec(kind="covcheck", H=0.75, M=500, N=128, seed=6)
    report = run_covcheck(spec)
    json_path, csv_path = report.write(tmp_path)
    payload = json.loads(json_path.read_text())
    assert payload["kind"] == "covcheck"
    assert payload["spec"]["seed"] == 6
    assert payload["version"]
    with csv_path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:2] == ["s", "t"]
    assert len(rows) == 1 + len(report.records)
