"""End-to-end pipeline and the evaluation protocols on small simulated cohorts."""
import numpy as np
import pandas as pd
import pytest

from conftest import gaussian_classes

from app.exceptions import InvalidRangeError
from app.models import BodyProfile, NoisePreset
from app.schemas.simulation import ChannelScenario, PathComponent
from app.services.classifier import build_identifier
from app.services.harness import (
    bench_pipeline,
    build_feature_table,
    evaluate_drift,
    evaluate_rejection,
    evaluate_sampling_time,
    evaluate_svr,
    evaluate_transfer,
    evaluate_volume_sweep,
    run_pipeline,
    subject_profiles,
    write_report,
)
from app.services.simulator import default_scenario, generate_cohort, synthesize_series


def test_flat_channel_gives_equal_subcarrier_means(pipeline_config):
    scenario = ChannelScenario(los=PathComponent(magnitude=0.8, delay=0.0))
    vector = run_pipeline(synthesize_series(scenario, None, 1.0, 500.0), pipeline_config)
    assert np.ptp(vector.means) < 1e-6


def test_truncated_recording_keeps_subcarrier_means(pipeline_config):
    scenario = default_scenario(NoisePreset.CLEAN).model_copy(update={"breathing_amp": 0.0})
    series = synthesize_series(scenario, BodyProfile(0.2, 0.4, 1.0), 5.0, 500.0)
    full = run_pipeline(series, pipeline_config)
    short = run_pipeline(series, pipeline_config.model_copy(update={"window": 1.0}))
    assert np.allclose(short.means, full.means, rtol=0.01)


def test_distinct_subjects_give_distinct_features(pipeline_config):
    scenario = default_scenario(NoisePreset.CLEAN)
    a = run_pipeline(synthesize_series(scenario, BodyProfile(0.1, 0.3, 0.9), 1.0, 500.0), pipeline_config)
    b = run_pipeline(synthesize_series(scenario, BodyProfile(0.4, 0.5, 1.1), 1.0, 500.0), pipeline_config)
    assert np.max(np.abs(a.values - b.values)) > 10 * np.finfo(float).eps


def test_window_shorter_than_a_frame(clean_pair, pipeline_config):
    with pytest.raises(InvalidRangeError):
        run_pipeline(clean_pair.records[0].series, pipeline_config.model_copy(update={"window": 0.001}))


@pytest.fixture(scope="module")
def pair_table(clean_pair, pipeline_config):
    return build_feature_table(clean_pair.records, pipeline_config, windows=(0.2, 1.0))


def test_feature_table(pair_table):
    assert len(pair_table) == 12
    assert pair_table.features.shape == (12, 39)
    assert pair_table.window_frames == {0.2: 100, 1.0: 500}
    # a window covering the whole recording reuses the full features
    assert np.array_equal(pair_table.windows[1.0], pair_table.features)


def test_two_distinct_subjects_are_always_identified(pair_table, pipeline_config):
    report = evaluate_volume_sweep(pair_table, [2], n_draws=3, cfg=pipeline_config, seed=1, n_train=4, n_test=2)
    row = report.rows[0]
    assert row["mean"] == 1.0
    assert row["q1"] <= row["q2"] <= row["q3"]
    assert len(report.instances) == 3 * 2 * 2
    assert all(entry["correct"] == 1 for entry in report.instances)


def test_full_volume_draws_are_identical(small_cohort, pipeline_config):
    ds, _ = small_cohort
    report = evaluate_volume_sweep(ds, [4], n_draws=3, cfg=pipeline_config, seed=2, n_train=4, n_test=2)
    row = report.rows[0]
    assert row["min"] == row["max"] == row["mean"]


def test_volume_beyond_cohort(pair_table):
    with pytest.raises(InvalidRangeError):
        evaluate_volume_sweep(pair_table, [3], n_draws=1, n_train=4, n_test=2)
    with pytest.raises(InvalidRangeError):
        evaluate_volume_sweep(pair_table, [1], n_draws=1, n_train=4, n_test=2)


@pytest.fixture(scope="module")
def cohort_table(small_cohort, pipeline_config):
    ds, _ = small_cohort
    return build_feature_table(ds.records, pipeline_config)


def test_rejection_rows_are_balanced(cohort_table, pipeline_config):
    report = evaluate_rejection(cohort_table, [2, 3], n_draws=2, cfg=pipeline_config, seed=0, n_train=4, n_test=2)
    for row in report.rows:
        assert row["mean_ba"] == 0.5 * row["tpr"] + 0.5 * row["tnr"]
        assert 0.0 <= row["tpr"] <= 1.0 and 0.0 <= row["tnr"] <= 1.0
        assert row["q1"] <= row["q2"] <= row["q3"]


def test_forced_thresholds(cohort_table, pipeline_config):
    strict = evaluate_rejection(
        cohort_table, [2], n_draws=2, cfg=pipeline_config, n_train=4, n_test=2, threshold_override=1.0 + 1e-9
    ).rows[0]
    assert (strict["tpr"], strict["tnr"], strict["mean_ba"]) == (0.0, 1.0, 0.5)

    lenient = evaluate_rejection(
        cohort_table, [2], n_draws=2, cfg=pipeline_config, n_train=4, n_test=2, threshold_override=0.0
    ).rows[0]
    assert lenient["tnr"] == 0.0


def test_protocols_need_train_and_test_sessions(cohort_table, small_cohort):
    with pytest.raises(InvalidRangeError):
        evaluate_volume_sweep(cohort_table, [2], n_draws=1, n_train=4, n_test=0)
    with pytest.raises(InvalidRangeError):
        evaluate_rejection(cohort_table, [2], n_draws=1, n_train=4, n_test=0)
    with pytest.raises(InvalidRangeError):
        evaluate_sampling_time(cohort_table, [1.0], k=2, n_train=0, n_test=2)
    with pytest.raises(InvalidRangeError):
        evaluate_svr(cohort_table, small_cohort[1], n_train=0, n_test=2)


def test_accuracy_recounts_from_instance_log(cohort_table, pipeline_config):
    report = evaluate_volume_sweep(cohort_table, [2, 3], n_draws=4, cfg=pipeline_config, seed=6, n_train=4, n_test=2)
    log = pd.DataFrame(report.instances)
    for row in report.rows:
        per_draw = log[log["k"] == row["k"]].groupby("draw")["correct"].mean()
        assert len(per_draw) == 4
        assert per_draw.mean() == pytest.approx(row["mean"], abs=1e-12)
        assert per_draw.min() == pytest.approx(row["min"], abs=1e-12)


def test_rejection_needs_attackers(cohort_table):
    with pytest.raises(InvalidRangeError):
        evaluate_rejection(cohort_table, [4], n_draws=1, n_train=4, n_test=2)


def test_full_window_matches_volume_sweep(pair_table, pipeline_config):
    window = evaluate_sampling_time(
        pair_table, [1.0], pipeline_config, seed=4, k=2, n_draws=2, n_train=4, n_test=2
    ).rows[0]
    volume = evaluate_volume_sweep(pair_table, [2], 2, pipeline_config, seed=4, n_train=4, n_test=2).rows[0]
    assert window["mean"] == volume["mean"]
    assert window["n_frames"] == 500


def test_window_must_hold_a_frame(pair_table):
    with pytest.raises(InvalidRangeError):
        evaluate_sampling_time(pair_table, [0.001], k=2, n_train=4, n_test=2)


def test_drift_strategies(pair_table, pipeline_config):
    first_day = evaluate_drift(pair_table, 2, "first-day", pipeline_config)
    assert [(r["train_days"], r["test_day"]) for r in first_day.rows] == [(1, 2), (1, 3)]
    assert all(r["n_test"] == 4 for r in first_day.rows)

    cumulative = evaluate_drift(pair_table, 2, "cumulative", pipeline_config)
    assert [r["train_days"] for r in cumulative.rows] == [1, 2]
    assert [r["n_test"] for r in cumulative.rows] == [8, 4]

    with pytest.raises(InvalidRangeError):
        evaluate_drift(pair_table, 6, "cumulative", pipeline_config)


def test_transfer_between_recordings_of_the_same_people(clean_pair, pipeline_config):
    report = evaluate_transfer(clean_pair, clean_pair.subset([1, 2]), pipeline_config)
    assert report.rows[0]["accuracy"] == 1.0
    assert len(report.instances) == 12


@pytest.mark.slow
def test_svr_tracks_fat_and_muscle_rates(pipeline_config):
    ds, profiles = generate_cohort(20, 6, duration=1.0, preset=NoisePreset.CLEAN, seed=11, separation=0.05)
    report = evaluate_svr(ds, profiles, pipeline_config, seed=0, n_train=4, n_test=2)
    rows = {r["target"]: r for r in report.rows}
    for target in ("fat_rate", "muscle_rate"):
        assert rows[target]["correlation"] >= 0.9
        assert rows[target]["rmse"] < 0.1


def test_subject_profiles(clean_pair):
    frame = subject_profiles(clean_pair)
    assert list(frame["subject"]) == [1, 2]
    assert frame.shape == (2, 31)
    assert (frame.drop(columns="subject").to_numpy() > 0).all()


def test_bench_reports_every_stage(pair_table, clean_pair, pipeline_config):
    model = build_identifier(pair_table.features, pair_table.subjects)
    report = bench_pipeline(
        clean_pair.records[0].series, model, pipeline_config.model_copy(update={"window": 0.2}), n_reps=3
    )
    assert set(report.stages) == {"preprocess", "features", "identify"}
    assert report.n_frames == 100
    assert report.n_classes == 2
    assert report.compute_total_ms > 0


def test_thirty_class_window_meets_compute_budget(clean_pair, pipeline_config):
    X, y = gaussian_classes(30, 4, seed=21)
    model = build_identifier(X, y)
    report = bench_pipeline(
        clean_pair.records[0].series, model, pipeline_config.model_copy(update={"window": 0.2}), n_reps=21
    )
    assert report.n_classes == 30 and report.n_frames == 100
    assert report.compute_total_ms <= 100.0


def test_reports_are_reproducible(pair_table, pipeline_config, tmp_path):
    for run in ("a", "b"):
        report = evaluate_volume_sweep(pair_table, [2], n_draws=2, cfg=pipeline_config, seed=5, n_train=4, n_test=2)
        write_report(report, tmp_path / run, "volume", elapsed=0.1)
    for name in ("volume.csv", "volume.json", "volume_instances.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "volume_timing.json").exists()


# --- thirty people, thirty 5 s sessions each, lab noise ----------------------------------------

@pytest.fixture(scope="module")
def lab_table(pipeline_config):
    ds, _ = generate_cohort(30, 30, duration=5.0, preset=NoisePreset.LAB, seed=0, n_jobs=4)
    return build_feature_table(ds.records, pipeline_config, windows=(0.2, 5.0), n_jobs=4)


@pytest.mark.slow
def test_lab_accuracy_falls_gently_with_user_volume(lab_table, pipeline_config):
    report = evaluate_volume_sweep(lab_table, [2, 5, 10, 20, 30], n_draws=100, cfg=pipeline_config, seed=0, n_jobs=4)
    means = [row["mean"] for row in report.rows]
    assert means[0] >= 0.99
    assert means[-1] >= 0.92
    rises = [b - a for a, b in zip(means, means[1:]) if b > a]
    assert len(rises) <= 1 and all(rise <= 0.005 for rise in rises)


@pytest.mark.slow
def test_lab_intruders_are_rejected(lab_table, pipeline_config):
    report = evaluate_rejection(lab_table, [2, 10, 20, 29], n_draws=100, cfg=pipeline_config, seed=0, n_jobs=4)
    ba = {row["k"]: row["mean_ba"] for row in report.rows}
    assert min(ba.values()) >= 0.85
    assert ba[29] >= ba[2]


@pytest.mark.slow
def test_lab_short_windows_keep_accuracy(lab_table, pipeline_config):
    # every draw at k=30 picks the whole cohort, so one draw is the full answer
    report = evaluate_sampling_time(lab_table, [0.2, 5.0], pipeline_config, seed=0, k=30, n_draws=1, n_jobs=4)
    short, full = (row["mean"] for row in report.rows)
    assert full - short <= 0.03
