"""Evaluation engine: pipeline runs, protocol sweeps, timing and report files."""
import logging
import platform
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy

from app.exceptions import InvalidInputError, InvalidRangeError
from app.models import N_SUBCARRIERS, AmplitudeMatrix, BodyProfile, CsiSeries, Dataset, DatasetRecord, FeatureVector, IdentifierModel
from app.schemas.pipeline import PipelineConfig
from app.schemas.report import (
    AccuracyRow,
    BenchReport,
    DriftRow,
    EvaluationReport,
    RegressionRow,
    RejectionRow,
    StageTiming,
)
from app.services.classifier import (
    build_identifier,
    identify,
    identify_many,
    predict_many,
    predict_svr,
    scores,
    train_one_vs_all,
    train_svr,
)
from app.services.csi_io import amplitude, split_indices
from app.services.dsp import apply_lowpass, design_butterworth_lowpass, mitigate_series
from app.services.features import extract_features, fit_normalizer, normalize_matrix
from app.services.simulator import frame_count

logger = logging.getLogger(__name__)

DEFAULT_WINDOWS = (0.05, 0.1, 0.2, 1.0, 5.0)


# --- pipeline -------------------------------------------------------------------------------

def preprocess(series: CsiSeries, cfg: PipelineConfig) -> AmplitudeMatrix:
    """amplitude -> low-pass -> multipath mitigation."""
    cfg = cfg.with_sample_rate(series.sample_rate)
    coeffs = design_butterworth_lowpass(cfg.filter)
    filtered = apply_lowpass(amplitude(series), coeffs, zero_phase=cfg.zero_phase)
    return mitigate_series(filtered, cfg.mitigation)


def window_frames(window: float, sample_rate: float) -> int:
    n_frames = frame_count(window, sample_rate)
    if n_frames < 1:
        raise InvalidRangeError(f"window {window} s is shorter than one frame at {sample_rate} Hz")
    return n_frames


def run_pipeline(series: CsiSeries, cfg: PipelineConfig = PipelineConfig()) -> FeatureVector:
    """Features of one recording, optionally restricted to the first `cfg.window` seconds."""
    if len(series) == 0:
        raise InvalidInputError("cannot run the pipeline on an empty series")
    if cfg.window is not None:
        series = series.head(window_frames(cfg.window, series.sample_rate))
    return extract_features(preprocess(series, cfg))


# --- feature tables -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Features of every recording of a dataset, computed once and shared by the protocols."""
    subjects: np.ndarray
    sessions: np.ndarray
    features: np.ndarray
    sample_rate: float
    windows: Dict[float, np.ndarray] = field(default_factory=dict)
    window_frames: Dict[float, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.subjects)

    @property
    def subject_ids(self) -> List[int]:
        return sorted(set(self.subjects.tolist()))

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    def source(self, window: Optional[float]) -> np.ndarray:
        return self.features if window is None else self.windows[window]


def _record_features(record: DatasetRecord, cfg: PipelineConfig, windows: Sequence[float]) -> Tuple[np.ndarray, List[np.ndarray], List[int]]:
    cfg = cfg.model_copy(update={"window": None})
    full = run_pipeline(record.series, cfg).values
    windowed, counts = [], []
    for w in windows:
        n_frames = min(window_frames(w, record.series.sample_rate), len(record.series))
        counts.append(n_frames)
        windowed.append(full if n_frames == len(record.series) else run_pipeline(record.series.head(n_frames), cfg).values)
    return full, windowed, counts


def build_feature_table(
    records: Iterable[DatasetRecord],
    cfg: PipelineConfig = PipelineConfig(),
    windows: Sequence[float] = (),
    n_jobs: int = 1,
) -> FeatureTable:
    """Run the pipeline over every record (full recording plus each sampling window)."""
    windows = tuple(windows)
    subjects, sessions, full, windowed, counts = [], [], [], [], []
    sample_rate = None

    def work(record: DatasetRecord):
        return record.subject_id, record.session_index, record.series.sample_rate, _record_features(record, cfg, windows)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(work, records))
    else:
        results = (work(record) for record in records)
    for subject, session, fs, (vector, per_window, n_frames) in results:
        if sample_rate is None:
            sample_rate = fs
        elif fs != sample_rate:
            raise InvalidInputError(f"mixed sample rates {sample_rate} and {fs} Hz in one dataset")
        subjects.append(subject)
        sessions.append(session)
        full.append(vector)
        windowed.append(per_window)
        counts.append(n_frames)
    if not subjects:
        raise InvalidInputError("dataset holds no recordings")
    window_arrays = {w: np.array([row[i] for row in windowed]) for i, w in enumerate(windows)}
    frames = {w: int(min(row[i] for row in counts)) for i, w in enumerate(windows)}
    for w in windows:
        if frames[w] < window_frames(w, sample_rate):
            logger.warning(f"Window {w} s exceeds some recordings; those use all {frames[w]} frames")
    logger.info(f"Extracted features of {len(subjects)} recordings ({len(windows)} extra windows)")
    return FeatureTable(np.array(subjects), np.array(sessions), np.array(full), float(sample_rate), window_arrays, frames)


def _as_table(data: Union[Dataset, FeatureTable], cfg: PipelineConfig, windows: Sequence[float] = (), n_jobs: int = 1) -> FeatureTable:
    if isinstance(data, FeatureTable):
        missing = [w for w in windows if w not in data.windows]
        if missing:
            raise InvalidInputError(f"feature table lacks windows {missing}")
        return data
    return build_feature_table(data.records, cfg, windows, n_jobs)


# --- shared draw machinery ------------------------------------------------------------------

def _draw_rng(seed: int, k: int, draw: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, k, draw]))


def _choose_subjects(table: FeatureTable, seed: int, k: int, draw: int) -> List[int]:
    chosen = _draw_rng(seed, k, draw).choice(table.subject_ids, size=k, replace=False)
    return sorted(int(s) for s in chosen)


def _rows_of(table: FeatureTable, rows: Sequence[int], subjects: Sequence[int]) -> np.ndarray:
    rows = np.asarray(rows, dtype=int)
    return rows[np.isin(table.subjects[rows], subjects)]


def _local_labels(table: FeatureTable, rows: np.ndarray, subjects: Sequence[int]) -> np.ndarray:
    lookup = {s: i for i, s in enumerate(subjects, start=1)}
    return np.array([lookup[int(s)] for s in table.subjects[rows]])


def _run_draws(task: Callable[[int], Tuple], n_draws: int, n_jobs: int) -> List[Tuple]:
    # results are collected in draw order whatever the scheduling
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(task, range(n_draws)))
    return [task(d) for d in range(n_draws)]


def _accuracy_row(k: int, accuracies: Sequence[float], window: Optional[float] = None, n_frames: Optional[int] = None) -> Dict:
    acc = np.asarray(accuracies)
    q1, q2, q3 = np.quantile(acc, [0.25, 0.5, 0.75])
    return AccuracyRow(
        k=k, window=window, n_frames=n_frames, mean=float(acc.mean()),
        q1=float(q1), q2=float(q2), q3=float(q3), min=float(acc.min()), max=float(acc.max()),
        n_draws=len(acc),
    ).model_dump(exclude_none=True)


def _train_classifiers(X: np.ndarray, y: np.ndarray, cfg: PipelineConfig):
    normalizer = fit_normalizer(X)
    models = train_one_vs_all(normalize_matrix(X, normalizer), y, cfg.train)
    return normalizer, models


def _check_k_range(k_range: Sequence[int], n_subjects: int, upper: int) -> List[int]:
    ks = [int(k) for k in k_range]
    if not ks:
        raise InvalidRangeError("empty k range")
    bad = [k for k in ks if not 2 <= k <= upper]
    if bad:
        raise InvalidRangeError(f"k values {bad} outside [2, {upper}] for {n_subjects} subjects")
    return ks


def _check_split(n_train: int, n_test: int) -> None:
    if n_train < 1 or n_test < 1:
        raise InvalidRangeError(
            f"split needs at least one training and one test session per subject, got {n_train}/{n_test}"
        )


def _metadata(cfg: PipelineConfig, **extra) -> Dict:
    return {"config": cfg.model_dump(mode="json"), **extra}


# --- protocols ------------------------------------------------------------------------------

def evaluate_volume_sweep(
    data: Union[Dataset, FeatureTable],
    k_range: Sequence[int],
    n_draws: int = 100,
    cfg: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    n_train: int = 20,
    n_test: int = 10,
    n_jobs: int = 1,
) -> EvaluationReport:
    """Identification accuracy versus user volume k over random subject subsets.

    Args:
        data: Dataset or a precomputed FeatureTable
        k_range: User volumes to evaluate, each in [2, N]
        n_draws: Random subject subsets per k
        cfg: Pipeline configuration (filter, mitigation, trainer)
        seed: Seeds both the session split and the subset draws
        n_train: Training sessions per subject
        n_test: Test sessions per subject
        n_jobs: Worker threads for feature extraction and draws

    Returns:
        EvaluationReport with one accuracy row per k and a per-instance log
    """
    _check_split(n_train, n_test)
    table = _as_table(data, cfg, n_jobs=n_jobs)
    ks = _check_k_range(k_range, table.n_subjects, table.n_subjects)
    train_rows, test_rows = split_indices(table.subjects, n_train, n_test, seed)
    rows, instances = [], []
    for k in ks:
        def task(draw: int, k=k):
            chosen = _choose_subjects(table, seed, k, draw)
            return (chosen, *_draw_accuracy(table, chosen, train_rows, test_rows, cfg, None))

        results = _run_draws(task, n_draws, n_jobs)
        for draw, (chosen, accuracy, log) in enumerate(results):
            instances.extend({"k": k, "draw": draw, **entry} for entry in log)
        rows.append(_accuracy_row(k, [r[1] for r in results]))
        logger.info(f"Volume k={k}: mean accuracy {rows[-1]['mean']:.4f} over {n_draws} draws")
    return EvaluationReport(
        kind="volume", seed=seed, rows=rows, instances=instances,
        metadata=_metadata(cfg, k_range=ks, n_draws=n_draws, n_train=n_train, n_test=n_test),
    )


def _draw_accuracy(
    table: FeatureTable,
    chosen: Sequence[int],
    train_rows: Sequence[int],
    test_rows: Sequence[int],
    cfg: PipelineConfig,
    window: Optional[float],
) -> Tuple[float, List[Dict]]:
    tr = _rows_of(table, train_rows, chosen)
    te = _rows_of(table, test_rows, chosen)
    normalizer, models = _train_classifiers(table.features[tr], _local_labels(table, tr, chosen), cfg)
    truth = _local_labels(table, te, chosen)
    predicted = predict_many(scores(models, normalize_matrix(table.source(window)[te], normalizer)))
    log = [
        {
            "subject": int(table.subjects[row]),
            "session": int(table.sessions[row]),
            "true": int(t),
            "predicted": int(p),
            "predicted_subject": int(chosen[p - 1]),
            "correct": int(t == p),
        }
        for row, t, p in zip(te, truth, predicted)
    ]
    return float(np.mean(predicted == truth)), log


def evaluate_rejection(
    data: Union[Dataset, FeatureTable],
    k_range: Sequence[int],
    n_draws: int = 100,
    cfg: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    n_train: int = 20,
    n_test: int = 10,
    n_jobs: int = 1,
    threshold_override: Optional[float] = None,
) -> EvaluationReport:
    """Balanced accuracy of accepting the k legal users and rejecting the other N - k.

    Args:
        data: Dataset or a precomputed FeatureTable
        k_range: Legal user counts, each in [2, N - 1]
        n_draws: Random legal subsets per k
        cfg: Pipeline configuration; `rejection_percentile` sets the learned threshold
        seed: Seeds both the session split and the subset draws
        n_train: Training sessions per subject
        n_test: Test sessions per subject, legal and intruder alike
        n_jobs: Worker threads
        threshold_override: Fixed threshold in place of the learned one

    Returns:
        EvaluationReport with TPR, TNR and BA = 0.5 TPR + 0.5 TNR per k
    """
    _check_split(n_train, n_test)
    table = _as_table(data, cfg, n_jobs=n_jobs)
    ks = _check_k_range(k_range, table.n_subjects, table.n_subjects - 1)
    train_rows, test_rows = split_indices(table.subjects, n_train, n_test, seed)
    rows, instances = [], []
    for k in ks:
        def task(draw: int, k=k):
            chosen = _choose_subjects(table, seed, k, draw)
            return _draw_rejection(table, chosen, train_rows, test_rows, cfg, threshold_override)

        results = _run_draws(task, n_draws, n_jobs)
        tpr = np.array([r[0] for r in results])
        tnr = np.array([r[1] for r in results])
        ba = 0.5 * tpr + 0.5 * tnr
        for draw, result in enumerate(results):
            instances.extend({"k": k, "draw": draw, **entry} for entry in result[3])
        q1, q2, q3 = np.quantile(ba, [0.25, 0.5, 0.75])
        mean_tpr, mean_tnr = float(tpr.mean()), float(tnr.mean())
        rows.append(RejectionRow(
            k=k, mean_ba=0.5 * mean_tpr + 0.5 * mean_tnr, tpr=mean_tpr, tnr=mean_tnr,
            q1=float(q1), q2=float(q2), q3=float(q3),
            mean_threshold=float(np.mean([r[2] for r in results])), n_draws=n_draws,
        ).model_dump())
        logger.info(f"Rejection k={k}: BA {rows[-1]['mean_ba']:.4f} (TPR {mean_tpr:.4f}, TNR {mean_tnr:.4f})")
    return EvaluationReport(
        kind="rejection", seed=seed, rows=rows, instances=instances,
        metadata=_metadata(cfg, k_range=ks, n_draws=n_draws, n_train=n_train, n_test=n_test,
                           threshold_override=threshold_override),
    )


def _draw_rejection(
    table: FeatureTable,
    chosen: Sequence[int],
    train_rows: Sequence[int],
    test_rows: Sequence[int],
    cfg: PipelineConfig,
    threshold_override: Optional[float],
) -> Tuple[float, float, float, List[Dict]]:
    tr = _rows_of(table, train_rows, chosen)
    model = build_identifier(
        table.features[tr], _local_labels(table, tr, chosen), cfg.train, cfg.rejection_percentile
    )
    if threshold_override is not None:
        model = IdentifierModel(model.models, model.normalizer, threshold_override)
    test_rows = np.asarray(test_rows, dtype=int)
    legal = np.isin(table.subjects[test_rows], chosen)
    predicted, confidence, accepted = identify_many(model, table.features[test_rows])
    lookup = {s: i for i, s in enumerate(chosen, start=1)}
    log, tp, tn = [], 0, 0
    for row, is_legal, p, c, a in zip(test_rows, legal, predicted, confidence, accepted):
        subject = int(table.subjects[row])
        if is_legal:
            outcome = bool(a and p == lookup[subject])
            tp += outcome
        else:
            outcome = not a
            tn += outcome
        log.append({
            "subject": subject,
            "session": int(table.sessions[row]),
            "legal": int(is_legal),
            "accepted": int(a),
            "predicted_subject": int(chosen[p - 1]),
            "confidence": float(c),
            "correct": int(outcome),
        })
    n_legal, n_attack = int(legal.sum()), int((~legal).sum())
    return tp / n_legal, tn / n_attack, model.threshold, log


def evaluate_sampling_time(
    data: Union[Dataset, FeatureTable],
    windows: Sequence[float] = DEFAULT_WINDOWS,
    cfg: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    k: Optional[int] = None,
    n_draws: int = 1,
    n_train: int = 20,
    n_test: int = 10,
    n_jobs: int = 1,
) -> EvaluationReport:
    """Accuracy when test recordings are cut to their first w seconds (training uses full recordings)."""
    _check_split(n_train, n_test)
    windows = [float(w) for w in windows]
    bad = [w for w in windows if not w > 0]
    if bad:
        raise InvalidRangeError(f"windows must be positive, got {bad}")
    if isinstance(data, FeatureTable):
        sample_rate = data.sample_rate
    else:
        if len(data) == 0:
            raise InvalidInputError("dataset holds no recordings")
        sample_rate = data.records[0].series.sample_rate
    for w in windows:
        window_frames(w, sample_rate)
    table = _as_table(data, cfg, windows, n_jobs)
    k = table.n_subjects if k is None else k
    _check_k_range([k], table.n_subjects, table.n_subjects)
    train_rows, test_rows = split_indices(table.subjects, n_train, n_test, seed)
    rows, instances = [], []
    for w in windows:
        def task(draw: int, w=w):
            chosen = _choose_subjects(table, seed, k, draw)
            return _draw_accuracy(table, chosen, train_rows, test_rows, cfg, w)

        results = _run_draws(task, n_draws, n_jobs)
        for draw, (_, log) in enumerate(results):
            instances.extend({"window": w, "draw": draw, **entry} for entry in log)
        rows.append(_accuracy_row(k, [r[0] for r in results], window=w, n_frames=table.window_frames[w]))
        logger.info(f"Window {w} s ({table.window_frames[w]} frames): mean accuracy {rows[-1]['mean']:.4f}")
    return EvaluationReport(
        kind="window", seed=seed, rows=rows, instances=instances,
        metadata=_metadata(cfg, k=k, windows=windows, n_draws=n_draws, n_train=n_train, n_test=n_test),
    )


def _days(table: FeatureTable, sessions_per_day: int) -> np.ndarray:
    if sessions_per_day < 1:
        raise InvalidRangeError("sessions_per_day must be at least 1")
    return (table.sessions - 1) // sessions_per_day + 1


def _accuracy_on(table: FeatureTable, train: np.ndarray, test: np.ndarray, cfg: PipelineConfig) -> Tuple[float, List[Dict]]:
    subjects = table.subject_ids
    missing = sorted(set(subjects) - set(table.subjects[train].tolist()))
    if missing:
        raise InvalidRangeError(f"subjects {missing} have no training sessions")
    return _draw_accuracy(table, subjects, train, test, cfg, None)


def evaluate_drift(
    data: Union[Dataset, FeatureTable],
    sessions_per_day: int,
    strategy: str = "cumulative",
    cfg: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    n_jobs: int = 1,
) -> EvaluationReport:
    """Stability over time: sessions are grouped into days of `sessions_per_day`.

    first-day:  train on day 1, test every later day separately.
    cumulative: train on days 1..j, test on every day after j.
    """
    table = _as_table(data, cfg, n_jobs=n_jobs)
    days = _days(table, sessions_per_day)
    n_days = int(days.max())
    if n_days < 2:
        raise InvalidRangeError("drift evaluation needs sessions spanning at least two days")
    rows, instances = [], []
    if strategy == "first-day":
        plan = [(1, d) for d in range(2, n_days + 1)]
    elif strategy == "cumulative":
        plan = [(j, None) for j in range(1, n_days)]
    else:
        raise InvalidRangeError(f"unknown drift strategy {strategy!r}")
    for train_days, test_day in plan:
        train = np.flatnonzero(days <= train_days)
        test = np.flatnonzero(days == test_day) if test_day is not None else np.flatnonzero(days > train_days)
        accuracy, log = _accuracy_on(table, train, test, cfg)
        rows.append(DriftRow(
            strategy=strategy, train_days=train_days, test_day=test_day, accuracy=accuracy, n_test=len(test)
        ).model_dump())
        instances.extend({"train_days": train_days, "test_day": test_day, **entry} for entry in log)
    return EvaluationReport(
        kind="drift", seed=seed, rows=rows, instances=instances,
        metadata=_metadata(cfg, sessions_per_day=sessions_per_day, strategy=strategy),
    )


def _align_subjects(test: FeatureTable, train_ds: Dataset, test_ds: Dataset) -> FeatureTable:
    # match subjects by original label so independently canonicalized datasets line up
    by_label = {train_ds.original_label(s): s for s in train_ds.subjects()}
    try:
        mapping = {s: by_label[test_ds.original_label(s)] for s in test_ds.subjects()}
    except KeyError as e:
        raise InvalidRangeError(f"test subject {e.args[0]!r} is absent from the training dataset") from e
    subjects = np.array([mapping[int(s)] for s in test.subjects])
    return FeatureTable(subjects, test.sessions, test.features, test.sample_rate, test.windows, test.window_frames)


def evaluate_transfer(
    train_data: Union[Dataset, FeatureTable],
    test_data: Union[Dataset, FeatureTable],
    cfg: PipelineConfig = PipelineConfig(),
    n_jobs: int = 1,
) -> EvaluationReport:
    """Train on every recording of one dataset, test on every recording of another."""
    train = _as_table(train_data, cfg, n_jobs=n_jobs)
    test = _as_table(test_data, cfg, n_jobs=n_jobs)
    if isinstance(train_data, Dataset) and isinstance(test_data, Dataset):
        test = _align_subjects(test, train_data, test_data)
    unknown = sorted(set(test.subject_ids) - set(train.subject_ids))
    if unknown:
        raise InvalidRangeError(f"test subjects {unknown} are absent from the training dataset")
    normalizer, models = _train_classifiers(train.features, train.subjects, cfg)
    predicted = predict_many(scores(models, normalize_matrix(test.features, normalizer)))
    accuracy = float(np.mean(predicted == test.subjects))
    instances = [
        {"subject": int(s), "session": int(r), "predicted_subject": int(p), "correct": int(p == s)}
        for s, r, p in zip(test.subjects, test.sessions, predicted)
    ]
    return EvaluationReport(
        kind="transfer", seed=cfg.train.seed,
        rows=[{"n_train": len(train), "n_test": len(test), "accuracy": accuracy}],
        instances=instances, metadata=_metadata(cfg),
    )


def evaluate_svr(
    data: Union[Dataset, FeatureTable],
    profiles: Sequence[BodyProfile],
    cfg: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    n_train: int = 20,
    n_test: int = 10,
    n_jobs: int = 1,
) -> EvaluationReport:
    """Regress fat and muscle rates from features; report correlation and RMSE on held-out sessions."""
    _check_split(n_train, n_test)
    table = _as_table(data, cfg, n_jobs=n_jobs)
    if len(profiles) < table.n_subjects:
        raise InvalidInputError(f"{len(profiles)} body profiles for {table.n_subjects} subjects")
    train_rows, test_rows = split_indices(table.subjects, n_train, n_test, seed)
    tr, te = np.asarray(train_rows), np.asarray(test_rows)
    rows, instances = [], []
    for target in ("fat_rate", "muscle_rate"):
        truth = np.array([getattr(profiles[s - 1], target) for s in table.subjects])
        model = train_svr(table.features[tr], truth[tr], cfg.train)
        predicted = predict_svr(model, table.features[te])
        correlation = float(np.corrcoef(predicted, truth[te])[0, 1])
        rmse = float(np.sqrt(np.mean((predicted - truth[te]) ** 2)))
        rows.append(RegressionRow(target=target, correlation=correlation, rmse=rmse, n_test=len(te)).model_dump())
        instances.extend(
            {"target": target, "subject": int(table.subjects[r]), "session": int(table.sessions[r]),
             "true": float(truth[r]), "predicted": float(p)}
            for r, p in zip(te, predicted)
        )
        logger.info(f"SVR {target}: correlation {correlation:.4f}, RMSE {rmse:.4f}")
    return EvaluationReport(
        kind="svr", seed=seed, rows=rows, instances=instances,
        metadata=_metadata(cfg, n_train=n_train, n_test=n_test),
    )


def subject_profiles(data: Union[Dataset, Iterable[DatasetRecord]]) -> pd.DataFrame:
    """Per-subject raw amplitude averaged over every sample of every session."""
    sums: Dict[int, np.ndarray] = {}
    counts: Dict[int, int] = {}
    for record in data:
        amps = amplitude(record.series).rows
        sums[record.subject_id] = sums.get(record.subject_id, np.zeros(N_SUBCARRIERS)) + amps.sum(axis=0)
        counts[record.subject_id] = counts.get(record.subject_id, 0) + len(amps)
    frame = pd.DataFrame(
        [sums[s] / counts[s] for s in sorted(sums)],
        columns=[f"sc{k:02d}" for k in range(N_SUBCARRIERS)],
    )
    frame.insert(0, "subject", sorted(sums))
    return frame


# --- timing ---------------------------------------------------------------------------------

def bench_pipeline(
    series: CsiSeries,
    model: IdentifierModel,
    cfg: PipelineConfig = PipelineConfig(),
    n_reps: int = 100,
) -> BenchReport:
    """Median wall-clock per stage for identifying one window."""
    if n_reps < 1:
        raise InvalidRangeError("n_reps must be at least 1")
    if cfg.window is not None:
        series = series.head(window_frames(cfg.window, series.sample_rate))
    timings: Dict[str, List[float]] = {"preprocess": [], "features": [], "identify": []}
    for _ in range(n_reps):
        t0 = time.perf_counter()
        matrix = preprocess(series, cfg)
        t1 = time.perf_counter()
        vector = extract_features(matrix)
        t2 = time.perf_counter()
        identify(model, vector)
        t3 = time.perf_counter()
        timings["preprocess"].append((t1 - t0) * 1e3)
        timings["features"].append((t2 - t1) * 1e3)
        timings["identify"].append((t3 - t2) * 1e3)
    stages = {
        name: StageTiming(median_ms=statistics.median(v), min_ms=min(v), max_ms=max(v))
        for name, v in timings.items()
    }
    return BenchReport(
        n_reps=n_reps,
        n_frames=len(series),
        n_classes=model.n_classes,
        stages=stages,
        compute_total_ms=sum(s.median_ms for s in stages.values()),
        machine={
            "platform": platform.platform(),
            "processor": platform.processor() or platform.machine(),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    )


# --- report files ---------------------------------------------------------------------------

def write_report(report: EvaluationReport, out_dir: Union[str, Path], stem: str, elapsed: Optional[float] = None) -> List[Path]:
    """<stem>.csv summary, <stem>.json full report, <stem>_instances.csv log; timing goes to <stem>_timing.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.csv", out / f"{stem}.json", out / f"{stem}_instances.csv"]
    pd.DataFrame(report.rows).to_csv(paths[0], index=False, float_format="%.12g", lineterminator="\n")
    paths[1].write_text(report.model_dump_json(indent=2) + "\n")
    pd.DataFrame(report.instances).to_csv(paths[2], index=False, float_format="%.12g", lineterminator="\n")
    if elapsed is not None:
        timing = out / f"{stem}_timing.json"
        timing.write_text(f'{{"elapsed_s": {elapsed:.6f}}}\n')
        paths.append(timing)
    logger.info(f"Wrote {report.kind} report to {out}/{stem}.*")
    return paths
