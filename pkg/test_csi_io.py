"""CSI series files, canonical labels and dataset splits."""
import numpy as np
import pytest

from app.exceptions import EmptyInputError, InsufficientDataError, ParseError
from app.models import CsiFrame, CsiSeries, Dataset, DatasetRecord, SubcarrierGrid
from app.services.csi_io import (
    amplitude,
    canonicalize,
    load_csv,
    load_dataset,
    record_filename,
    split_dataset,
    store_csv,
    store_dataset,
)


def _series(n_frames=20, seed=0, **metadata):
    rng = np.random.default_rng(seed)
    csi = rng.standard_normal((n_frames, 30)) + 1j * rng.standard_normal((n_frames, 30))
    return CsiSeries(csi, **metadata)


def test_amplitude_is_modulus():
    series = _series()
    assert np.allclose(amplitude(series).rows, np.abs(series.csi))


def test_grid_resolves_25_ns_taps():
    grid = SubcarrierGrid()
    freqs = grid.subcarrier_frequencies
    assert grid.time_resolution == pytest.approx(25e-9)
    assert np.all(np.diff(freqs) > 0)
    assert freqs.max() - freqs.min() <= grid.bandwidth
    assert (freqs.min() + freqs.max()) / 2 == pytest.approx(grid.center_frequency)


def test_series_frames_and_duration():
    series = _series(n_frames=250, sample_rate=500.0, subject_label="7")
    frames = series.frames
    assert len(frames) == 250 and all(isinstance(f, CsiFrame) for f in frames)
    assert series.duration == pytest.approx(0.5)
    rebuilt = CsiSeries.from_frames(frames, sample_rate=500.0, subject_label="7")
    assert np.array_equal(rebuilt.csi, series.csi)
    assert rebuilt.subject_label == "7"
    assert len(CsiSeries.from_frames([])) == 0


def test_csv_preserves_values_and_metadata(tmp_path):
    series = _series(subject_label="alice", session_id=4)
    path = tmp_path / "rec.csv"
    store_csv(series, path)

    loaded = load_csv(path)
    assert np.array_equal(loaded.csi, series.csi)
    assert loaded.subject_label == "alice"
    assert loaded.session_id == 4
    assert loaded.sample_rate == 500.0
    assert loaded.grid == series.grid


def test_csv_header_format(tmp_path):
    path = tmp_path / "rec.csv"
    store_csv(_series(n_frames=2), path)
    header = path.read_text().splitlines()[0]
    assert header.startswith("#wipin-csv v1, fs=500, fc=5000000000, bw=40000000, nsc=30")
    assert header.endswith("subject=-, session=-")


def test_bad_row_reports_line_number(tmp_path):
    path = tmp_path / "rec.csv"
    store_csv(_series(n_frames=3), path)
    lines = path.read_text().splitlines()
    lines[2] = "1, oops"
    path.write_text("\n".join(lines) + "\n")

    with pytest.raises(ParseError) as info:
        load_csv(path)
    assert info.value.line == 3
    assert "line 3" in str(info.value)


def test_missing_header_is_parse_error(tmp_path):
    path = tmp_path / "rec.csv"
    path.write_text("0, 1, 2\n")
    with pytest.raises(ParseError):
        load_csv(path)


def test_header_without_rows_is_empty_input(tmp_path):
    path = tmp_path / "rec.csv"
    store_csv(_series(n_frames=1), path)
    path.write_text(path.read_text().splitlines()[0] + "\n")
    with pytest.raises(EmptyInputError):
        load_csv(path)


def test_canonicalize_keeps_original_labels():
    records = [("bob", 1, _series()), ("alice", 1, _series()), ("bob", 2, _series())]
    ds = canonicalize(records)

    assert [r.subject_id for r in ds.records] == [1, 2, 1]
    assert ds.original_label(1) == "bob"
    assert ds.original_label(2) == "alice"
    assert ds.n_subjects == 2


def test_subset_relabels_densely():
    records = [(label, s, _series()) for label in ("a", "b", "c") for s in (1, 2)]
    ds = canonicalize(records)
    sub = ds.subset([3, 1])

    assert sub.subjects() == [1, 2]
    assert sub.original_label(1) == "c"
    assert sub.original_label(2) == "a"
    assert len(sub) == 4


def _dataset(n_subjects=3, n_sessions=5):
    series = _series(n_frames=4)
    return Dataset(tuple(
        DatasetRecord(s, r, series) for s in range(1, n_subjects + 1) for r in range(1, n_sessions + 1)
    ))


def test_split_is_disjoint_and_stratified():
    ds = _dataset()
    train, test = split_dataset(ds, 3, 2, seed=11)

    for subject in ds.subjects():
        tr = {r.session_index for r in train.sessions_of(subject)}
        te = {r.session_index for r in test.sessions_of(subject)}
        assert len(tr) == 3 and len(te) == 2
        assert not tr & te


def test_split_is_deterministic():
    ds = _dataset()
    first = split_dataset(ds, 3, 2, seed=5)
    second = split_dataset(ds, 3, 2, seed=5)
    key = lambda part: [(r.subject_id, r.session_index) for r in part.records]
    assert key(first[0]) == key(second[0])
    assert key(first[1]) == key(second[1])


def test_split_needs_enough_sessions():
    with pytest.raises(InsufficientDataError) as info:
        split_dataset(_dataset(n_sessions=4), 3, 2, seed=0)
    assert info.value.subject == 1


def test_dataset_directory(tmp_path):
    ds = canonicalize([(label, s, _series(n_frames=3, seed=s)) for label in ("x", "y") for s in (1, 2)])
    store_dataset(ds, tmp_path)

    assert (tmp_path / record_filename(2, 1)).exists()
    assert (tmp_path / "manifest.json").exists()
    loaded = load_dataset(tmp_path)
    assert len(loaded) == 4
    assert loaded.original_label(2) == "y"
    assert np.array_equal(loaded.records[3].series.csi, ds.records[3].series.csi)
