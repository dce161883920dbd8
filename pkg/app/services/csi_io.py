"""CSI data model operations, canonical CSV files and dataset management."""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from app.exceptions import EmptyInputError, InsufficientDataError, InvalidInputError, ParseError
from app.models import (
    N_SUBCARRIERS,
    AmplitudeMatrix,
    CsiSeries,
    Dataset,
    DatasetRecord,
    SubcarrierGrid,
)
from app.schemas.identify import DatasetManifest, ManifestRecord

logger = logging.getLogger(__name__)

CSV_MAGIC = "#wipin-csv v1"
CSV_FIELDS = 1 + 2 * N_SUBCARRIERS
MANIFEST_NAME = "manifest.json"

PathLike = Union[str, Path]


def _num(value: float) -> str:
    return format(float(value), ".17g")


def amplitude(series: CsiSeries) -> AmplitudeMatrix:
    """Modulus of every CSI value; the pipeline uses amplitudes only."""
    if len(series) == 0:
        raise EmptyInputError("cannot take amplitudes of an empty series")
    return AmplitudeMatrix(np.abs(series.csi), sample_rate=series.sample_rate)


def _header(series: CsiSeries) -> str:
    subject = series.subject_label if series.subject_label is not None else "-"
    session = series.session_id if series.session_id is not None else "-"
    return (
        f"{CSV_MAGIC}, fs={_num(series.sample_rate)}, fc={_num(series.grid.center_frequency)}, "
        f"bw={_num(series.grid.bandwidth)}, nsc={series.grid.n_subcarriers}, "
        f"subject={subject}, session={session}"
    )


def store_csv(series: CsiSeries, path: PathLike) -> None:
    """Write a series in the canonical CSI CSV format."""
    if series.subject_label is not None and ("," in series.subject_label or "\n" in series.subject_label):
        raise InvalidInputError(f"subject label {series.subject_label!r} cannot hold commas or newlines")
    interleaved = np.empty((len(series), CSV_FIELDS - 1), dtype=np.float64)
    interleaved[:, 0::2] = series.csi.real
    interleaved[:, 1::2] = series.csi.imag
    with open(path, "w", newline="") as handle:
        handle.write(_header(series) + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        for t, row in enumerate(interleaved):
            writer.writerow([t, *(_num(v) for v in row)])


def _parse_header(line: str) -> Dict[str, str]:
    parts = [part.strip() for part in line.strip().split(",")]
    if not parts or parts[0] != CSV_MAGIC:
        raise ParseError(f"expected header starting with '{CSV_MAGIC}'", line=1)
    fields: Dict[str, str] = {}
    for part in parts[1:]:
        key, sep, value = part.partition("=")
        if not sep:
            raise ParseError(f"malformed header field {part!r}", line=1)
        fields[key.strip()] = value.strip()
    missing = {"fs", "fc", "bw", "nsc", "subject", "session"} - fields.keys()
    if missing:
        raise ParseError(f"header is missing {sorted(missing)}", line=1)
    return fields


def load_csv(path: PathLike) -> CsiSeries:
    """Read a canonical CSI CSV file."""
    with open(path, newline="") as handle:
        return read_csv(handle, source=str(path))


def read_csv(handle: TextIO, source: str = "<stream>") -> CsiSeries:
    """Parse canonical CSI CSV text from an open handle."""
    header_line = handle.readline()
    if not header_line:
        raise ParseError("file is empty", line=1)
    fields = _parse_header(header_line)
    try:
        sample_rate = float(fields["fs"])
        grid = SubcarrierGrid(
            center_frequency=float(fields["fc"]),
            bandwidth=float(fields["bw"]),
            n_subcarriers=int(fields["nsc"]),
        )
        session = None if fields["session"] == "-" else int(fields["session"])
    except (ValueError, InvalidInputError) as e:
        raise ParseError(f"bad header value: {e}", line=1) from e
    if not (math.isfinite(sample_rate) and sample_rate > 0):
        raise ParseError(f"sample rate must be positive, got {fields['fs']}", line=1)
    subject = None if fields["subject"] == "-" else fields["subject"]

    rows: List[List[float]] = []
    for lineno, row in enumerate(csv.reader(handle, skipinitialspace=True), start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != CSV_FIELDS:
            raise ParseError(f"expected {CSV_FIELDS} fields, got {len(row)}", line=lineno)
        try:
            values = [float(v) for v in row[1:]]
        except ValueError as e:
            raise ParseError(f"non-numeric value: {e}", line=lineno) from e
        if not all(math.isfinite(v) for v in values):
            raise ParseError("non-finite value", line=lineno)
        rows.append(values)

    if not rows:
        raise EmptyInputError(f"{source}: no CSI rows after the header")
    data = np.asarray(rows)
    csi = data[:, 0::2] + 1j * data[:, 1::2]
    return CsiSeries(csi, sample_rate=sample_rate, grid=grid, subject_label=subject, session_id=session)


def canonicalize(
    records: Iterable[Tuple[Any, int, CsiSeries]],
    manifest: Optional[Dict[str, Any]] = None,
) -> Dataset:
    """Assign dense subject ids 1..N in first-appearance order, keeping original labels."""
    mapping: Dict[str, int] = {}
    canonical: List[DatasetRecord] = []
    for label, session, series in records:
        key = str(label)
        if key not in mapping:
            mapping[key] = len(mapping) + 1
        canonical.append(DatasetRecord(mapping[key], int(session), series))
    labels = {str(sid): label for label, sid in mapping.items()}
    return Dataset(tuple(canonical), {**(manifest or {}), "labels": labels})


def split_dataset(
    ds: Dataset,
    n_train_per_subject: int,
    n_test_per_subject: int,
    seed: int,
) -> Tuple[Dataset, Dataset]:
    """Per-subject stratified random split into disjoint train/test sessions."""
    train_idx, test_idx = split_indices(
        [r.subject_id for r in ds.records], n_train_per_subject, n_test_per_subject, seed
    )
    train = Dataset(tuple(ds.records[i] for i in train_idx), dict(ds.manifest))
    test = Dataset(tuple(ds.records[i] for i in test_idx), dict(ds.manifest))
    return train, test


def split_indices(
    subject_ids: Sequence[int],
    n_train: int,
    n_test: int,
    seed: int,
) -> Tuple[List[int], List[int]]:
    """Index form of split_dataset, shared with the evaluation harness."""
    if n_train < 0 or n_test < 0:
        raise InvalidInputError("split sizes must be non-negative")
    subject_ids = np.asarray(subject_ids)
    rng = np.random.default_rng(seed)
    train: List[int] = []
    test: List[int] = []
    for subject in sorted(set(subject_ids.tolist())):
        positions = np.flatnonzero(subject_ids == subject)
        if len(positions) < n_train + n_test:
            raise InsufficientDataError(
                f"subject {subject} has {len(positions)} sessions, split needs {n_train + n_test}",
                subject=subject,
            )
        chosen = rng.permutation(positions)
        train.extend(sorted(chosen[:n_train].tolist()))
        test.extend(sorted(chosen[n_train:n_train + n_test].tolist()))
    return train, test


def record_filename(subject_id: int, session_index: int) -> str:
    return f"s{subject_id:03d}_r{session_index:03d}.csv"


def store_records(records: Iterable[DatasetRecord], directory: PathLike, manifest: Optional[Dict[str, Any]] = None) -> Path:
    """Write records one at a time as canonical CSV, then manifest.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = manifest or {}
    entries = []
    for record in records:
        name = record_filename(record.subject_id, record.session_index)
        store_csv(record.series, directory / name)
        entries.append(ManifestRecord(subject=record.subject_id, session=record.session_index, file=name))
    write_manifest(directory, entries, manifest.get("generator", {}), manifest.get("labels", {}))
    logger.info(f"Stored {len(entries)} recordings in {directory}")
    return directory


def store_dataset(ds: Dataset, directory: PathLike) -> Path:
    """Write every record as canonical CSV plus manifest.json."""
    return store_records(ds.records, directory, ds.manifest)


def write_manifest(
    directory: PathLike,
    entries: Sequence[ManifestRecord],
    generator: Dict[str, Any],
    labels: Dict[str, str],
) -> None:
    manifest = DatasetManifest(records=list(entries), generator=generator, labels=labels)
    Path(directory, MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2) + "\n")


def read_manifest(directory: PathLike) -> DatasetManifest:
    path = Path(directory, MANIFEST_NAME)
    try:
        return DatasetManifest.model_validate_json(path.read_text())
    except FileNotFoundError as e:
        raise ParseError(f"{path} not found") from e
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from e


def iter_dataset(directory: PathLike) -> Iterator[DatasetRecord]:
    """Stream the records of a dataset directory one file at a time."""
    manifest = read_manifest(directory)
    for entry in manifest.records:
        yield DatasetRecord(entry.subject, entry.session, load_csv(Path(directory, entry.file)))


def load_dataset(directory: PathLike) -> Dataset:
    manifest = read_manifest(directory)
    records = tuple(iter_dataset(directory))
    if not records:
        raise EmptyInputError(f"{directory}: manifest lists no records")
    return Dataset(records, {"generator": manifest.generator, "labels": manifest.labels})


def load_json(path: PathLike) -> Dict[str, Any]:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e.msg}", line=e.lineno) from e
