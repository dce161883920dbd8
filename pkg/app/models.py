"""Numeric domain models: CSI series, datasets, features and trained classifiers."""
import enum
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.exceptions import InvalidInputError

N_SUBCARRIERS = 30
N_PROFILE_STATS = 9
N_FEATURES = N_SUBCARRIERS + N_PROFILE_STATS
ABSORPTION_RIPPLE = 0.15

PROFILE_STAT_NAMES = (
    "mean",
    "std",
    "median_abs_dev",
    "mean_abs_dev",
    "iqr",
    "rms",
    "skewness",
    "kurtosis",
    "entropy",
)
FEATURE_NAMES = tuple(f"sc{k:02d}_mean" for k in range(N_SUBCARRIERS)) + tuple(
    f"profile_{name}" for name in PROFILE_STAT_NAMES
)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class NoisePreset(str, enum.Enum):
    """Simulator noise environment."""
    CLEAN = "clean"
    LAB = "lab"
    CORRIDOR = "corridor"


class DecisionKind(str, enum.Enum):
    """Outcome of an identification attempt."""
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class SubcarrierGrid:
    """The 30 OFDM subcarriers reported across the channel bandwidth."""
    center_frequency: float = 5.0e9
    bandwidth: float = 40.0e6
    n_subcarriers: int = N_SUBCARRIERS

    def __post_init__(self):
        if self.n_subcarriers != N_SUBCARRIERS:
            raise InvalidInputError(f"grid must have {N_SUBCARRIERS} subcarriers, got {self.n_subcarriers}")
        if not (self.bandwidth > 0 and self.center_frequency > 0):
            raise InvalidInputError("bandwidth and center frequency must be positive")

    @property
    def spacing(self) -> float:
        return self.bandwidth / self.n_subcarriers

    @property
    def subcarrier_frequencies(self) -> np.ndarray:
        offsets = np.arange(self.n_subcarriers) - (self.n_subcarriers - 1) / 2.0
        return self.center_frequency + offsets * self.spacing

    @property
    def time_resolution(self) -> float:
        """Delay-domain tap spacing, 1/B."""
        return 1.0 / self.bandwidth


@dataclass(frozen=True, eq=False)
class CsiFrame:
    """One CSI sample: a complex gain per subcarrier."""
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if values.shape != (N_SUBCARRIERS,):
            raise InvalidInputError(f"frame must hold {N_SUBCARRIERS} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("frame holds non-finite values")
        object.__setattr__(self, "values", _frozen(values))


@dataclass(frozen=True, eq=False)
class CsiSeries:
    """Time-indexed complex CSI, shape (t, 30), with sampling metadata."""
    csi: np.ndarray
    sample_rate: float = 500.0
    grid: SubcarrierGrid = field(default_factory=SubcarrierGrid)
    subject_label: Optional[str] = None
    session_id: Optional[int] = None

    def __post_init__(self):
        csi = np.array(self.csi, dtype=np.complex128)
        if csi.ndim != 2 or csi.shape[1] != N_SUBCARRIERS:
            raise InvalidInputError(f"CSI must have shape (t, {N_SUBCARRIERS}), got {csi.shape}")
        if not np.all(np.isfinite(csi)):
            raise InvalidInputError("CSI holds non-finite values")
        if not self.sample_rate > 0:
            raise InvalidInputError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "csi", _frozen(csi))

    @classmethod
    def from_frames(cls, frames: Sequence[CsiFrame], **metadata: Any) -> "CsiSeries":
        if not frames:
            return cls(np.empty((0, N_SUBCARRIERS), dtype=np.complex128), **metadata)
        return cls(np.stack([frame.values for frame in frames]), **metadata)

    @property
    def frames(self) -> Tuple[CsiFrame, ...]:
        return tuple(CsiFrame(row) for row in self.csi)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def __len__(self) -> int:
        return self.csi.shape[0]

    def head(self, n_frames: int) -> "CsiSeries":
        """First n_frames frames, metadata kept."""
        return CsiSeries(
            self.csi[:n_frames],
            sample_rate=self.sample_rate,
            grid=self.grid,
            subject_label=self.subject_label,
            session_id=self.session_id,
        )


@dataclass(frozen=True, eq=False)
class AmplitudeMatrix:
    """Real amplitudes, shape (t, 30). `warmup` counts leading filter-transient rows."""
    rows: np.ndarray
    sample_rate: float = 500.0
    warmup: int = 0

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != N_SUBCARRIERS:
            raise InvalidInputError(f"amplitudes must have shape (t, {N_SUBCARRIERS}), got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise InvalidInputError("amplitudes hold non-finite values")
        if np.any(rows < 0):
            raise InvalidInputError("amplitudes must be non-negative")
        object.__setattr__(self, "rows", _frozen(rows))

    def __len__(self) -> int:
        return self.rows.shape[0]

    def steady_rows(self) -> np.ndarray:
        """Rows after the warm-up, or every row when the matrix is shorter than twice the warm-up."""
        if self.warmup and len(self) > 2 * self.warmup:
            return self.rows[self.warmup:]
        return self.rows


@dataclass(frozen=True, eq=False)
class DatasetRecord:
    subject_id: int
    session_index: int
    series: CsiSeries


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled recordings with dense subject ids 1..N."""
    records: Tuple[DatasetRecord, ...]
    manifest: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        ids = {record.subject_id for record in self.records}
        if ids and ids != set(range(1, len(ids) + 1)):
            raise InvalidInputError(f"subject ids must be contiguous 1..N, got {sorted(ids)}")
        grids = {record.series.grid for record in self.records}
        if len(grids) > 1:
            raise InvalidInputError("all records must share one subcarrier grid")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[DatasetRecord]:
        return iter(self.records)

    @property
    def n_subjects(self) -> int:
        return len({record.subject_id for record in self.records})

    def subjects(self) -> List[int]:
        return sorted({record.subject_id for record in self.records})

    def sessions_of(self, subject_id: int) -> List[DatasetRecord]:
        return [record for record in self.records if record.subject_id == subject_id]

    def original_label(self, subject_id: int) -> str:
        labels = self.manifest.get("labels", {})
        return str(labels.get(str(subject_id), subject_id))

    def subset(self, subject_ids: Sequence[int]) -> "Dataset":
        """Records of the given subjects, relabeled 1..k in the given order."""
        mapping = {old: new for new, old in enumerate(subject_ids, start=1)}
        records = tuple(
            DatasetRecord(mapping[r.subject_id], r.session_index, r.series)
            for r in self.records
            if r.subject_id in mapping
        )
        labels = {str(new): self.original_label(old) for old, new in mapping.items()}
        return Dataset(records, {**self.manifest, "labels": labels})


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """39 features: 30 subcarrier means followed by 9 profile statistics."""
    values: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (N_FEATURES,):
            raise InvalidInputError(f"feature vector must hold {N_FEATURES} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("feature vector holds non-finite values")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def means(self) -> np.ndarray:
        return self.values[:N_SUBCARRIERS]

    @property
    def profile(self) -> Dict[str, float]:
        return dict(zip(PROFILE_STAT_NAMES, self.values[N_SUBCARRIERS:].tolist()))


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Per-feature training extremes for the [-1, +1] scaling."""
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        lo = np.array(self.minimum, dtype=np.float64)
        hi = np.array(self.maximum, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InvalidInputError("normalizer bounds must be equal-length vectors")
        if np.any(lo > hi):
            raise InvalidInputError("normalizer min exceeds max")
        object.__setattr__(self, "minimum", _frozen(lo))
        object.__setattr__(self, "maximum", _frozen(hi))


@dataclass(frozen=True, eq=False)
class SvmModel:
    """One one-vs-all linear classifier."""
    weights: np.ndarray
    bias: float
    class_id: int

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        if not (np.all(np.isfinite(weights)) and math.isfinite(self.bias)):
            raise InvalidInputError(f"classifier {self.class_id} has non-finite parameters")
        if self.class_id < 1:
            raise InvalidInputError(f"class ids start at 1, got {self.class_id}")
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "bias", float(self.bias))


@dataclass(frozen=True, eq=False)
class IdentifierModel:
    """N classifiers, the normalizer they were trained under and the rejection threshold."""
    models: Tuple[SvmModel, ...]
    normalizer: Normalizer
    threshold: float

    def __post_init__(self):
        models = tuple(sorted(self.models, key=lambda m: m.class_id))
        if len(models) < 2:
            raise InvalidInputError("an identifier needs at least two classes")
        if [m.class_id for m in models] != list(range(1, len(models) + 1)):
            raise InvalidInputError("class ids must be contiguous 1..N")
        if not (math.isfinite(self.threshold) and self.threshold >= 0):
            raise InvalidInputError(f"threshold must be finite and non-negative, got {self.threshold}")
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "threshold", float(self.threshold))

    @property
    def n_classes(self) -> int:
        return len(self.models)

    @property
    def weight_matrix(self) -> np.ndarray:
        return np.stack([m.weights for m in self.models])

    @property
    def biases(self) -> np.ndarray:
        return np.array([m.bias for m in self.models])


@dataclass(frozen=True)
class Decision:
    """Accept with an identity and confidence, or Reject."""
    kind: DecisionKind
    confidence: float
    threshold: float
    identity: Optional[int] = None

    @property
    def accepted(self) -> bool:
        return self.kind is DecisionKind.ACCEPT


@dataclass(frozen=True, eq=False)
class SvrModel:
    """Linear epsilon-insensitive regressor over normalized features."""
    weights: np.ndarray
    bias: float
    normalizer: Normalizer
    epsilon: float


@dataclass(frozen=True)
class BodyProfile:
    """Body parameters of one synthetic subject."""
    fat_rate: float
    muscle_rate: float
    shape_scale: float

    def __post_init__(self):
        if not 0.05 <= self.fat_rate <= 0.45:
            raise InvalidInputError(f"fat_rate {self.fat_rate} outside [0.05, 0.45]")
        if not 0.2 <= self.muscle_rate <= 0.6:
            raise InvalidInputError(f"muscle_rate {self.muscle_rate} outside [0.2, 0.6]")
        if not 0.8 <= self.shape_scale <= 1.2:
            raise InvalidInputError(f"shape_scale {self.shape_scale} outside [0.8, 1.2]")

    @property
    def parameters(self) -> np.ndarray:
        return np.array([self.fat_rate, self.muscle_rate, self.shape_scale])

    @property
    def absorption_curve(self) -> np.ndarray:
        """Frequency-selective body attenuation per subcarrier, values in (0, 1]."""
        base = min(max(0.9 - 0.5 * self.fat_rate + 0.2 * self.muscle_rate, 1e-3), 1.0)
        kappa = 1.0 + 2.0 * (self.shape_scale - 0.8) / 0.4
        phi = math.pi * (self.fat_rate + self.muscle_rate)
        j = np.arange(N_SUBCARRIERS)
        ripple = 1.0 + ABSORPTION_RIPPLE * np.sin(2 * math.pi * (j / N_SUBCARRIERS) * kappa + phi)
        # divided by the ripple peak so the curve stays within (0, 1]
        return base * ripple / (1.0 + ABSORPTION_RIPPLE)
