"""39-dimensional feature extraction and [-1, +1] normalization."""
import csv
import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from app.exceptions import EmptyInputError, InvalidInputError, ParseError
from app.models import N_FEATURES, N_SUBCARRIERS, AmplitudeMatrix, FeatureVector, Normalizer
from app.schemas.identify import NormalizerDocument

logger = logging.getLogger(__name__)

ENTROPY_BINS = 10
FEATURE_MAGIC = "#wipin-feat v1"


def entropy(profile) -> float:
    """Entropy of the profile histogram over 10 equal bins spanning [min, max]."""
    values = np.asarray(profile, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return 0.0
    bins = np.minimum(np.floor(ENTROPY_BINS * (values - lo) / (hi - lo)), ENTROPY_BINS - 1).astype(int)
    counts = np.bincount(bins, minlength=ENTROPY_BINS)
    return float(stats.entropy(counts))


def _moment_ratio(value: float) -> float:
    # zero-variance profiles have no defined shape; report 0
    return float(value) if math.isfinite(value) else 0.0


def profile_statistics(profile) -> np.ndarray:
    """Nine descriptors of a 30-value frequency-domain profile."""
    x = np.asarray(profile, dtype=np.float64)
    sigma = float(np.std(x))
    if sigma == 0.0:
        skewness = kurtosis = 0.0
    else:
        skewness = _moment_ratio(stats.skew(x, bias=True))
        kurtosis = _moment_ratio(stats.kurtosis(x, fisher=True, bias=True))
    return np.array([
        np.mean(x),
        sigma,
        stats.median_abs_deviation(x),
        np.mean(np.abs(x - np.mean(x))),
        stats.iqr(x),
        np.sqrt(np.mean(x ** 2)),
        skewness,
        kurtosis,
        entropy(x),
    ])


def extract_features(matrix: AmplitudeMatrix, label: Optional[int] = None) -> FeatureVector:
    """Subcarrier temporal means followed by the statistics of that mean profile."""
    if len(matrix) == 0:
        raise EmptyInputError("cannot extract features from an empty amplitude matrix")
    means = matrix.steady_rows().mean(axis=0)
    return FeatureVector(np.concatenate([means, profile_statistics(means)]), label=label)


def _as_matrix(features: Union[Sequence[FeatureVector], np.ndarray]) -> np.ndarray:
    if isinstance(features, np.ndarray):
        X = np.asarray(features, dtype=np.float64)
    else:
        X = np.array([f.values for f in features], dtype=np.float64).reshape(-1, N_FEATURES)
    if X.ndim != 2 or X.shape[1] != N_FEATURES:
        raise InvalidInputError(f"expected an (n, {N_FEATURES}) feature matrix, got {X.shape}")
    return X


def fit_normalizer(training_features: Union[Sequence[FeatureVector], np.ndarray]) -> Normalizer:
    """Exact per-feature extremes of the training set."""
    X = _as_matrix(training_features)
    if X.shape[0] == 0:
        raise EmptyInputError("cannot fit a normalizer on zero training vectors")
    return Normalizer(X.min(axis=0), X.max(axis=0))


def normalize_matrix(X: np.ndarray, norm: Normalizer) -> np.ndarray:
    """Batch form of normalize; rows are feature vectors. Values outside the training range pass through."""
    X = np.asarray(X, dtype=np.float64)
    span = norm.maximum - norm.minimum
    degenerate = span == 0
    safe_span = np.where(degenerate, 1.0, span)
    scaled = (2.0 * X - norm.maximum - norm.minimum) / safe_span
    return np.where(degenerate, 0.0, scaled)


def normalize(x: FeatureVector, norm: Normalizer) -> FeatureVector:
    return FeatureVector(normalize_matrix(x.values, norm), label=x.label)


def normalizer_to_document(norm: Normalizer) -> NormalizerDocument:
    return NormalizerDocument(min=norm.minimum.tolist(), max=norm.maximum.tolist())


def normalizer_from_document(doc: NormalizerDocument) -> Normalizer:
    if len(doc.min) != N_FEATURES:
        raise ParseError(f"normalizer must have {N_FEATURES} entries, got {len(doc.min)}")
    return Normalizer(np.array(doc.min), np.array(doc.max))


def store_features_csv(vectors: Sequence[FeatureVector], path: Union[str, Path], subject: Optional[str] = None) -> None:
    """One subject's feature vectors as 39-column rows under a `#wipin-feat v1` header."""
    with open(path, "w", newline="") as handle:
        handle.write(f"{FEATURE_MAGIC}, subject={subject if subject is not None else '-'}\n")
        writer = csv.writer(handle, lineterminator="\n")
        for vector in vectors:
            writer.writerow([format(v, ".17g") for v in vector.values])


def load_features_csv(path: Union[str, Path]) -> Tuple[Optional[str], List[FeatureVector]]:
    with open(path, newline="") as handle:
        header = [part.strip() for part in handle.readline().split(",")]
        if not header or header[0] != FEATURE_MAGIC or len(header) < 2 or not header[1].startswith("subject="):
            raise ParseError(f"expected header '{FEATURE_MAGIC}, subject=<tag>'", line=1)
        subject = header[1].partition("=")[2] or None
        subject = None if subject == "-" else subject
        vectors = []
        for lineno, row in enumerate(csv.reader(handle, skipinitialspace=True), start=2):
            if not row:
                continue
            if len(row) != N_FEATURES:
                raise ParseError(f"expected {N_FEATURES} columns, got {len(row)}", line=lineno)
            try:
                values = [float(v) for v in row]
            except ValueError as e:
                raise ParseError(f"non-numeric value: {e}", line=lineno) from e
            if not all(math.isfinite(v) for v in values):
                raise ParseError("non-finite value", line=lineno)
            vectors.append(FeatureVector(np.array(values)))
    return subject, vectors
