"""Feature extraction against hand-written formulas, and [-1, +1] normalization."""
import math

import numpy as np
import pytest

from app.exceptions import EmptyInputError, InvalidInputError
from app.models import AmplitudeMatrix, FeatureVector
from app.services.features import (
    entropy,
    extract_features,
    fit_normalizer,
    load_features_csv,
    normalize,
    normalize_matrix,
    store_features_csv,
)


def _percentile(sorted_values, q):
    # linear interpolation between closest ranks
    pos = (len(sorted_values) - 1) * q
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(sorted_values) - 1)
    return sorted_values[lo] + (sorted_values[hi] - sorted_values[lo]) * (pos - lo)


def naive_features(rows):
    n = len(rows)
    means = [sum(rows[t][k] for t in range(n)) / n for k in range(30)]
    x = means
    mu = sum(x) / 30
    m2 = sum((v - mu) ** 2 for v in x) / 30
    m3 = sum((v - mu) ** 3 for v in x) / 30
    m4 = sum((v - mu) ** 4 for v in x) / 30
    s = sorted(x)
    median = (s[14] + s[15]) / 2
    deviations = sorted(abs(v - median) for v in x)
    mad = (deviations[14] + deviations[15]) / 2
    lo, hi = min(x), max(x)
    counts = [0] * 10
    for v in x:
        counts[10 - 1 if hi == lo else min(int(math.floor(10 * (v - lo) / (hi - lo))), 9)] += 1
    ent = 0.0 if hi == lo else -sum(c / 30 * math.log(c / 30) for c in counts if c)
    return means + [
        mu,
        math.sqrt(m2),
        mad,
        sum(abs(v - mu) for v in x) / 30,
        _percentile(s, 0.75) - _percentile(s, 0.25),
        math.sqrt(sum(v * v for v in x) / 30),
        m3 / m2 ** 1.5 if m2 > 0 else 0.0,
        m4 / m2 ** 2 - 3.0 if m2 > 0 else 0.0,
        ent,
    ]


def test_features_match_naive_formulas():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n_rows = int(rng.integers(1, 40))
        rows = rng.random((n_rows, 30)) * rng.uniform(0.1, 5.0)
        features = extract_features(AmplitudeMatrix(rows)).values
        assert np.allclose(features, naive_features(rows.tolist()), rtol=0, atol=1e-9)


def test_entropy_bounds():
    rng = np.random.default_rng(1)
    for _ in range(200):
        value = entropy(rng.random(30) ** rng.uniform(0.2, 5.0))
        assert 0.0 <= value <= math.log(10) + 1e-12


def test_entropy_of_uniform_spread_profile():
    # three values in each of the ten bins
    assert entropy(np.repeat(np.arange(10), 3) + 0.5) == pytest.approx(math.log(10))


def test_entropy_of_two_equal_bins():
    assert entropy(np.repeat([1.0, 10.0], 15)) == pytest.approx(math.log(2), abs=1e-9)
    rows = np.tile(np.repeat([1.0, 10.0], 15), (4, 1))
    assert extract_features(AmplitudeMatrix(rows)).values[38] == pytest.approx(math.log(2), abs=1e-9)


def test_constant_matrix_closed_form():
    vector = extract_features(AmplitudeMatrix(np.full((10, 30), 2.0)))
    expected = [2.0] * 30 + [2.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]
    assert np.allclose(vector.values, expected, atol=1e-12)


def test_rms_bounds_mean():
    rng = np.random.default_rng(2)
    profile = extract_features(AmplitudeMatrix(rng.random((5, 30)))).profile
    assert profile["rms"] >= abs(profile["mean"])


def test_features_ignore_row_order():
    rng = np.random.default_rng(3)
    rows = rng.random((60, 30)) + 0.5
    shuffled = rows[rng.permutation(60)]
    assert np.allclose(
        extract_features(AmplitudeMatrix(shuffled)).values, extract_features(AmplitudeMatrix(rows)).values,
        rtol=0, atol=1e-12,
    )


def test_scaling_the_matrix_scales_location_and_spread_only():
    rng = np.random.default_rng(4)
    rows = rng.random((40, 30)) + 0.2
    c = 2.5
    base = extract_features(AmplitudeMatrix(rows)).values
    scaled = extract_features(AmplitudeMatrix(c * rows)).values
    # means, mean, std, MAD, mean-abs-dev, IQR, RMS
    linear = list(range(36))
    assert np.allclose(scaled[linear], c * base[linear], rtol=1e-9, atol=0)
    # skewness, kurtosis, entropy
    assert np.allclose(scaled[36:], base[36:], rtol=0, atol=1e-9)


def test_warmup_rows_are_excluded_from_long_matrices():
    rows = np.ones((30, 30))
    rows[:5] = 100.0
    vector = extract_features(AmplitudeMatrix(rows, warmup=5))
    assert np.allclose(vector.means, 1.0)


def test_short_matrix_keeps_all_rows():
    rows = np.ones((8, 30))
    rows[:5] = 9.0
    vector = extract_features(AmplitudeMatrix(rows, warmup=5))
    assert np.allclose(vector.means, (5 * 9.0 + 3) / 8)


def test_empty_matrix():
    with pytest.raises(EmptyInputError):
        extract_features(AmplitudeMatrix(np.empty((0, 30))))


def test_normalizer_maps_training_extremes_to_unit_interval():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(20, 39)) * 4 + 1
    norm = fit_normalizer(X)
    scaled = normalize_matrix(X, norm)
    assert np.allclose(scaled.min(axis=0), -1.0)
    assert np.allclose(scaled.max(axis=0), 1.0)


def test_degenerate_feature_normalizes_to_zero():
    X = np.ones((4, 39))
    X[:, 0] = [0.0, 1.0, 2.0, 3.0]
    scaled = normalize(FeatureVector(X[2]), fit_normalizer(X)).values
    assert scaled[0] == pytest.approx(1.0 / 3.0)
    assert np.all(scaled[1:] == 0.0)


def test_values_outside_training_range_pass_through():
    X = np.zeros((2, 39))
    X[1] = 1.0
    out = normalize_matrix(np.full(39, 2.0), fit_normalizer(X))
    assert np.allclose(out, 3.0)


def test_normalizer_needs_39_columns():
    with pytest.raises(InvalidInputError):
        fit_normalizer(np.ones((3, 10)))


def test_feature_csv(tmp_path):
    rng = np.random.default_rng(4)
    vectors = [FeatureVector(rng.random(39)) for _ in range(3)]
    path = tmp_path / "features.csv"
    store_features_csv(vectors, path, subject="alice")

    subject, loaded = load_features_csv(path)
    assert subject == "alice"
    assert all(np.array_equal(a.values, b.values) for a, b in zip(vectors, loaded))
