"""Butterworth noise removal and delay-tap multipath mitigation."""
import numpy as np
import pytest

from app.exceptions import InvalidInputError, InvalidSpecError
from app.models import AmplitudeMatrix, SubcarrierGrid
from app.schemas.pipeline import ButterworthSpec, MitigationConfig
from app.schemas.simulation import ChannelScenario, PathComponent
from app.services.dsp import apply_lowpass, design_butterworth_lowpass, mitigate_multipath, mitigate_series
from app.services.simulator import channel_response


@pytest.fixture
def coeffs():
    return design_butterworth_lowpass(ButterworthSpec(order=5, cutoff=10.0, sample_rate=500.0))


def test_lowpass_response(coeffs):
    response = np.abs(coeffs.frequency_response([0.0, 10.0, 50.0]))
    assert response[0] == pytest.approx(1.0, abs=1e-6)
    assert response[1] == pytest.approx(0.7071, abs=0.01)
    assert response[2] <= 6.4e-4


def test_design_is_stable_with_three_sections(coeffs):
    assert coeffs.is_stable
    assert coeffs.sections.shape == (3, 5)
    assert coeffs.warmup == 50


def test_cutoff_at_nyquist_is_rejected():
    with pytest.raises(InvalidSpecError):
        design_butterworth_lowpass(ButterworthSpec(order=5, cutoff=250.0, sample_rate=500.0))


def test_constant_input_passes_unchanged(coeffs):
    rows = np.tile(np.linspace(0.5, 2.0, 30), (200, 1))
    out = apply_lowpass(AmplitudeMatrix(rows), coeffs)
    assert np.allclose(out.rows, rows, atol=1e-9)
    assert out.warmup == 50


def test_high_frequency_ripple_is_removed(coeffs):
    t = np.arange(2500) / 500.0
    rows = 1.0 + 0.2 * np.sin(2 * np.pi * 100.0 * t)[:, None] * np.ones(30)
    out = apply_lowpass(AmplitudeMatrix(rows), coeffs)
    # skip the onset transient of the ripple
    assert np.max(np.abs(out.rows[1000:] - 1.0)) < 1e-3


def test_zero_phase_keeps_constant_and_has_no_warmup(coeffs):
    rows = np.full((300, 30), 0.8)
    out = apply_lowpass(AmplitudeMatrix(rows), coeffs, zero_phase=True)
    assert np.allclose(out.rows, 0.8, atol=1e-9)
    assert out.warmup == 0


def test_lowpass_is_linear(coeffs):
    rng = np.random.default_rng(4)
    t = np.arange(400)[:, None] / 500.0
    x = 2.0 + 0.5 * np.sin(2 * np.pi * 3.0 * t + np.arange(30))
    y = 1.5 + 0.5 * rng.random((400, 30))
    a, b = 0.7, 1.3
    combined = apply_lowpass(AmplitudeMatrix(a * x + b * y), coeffs).rows
    separate = a * apply_lowpass(AmplitudeMatrix(x), coeffs).rows + b * apply_lowpass(AmplitudeMatrix(y), coeffs).rows
    assert np.max(np.abs(combined - separate)) <= 1e-9


def test_output_is_never_negative(coeffs):
    rng = np.random.default_rng(0)
    rows = np.abs(rng.standard_normal((500, 30))) * (rng.random((500, 30)) < 0.05)
    assert np.all(apply_lowpass(AmplitudeMatrix(rows), coeffs).rows >= 0)


def test_mitigation_without_suppression_is_identity():
    rng = np.random.default_rng(1)
    identity = MitigationConfig(suppression_divisor=1.0)
    for _ in range(1000):
        profile = rng.random(30) * 3.0
        assert np.max(np.abs(mitigate_multipath(profile, identity) - profile)) <= 1e-9


def test_two_tap_cosine_is_attenuated_by_divisor():
    j = np.arange(30)
    oscillation = 0.5 * np.cos(2 * np.pi * j / 30)
    out = mitigate_multipath(2.0 + oscillation)

    assert np.mean(out) == pytest.approx(2.0, abs=1e-9)
    ratio = np.max(np.abs(oscillation)) / np.max(np.abs(out - np.mean(out)))
    assert ratio == pytest.approx(1000.0, rel=0.01)


@pytest.mark.parametrize("keep_taps", [1, 3, 7])
def test_mitigation_never_adds_energy(keep_taps):
    rng = np.random.default_rng(keep_taps)
    config = MitigationConfig(keep_taps=keep_taps)
    for _ in range(200):
        profile = rng.random(30) * rng.uniform(0.1, 10.0)
        out = mitigate_multipath(profile, config)
        assert np.sum(out ** 2) <= np.sum(profile ** 2) + 1e-9


def test_mitigation_rejects_bad_profiles():
    with pytest.raises(InvalidInputError):
        mitigate_multipath(np.ones(29))
    profile = np.ones(30)
    profile[4] = np.nan
    with pytest.raises(InvalidInputError):
        mitigate_multipath(profile)


def test_series_mitigation_matches_rowwise():
    rng = np.random.default_rng(2)
    matrix = AmplitudeMatrix(rng.random((12, 30)), warmup=3)
    out = mitigate_series(matrix)
    expected = np.array([mitigate_multipath(row) for row in matrix.rows])
    assert np.allclose(out.rows, expected, atol=1e-12)
    assert out.warmup == 3


def _profile(scenario):
    return np.abs(channel_response(scenario, None, np.array([0.0]), SubcarrierGrid())[0])


def test_in_tap_body_energy_survives_mitigation():
    scenario = ChannelScenario(
        los=PathComponent(magnitude=0.6, delay=0.0),
        body_paths=[PathComponent(magnitude=0.5, delay=0.4e-9)],
    )
    before = _profile(scenario)
    after = mitigate_multipath(before)
    assert np.max(np.abs(after - before) / before) < 2e-3


def test_clutter_change_is_suppressed():
    clean = ChannelScenario(los=PathComponent(magnitude=1.0, delay=0.0))
    cluttered = clean.model_copy(update={"clutter_paths": [PathComponent(magnitude=5e-4, delay=100e-9)]})
    pre_change = np.max(np.abs(_profile(cluttered) - _profile(clean)))
    post_change = np.max(np.abs(mitigate_multipath(_profile(cluttered)) - mitigate_multipath(_profile(clean))))
    assert post_change < pre_change / 500
