"""Noise removal (Butterworth low-pass) and multipath mitigation (delay-tap suppression)."""
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal

from app.exceptions import EmptyInputError, InvalidInputError, InvalidSpecError
from app.models import N_SUBCARRIERS, AmplitudeMatrix
from app.schemas.pipeline import ButterworthSpec, MitigationConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FilterCoefficients:
    """Cascade of second-order sections, each normalized to unit DC gain, times an overall gain.

    `sections` rows are (b0, b1, b2, a1, a2); a0 is 1.
    """
    sections: np.ndarray
    gain: float
    sample_rate: float
    warmup: int

    @property
    def sos(self) -> np.ndarray:
        """scipy second-order-section layout with the overall gain folded into the first section."""
        sos = np.column_stack([
            self.sections[:, :3],
            np.ones(len(self.sections)),
            self.sections[:, 3:],
        ])
        sos[0, :3] *= self.gain
        return sos

    @property
    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots([1.0, a1, a2]) for a1, a2 in self.sections[:, 3:]])

    @property
    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles) < 1.0))

    def frequency_response(self, freqs) -> np.ndarray:
        """Complex response at the given frequencies in Hz."""
        _, h = signal.sosfreqz(self.sos, worN=np.atleast_1d(np.asarray(freqs, dtype=float)), fs=self.sample_rate)
        return h


def design_butterworth_lowpass(spec: ButterworthSpec) -> FilterCoefficients:
    """Digital Butterworth low-pass via the pre-warped bilinear transform, as second-order sections."""
    if not 0 < spec.cutoff < spec.nyquist:
        raise InvalidSpecError(f"cutoff {spec.cutoff} Hz must lie in (0, {spec.nyquist}) Hz")
    return _design_cached(spec.order, spec.cutoff, spec.sample_rate)


@lru_cache(maxsize=32)
def _design_cached(order: int, cutoff: float, sample_rate: float) -> FilterCoefficients:
    sos = signal.butter(order, cutoff, btype="lowpass", fs=sample_rate, output="sos")
    b = sos[:, :3] / sos[:, 3:4]
    a = sos[:, 3:] / sos[:, 3:4]
    section_dc = b.sum(axis=1) / a.sum(axis=1)
    sections = np.column_stack([b / section_dc[:, None], a[:, 1:]])
    sections.setflags(write=False)
    coeffs = FilterCoefficients(
        sections=sections,
        gain=float(np.prod(section_dc)),
        sample_rate=sample_rate,
        warmup=ButterworthSpec(order=order, cutoff=cutoff, sample_rate=sample_rate).warmup,
    )
    if not coeffs.is_stable:
        raise InvalidSpecError(f"order-{order} design at {cutoff} Hz is numerically unstable")
    logger.debug(f"Designed order-{order} Butterworth low-pass, cutoff {cutoff} Hz at {sample_rate} Hz")
    return coeffs


def apply_lowpass(
    matrix: AmplitudeMatrix,
    coeffs: FilterCoefficients,
    zero_phase: bool = False,
) -> AmplitudeMatrix:
    """Filter each subcarrier column independently; output clamped at 0."""
    if len(matrix) == 0:
        raise EmptyInputError("cannot filter an empty amplitude matrix")
    rows = matrix.rows
    sos = coeffs.sos
    if zero_phase and len(rows) > 3 * (2 * len(sos) + 1):
        filtered = signal.sosfiltfilt(sos, rows, axis=0)
    else:
        # steady-state start: a constant column passes through unchanged from the first sample
        zi = signal.sosfilt_zi(sos)[:, :, None] * rows[0][None, None, :]
        filtered, _ = signal.sosfilt(sos, rows, axis=0, zi=zi)
    return AmplitudeMatrix(
        np.maximum(filtered, 0.0),
        sample_rate=matrix.sample_rate,
        warmup=0 if zero_phase else coeffs.warmup,
    )


def _suppress(taps: np.ndarray, config: MitigationConfig) -> np.ndarray:
    taps = taps.copy()
    taps[..., config.keep_taps:] /= config.suppression_divisor
    return taps


def mitigate_multipath(frame_amplitudes, config: MitigationConfig = MitigationConfig()) -> np.ndarray:
    """|FFT(suppress(IFFT(h)))| for one 30-value amplitude profile."""
    h = np.asarray(frame_amplitudes, dtype=np.float64)
    if h.shape != (N_SUBCARRIERS,):
        raise InvalidInputError(f"expected {N_SUBCARRIERS} amplitudes, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise InvalidInputError("amplitude profile holds non-finite values")
    return np.abs(np.fft.fft(_suppress(np.fft.ifft(h), config)))


def mitigate_series(matrix: AmplitudeMatrix, config: MitigationConfig = MitigationConfig()) -> AmplitudeMatrix:
    """Row-wise mitigate_multipath."""
    if len(matrix) == 0:
        raise EmptyInputError("cannot mitigate an empty amplitude matrix")
    taps = np.fft.ifft(matrix.rows, axis=1)
    profile = np.abs(np.fft.fft(_suppress(taps, config), axis=1))
    return AmplitudeMatrix(profile, sample_rate=matrix.sample_rate, warmup=matrix.warmup)
