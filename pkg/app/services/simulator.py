"""Synthetic CSI from a multipath channel model with body-dependent frequency-selective attenuation.

H(f) = a_los e^{-j2 pi f tau_los}
     + sum_body curve(f) a_k (1 + breathing(t)) e^{-j2 pi f tau_k}
     + sum_clutter a_k e^{-j2 pi f tau_k}
     + noise

Random draws use numpy's PCG64 bit generator. Every recording gets its own stream seeded by
SeedSequence([master_seed, subject, session]); body profiles use SeedSequence([master_seed, 0, 0]).
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.exceptions import CohortError, InvalidInputError
from app.models import BodyProfile, CsiFrame, CsiSeries, Dataset, DatasetRecord, NoisePreset, SubcarrierGrid
from app.schemas.simulation import ChannelScenario, PathComponent

logger = logging.getLogger(__name__)

# noise_sigma, jitter_sigma, clutter_scale
NOISE_PRESETS: Dict[NoisePreset, Tuple[float, float, float]] = {
    NoisePreset.CLEAN: (0.0, 0.0, 1.0),
    NoisePreset.LAB: (0.02, 0.05, 1.0),
    NoisePreset.CORRIDOR: (0.05, 0.05, 3.0),
}

CLUTTER_RATE = 2.0
CLUTTER_CAP = 5
CLUTTER_GAIN = (0.05, 0.2)
CLUTTER_DELAY = (50e-9, 400e-9)
BREATHING_FREQ = 0.25
BREATHING_AMP = 0.02

# torso scattering: a fan of unit reflections one carrier period apart
BODY_FAN_SIZE = 24

FAT_RANGE = (0.05, 0.45)
MUSCLE_RANGE = (0.2, 0.6)
SHAPE_RANGE = (0.8, 1.2)


def derive_rng(master_seed: int, subject: int, session: int) -> np.random.Generator:
    """Independent PCG64 stream for one (subject, session) recording."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, subject, session])))


def default_scenario(
    preset: NoisePreset = NoisePreset.LAB,
    grid: Optional[SubcarrierGrid] = None,
) -> ChannelScenario:
    """Line of sight plus a dense body fan, all in phase at the carrier and inside the first tap.

    Body delays are whole carrier periods (0.2 ns at 5 GHz), so the fan adds coherently.
    """
    grid = grid or SubcarrierGrid()
    noise_sigma, jitter_sigma, _ = NOISE_PRESETS[NoisePreset(preset)]
    period = 1.0 / grid.center_frequency
    return ChannelScenario(
        los=PathComponent(magnitude=1.0, delay=0.0),
        body_paths=[PathComponent(magnitude=1.0, delay=k * period) for k in range(1, BODY_FAN_SIZE + 1)],
        noise_sigma=noise_sigma,
        jitter_sigma=jitter_sigma,
        breathing_amp=BREATHING_AMP,
        breathing_freq=BREATHING_FREQ,
    )


def quadrature_phase(delay: float, carrier: float, sign: int) -> float:
    """Phase that puts a path of this delay at +-90 degrees to a zero-delay path at the carrier."""
    return math.fmod(2 * math.pi * carrier * delay + sign * math.pi / 2, 2 * math.pi)


def perturb_session(
    scenario: ChannelScenario,
    rng: np.random.Generator,
    preset: NoisePreset = NoisePreset.LAB,
    grid: Optional[SubcarrierGrid] = None,
) -> ChannelScenario:
    """Session-to-session variability: fresh clutter paths and breathing phase.

    Clutter arrives in quadrature with the direct path at the carrier (random sign), so to
    first order it reshapes the amplitude profile without shifting its band average.
    """
    carrier = (grid or SubcarrierGrid()).center_frequency
    scale = NOISE_PRESETS[NoisePreset(preset)][2]
    n_clutter = int(min(rng.poisson(CLUTTER_RATE * scale), CLUTTER_CAP * scale))
    clutter = []
    for _ in range(n_clutter):
        magnitude = float(rng.uniform(*CLUTTER_GAIN))
        delay = float(rng.uniform(*CLUTTER_DELAY))
        sign = 1 if rng.random() < 0.5 else -1
        clutter.append(PathComponent(magnitude=magnitude, phase=quadrature_phase(delay, carrier, sign), delay=delay))
    return scenario.model_copy(update={
        "clutter_paths": [*scenario.clutter_paths, *clutter],
        "breathing_phase": float(rng.uniform(0.0, 2 * math.pi)),
    })


def _path_response(paths: Sequence[PathComponent], freqs: np.ndarray) -> np.ndarray:
    response = np.zeros(freqs.shape, dtype=np.complex128)
    for path in paths:
        response += path.gain * np.exp(-2j * np.pi * freqs * path.delay)
    return response


def channel_response(
    scenario: ChannelScenario,
    body: Optional[BodyProfile],
    times: np.ndarray,
    grid: SubcarrierGrid,
) -> np.ndarray:
    """Noise-free channel, shape (len(times), 30)."""
    freqs = grid.subcarrier_frequencies
    static = _path_response([scenario.los], freqs) + _path_response(scenario.clutter_paths, freqs)
    curve = body.absorption_curve if body is not None else np.ones_like(freqs)
    body_part = curve * _path_response(scenario.body_paths, freqs)
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    sway = 1.0 + scenario.breathing_amp * np.sin(
        2 * np.pi * scenario.breathing_freq * times + scenario.breathing_phase
    )
    return static[None, :] + sway[:, None] * body_part[None, :]


def _impair(H: np.ndarray, scenario: ChannelScenario, rng: np.random.Generator) -> np.ndarray:
    if scenario.jitter_sigma > 0:
        H = H * (1.0 + scenario.jitter_sigma * rng.standard_normal(H.shape))
    if scenario.noise_sigma > 0:
        noise = rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape)
        H = H + scenario.noise_sigma * noise / math.sqrt(2.0)
    return H


def synthesize_frame(
    scenario: ChannelScenario,
    body: Optional[BodyProfile],
    t: float,
    grid: SubcarrierGrid,
    rng: np.random.Generator,
) -> CsiFrame:
    return CsiFrame(_impair(channel_response(scenario, body, np.array([t]), grid), scenario, rng)[0])


def frame_count(duration: float, sample_rate: float) -> int:
    """floor(duration * fs), tolerant to binary rounding of the product."""
    return int(math.floor(duration * sample_rate + 1e-9))


def synthesize_series(
    scenario: ChannelScenario,
    body: Optional[BodyProfile],
    duration: float,
    sample_rate: float,
    grid: Optional[SubcarrierGrid] = None,
    seed: int = 0,
    subject_label: Optional[str] = None,
    session_id: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> CsiSeries:
    """floor(duration * fs) frames sampled at t = n / fs with fresh impairments per frame."""
    if not (duration > 0 and sample_rate > 0):
        raise InvalidInputError("duration and sample rate must be positive")
    grid = grid or SubcarrierGrid()
    rng = rng or np.random.default_rng(seed)
    times = np.arange(frame_count(duration, sample_rate)) / sample_rate
    H = _impair(channel_response(scenario, body, times, grid), scenario, rng)
    return CsiSeries(H, sample_rate=sample_rate, grid=grid, subject_label=subject_label, session_id=session_id)


def draw_body_profiles(
    n_subjects: int,
    rng: np.random.Generator,
    separation: float = 0.02,
    max_retries: int = 10000,
) -> List[BodyProfile]:
    """Uniform body parameters with a minimum pairwise distance in (fat, muscle, shape) space."""
    lows = np.array([FAT_RANGE[0], MUSCLE_RANGE[0], SHAPE_RANGE[0]])
    highs = np.array([FAT_RANGE[1], MUSCLE_RANGE[1], SHAPE_RANGE[1]])
    accepted: List[np.ndarray] = []
    rejections = 0
    while len(accepted) < n_subjects:
        candidate = rng.uniform(lows, highs)
        if all(np.linalg.norm(candidate - other) >= separation for other in accepted):
            accepted.append(candidate)
            continue
        rejections += 1
        if rejections > max_retries:
            raise CohortError(
                f"placed only {len(accepted)} of {n_subjects} subjects at separation {separation} "
                f"after {max_retries} retries; try a smaller separation"
            )
    if rejections:
        logger.debug(f"Body profile placement needed {rejections} retries")
    return [BodyProfile(*map(float, params)) for params in accepted]


def iter_cohort(
    profiles: Sequence[BodyProfile],
    sessions_per_subject: int,
    duration: float = 5.0,
    sample_rate: float = 500.0,
    preset: NoisePreset = NoisePreset.LAB,
    seed: int = 0,
    grid: Optional[SubcarrierGrid] = None,
    scenario: Optional[ChannelScenario] = None,
) -> Iterator[DatasetRecord]:
    """Recordings of every subject and session, generated lazily in (subject, session) order."""
    for subject, session in _cohort_keys(len(profiles), sessions_per_subject):
        yield _cohort_record(profiles, subject, session, duration, sample_rate, preset, seed, grid, scenario)


def _cohort_keys(n_subjects: int, sessions_per_subject: int) -> List[Tuple[int, int]]:
    return [(s, r) for s in range(1, n_subjects + 1) for r in range(1, sessions_per_subject + 1)]


def _cohort_record(
    profiles: Sequence[BodyProfile],
    subject: int,
    session: int,
    duration: float,
    sample_rate: float,
    preset: NoisePreset,
    seed: int,
    grid: Optional[SubcarrierGrid],
    scenario: Optional[ChannelScenario],
) -> DatasetRecord:
    rng = derive_rng(seed, subject, session)
    base = scenario or default_scenario(preset, grid)
    series = synthesize_series(
        perturb_session(base, rng, preset, grid),
        profiles[subject - 1],
        duration,
        sample_rate,
        grid=grid,
        subject_label=str(subject),
        session_id=session,
        rng=rng,
    )
    return DatasetRecord(subject, session, series)


def cohort_manifest(
    profiles: Sequence[BodyProfile],
    sessions_per_subject: int,
    duration: float,
    sample_rate: float,
    preset: NoisePreset,
    seed: int,
    separation: Optional[float] = None,
) -> Dict:
    return {
        "generator": {
            "kind": "multipath-simulator",
            "rng": "PCG64 SeedSequence([seed, subject, session])",
            "seed": seed,
            "preset": NoisePreset(preset).value,
            "n_subjects": len(profiles),
            "sessions_per_subject": sessions_per_subject,
            "duration": duration,
            "sample_rate": sample_rate,
            "separation": separation,
            "profiles": [
                {"fat_rate": p.fat_rate, "muscle_rate": p.muscle_rate, "shape_scale": p.shape_scale}
                for p in profiles
            ],
        },
        "labels": {str(s): str(s) for s in range(1, len(profiles) + 1)},
    }


def generate_cohort_from_profiles(
    profiles: Sequence[BodyProfile],
    sessions_per_subject: int,
    duration: float = 5.0,
    sample_rate: float = 500.0,
    preset: NoisePreset = NoisePreset.LAB,
    seed: int = 0,
    grid: Optional[SubcarrierGrid] = None,
    scenario: Optional[ChannelScenario] = None,
    n_jobs: int = 1,
    separation: Optional[float] = None,
) -> Dataset:
    """Materialized cohort for explicit body profiles; parallel and serial runs are identical."""
    keys = _cohort_keys(len(profiles), sessions_per_subject)

    def build(key: Tuple[int, int]) -> DatasetRecord:
        return _cohort_record(profiles, key[0], key[1], duration, sample_rate, preset, seed, grid, scenario)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            records = list(pool.map(build, keys))
    else:
        records = [build(key) for key in keys]
    manifest = cohort_manifest(profiles, sessions_per_subject, duration, sample_rate, preset, seed, separation)
    return Dataset(tuple(records), manifest)


def generate_cohort(
    n_subjects: int,
    sessions_per_subject: int,
    duration: float = 5.0,
    sample_rate: float = 500.0,
    preset: NoisePreset = NoisePreset.LAB,
    seed: int = 0,
    separation: float = 0.02,
    max_retries: int = 10000,
    grid: Optional[SubcarrierGrid] = None,
    scenario: Optional[ChannelScenario] = None,
    n_jobs: int = 1,
) -> Tuple[Dataset, List[BodyProfile]]:
    """Draw separated body profiles, then record every subject's sessions.

    Args:
        n_subjects: Cohort size, at least 2
        sessions_per_subject: Recordings per subject
        duration: Seconds per recording
        sample_rate: Frames per second
        preset: Noise preset for impairments and clutter density
        seed: Master seed; every recording derives its own stream from it
        separation: Minimum pairwise distance of (fat, muscle, shape)
        max_retries: Rejected placements tolerated before giving up
        grid: Subcarrier layout (default 5 GHz, 40 MHz)
        scenario: Base channel; defaults to default_scenario(preset)
        n_jobs: Worker threads

    Returns:
        (dataset, ground-truth body profiles in subject order)

    Raises:
        CohortError: the separation cannot be met
    """
    if n_subjects < 2:
        raise InvalidInputError(f"a cohort needs at least two subjects, got {n_subjects}")
    profiles = draw_body_profiles(n_subjects, derive_rng(seed, 0, 0), separation, max_retries)
    ds = generate_cohort_from_profiles(
        profiles, sessions_per_subject, duration, sample_rate, preset, seed, grid, scenario, n_jobs, separation
    )
    logger.info(
        f"Generated cohort: {n_subjects} subjects x {sessions_per_subject} sessions, "
        f"{frame_count(duration, sample_rate)} frames each, preset {NoisePreset(preset).value}"
    )
    return ds, profiles


def profiles_from_manifest(manifest: Dict) -> List[BodyProfile]:
    """Ground-truth body profiles recorded by the simulator in a dataset manifest."""
    entries = manifest.get("generator", {}).get("profiles")
    if not entries:
        raise InvalidInputError("dataset manifest carries no simulator body profiles")
    return [BodyProfile(e["fat_rate"], e["muscle_rate"], e["shape_scale"]) for e in entries]
