"""Shared fixtures: small simulated cohorts and toy feature sets."""
import sys
import os

import numpy as np
import pytest

# Add current directory to path
sys.path.append(os.getcwd())

from app.models import N_FEATURES, BodyProfile, NoisePreset
from app.schemas.pipeline import PipelineConfig
from app.services.simulator import generate_cohort, generate_cohort_from_profiles

# lean and muscular versus heavy and slight: the widest attenuation gap the ranges allow
DISTINCT_BODIES = (
    BodyProfile(fat_rate=0.05, muscle_rate=0.6, shape_scale=0.9),
    BodyProfile(fat_rate=0.45, muscle_rate=0.2, shape_scale=1.1),
)


@pytest.fixture(scope="session")
def pipeline_config():
    return PipelineConfig()


@pytest.fixture(scope="session")
def clean_pair():
    """Two distinct subjects, six 1 s sessions each, no noise."""
    return generate_cohort_from_profiles(
        DISTINCT_BODIES, sessions_per_subject=6, duration=1.0, preset=NoisePreset.CLEAN, seed=7
    )


@pytest.fixture(scope="session")
def small_cohort():
    """Four well separated subjects, six 1 s sessions each."""
    ds, profiles = generate_cohort(
        4, 6, duration=1.0, preset=NoisePreset.CLEAN, seed=3, separation=0.15
    )
    return ds, profiles


def gaussian_classes(n_classes: int, per_class: int, seed: int, spread: float = 0.1, dim: int = N_FEATURES):
    """Well separated Gaussian clusters with labels 1..n_classes."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-5.0, 5.0, size=(n_classes, dim))
    X = np.concatenate([c + spread * rng.standard_normal((per_class, dim)) for c in centers])
    y = np.repeat(np.arange(1, n_classes + 1), per_class)
    return X, y
