"""Pydantic schemas for the multipath channel simulator."""
import cmath
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.models import NoisePreset

BODY_DELAY_LIMIT = 25e-9


class PathComponent(BaseModel):
    """One propagation path: complex gain (magnitude, phase) and delay."""
    model_config = ConfigDict(frozen=True)

    magnitude: float = Field(..., ge=0, le=1)
    phase: float = 0.0
    delay: float = Field(..., ge=0)

    @property
    def gain(self) -> complex:
        return cmath.rect(self.magnitude, self.phase)


class ChannelScenario(BaseModel):
    """Paths and impairments driving the channel model."""
    model_config = ConfigDict(frozen=True)

    los: PathComponent
    body_paths: List[PathComponent] = []
    clutter_paths: List[PathComponent] = []
    noise_sigma: float = Field(default=0.0, ge=0)
    jitter_sigma: float = Field(default=0.0, ge=0)
    breathing_amp: float = Field(default=0.0, ge=0)
    breathing_freq: float = Field(default=0.25, ge=0)
    breathing_phase: float = 0.0

    @field_validator("body_paths")
    @classmethod
    def body_paths_within_first_tap(cls, paths: List[PathComponent]) -> List[PathComponent]:
        for path in paths:
            if path.delay >= BODY_DELAY_LIMIT:
                raise ValueError(f"body path delay {path.delay} s is not below {BODY_DELAY_LIMIT} s")
        return paths


class CohortConfig(BaseModel):
    """Input document of `wipin simulate`."""
    n_subjects: int = Field(default=30, ge=2)
    sessions_per_subject: int = Field(default=30, ge=1)
    duration: float = Field(default=5.0, gt=0)
    sample_rate: float = Field(default=500.0, gt=0)
    preset: NoisePreset = NoisePreset.LAB
    seed: int = Field(default=0, ge=0)
    separation: float = Field(default=0.02, ge=0)
    max_retries: int = Field(default=10000, ge=1)
    scenario: Optional[ChannelScenario] = None
