"""Pydantic schemas for the processing pipeline configuration."""
import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from app.config import Settings


class ButterworthSpec(BaseModel):
    """Low-pass noise removal filter."""
    model_config = ConfigDict(frozen=True)

    order: int = Field(default=5, ge=1)
    cutoff: float = Field(default=10.0, gt=0)
    sample_rate: float = Field(default=500.0, gt=0)

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    @property
    def warmup(self) -> int:
        """Samples flagged as filter transient, ceil(fs / cutoff)."""
        return math.ceil(self.sample_rate / self.cutoff)


class MitigationConfig(BaseModel):
    """Delay-domain tap suppression."""
    model_config = ConfigDict(frozen=True)

    keep_taps: int = Field(default=1, ge=1, le=30)
    suppression_divisor: float = Field(default=1000.0, ge=1.0)


class TrainConfig(BaseModel):
    """Linear SVM / SVR solver settings."""
    model_config = ConfigDict(frozen=True)

    C: float = Field(default=1.0, gt=0)
    tolerance: float = Field(default=1e-4, gt=0)
    max_epochs: int = Field(default=1000, ge=1)
    seed: int = 0
    epsilon: float = Field(default=0.01, ge=0)


class PipelineConfig(BaseModel):
    """Everything that turns a CSI recording into an identification decision."""
    model_config = ConfigDict(frozen=True)

    filter: ButterworthSpec = ButterworthSpec()
    zero_phase: bool = False
    mitigation: MitigationConfig = MitigationConfig()
    train: TrainConfig = TrainConfig()
    # seconds of CSI consumed per identification; None uses the whole recording
    window: Optional[float] = Field(default=None, gt=0)
    rejection_percentile: float = Field(default=5.0, gt=0, le=100)

    @classmethod
    def from_settings(cls, settings: Settings) -> "PipelineConfig":
        return cls(
            filter=ButterworthSpec(
                order=settings.FILTER_ORDER,
                cutoff=settings.FILTER_CUTOFF,
                sample_rate=settings.SAMPLE_RATE,
            ),
            zero_phase=settings.ZERO_PHASE,
            mitigation=MitigationConfig(
                keep_taps=settings.KEEP_TAPS,
                suppression_divisor=settings.SUPPRESSION_DIVISOR,
            ),
            train=TrainConfig(
                C=settings.SVM_C,
                tolerance=settings.SVM_TOLERANCE,
                max_epochs=settings.SVM_MAX_EPOCHS,
                seed=settings.SEED,
                epsilon=settings.SVR_EPSILON,
            ),
            rejection_percentile=settings.REJECTION_PERCENTILE,
        )

    def with_sample_rate(self, sample_rate: float) -> "PipelineConfig":
        """Same config with the filter retargeted to a recording's sample rate."""
        if sample_rate == self.filter.sample_rate:
            return self
        return self.model_copy(update={"filter": self.filter.model_copy(update={"sample_rate": sample_rate})})
