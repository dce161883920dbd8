"""Application configuration using Pydantic Settings."""
from pydantic_settings import BaseSettings
from pydantic import model_validator
from typing import List, Optional


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables (prefix WIPIN_)."""

    # Radio front end
    SAMPLE_RATE: float = 500.0
    CENTER_FREQUENCY: float = 5.0e9
    BANDWIDTH: float = 40.0e6

    # Noise removal
    FILTER_ORDER: int = 5
    FILTER_CUTOFF: float = 10.0
    ZERO_PHASE: bool = False

    # Multipath mitigation
    KEEP_TAPS: int = 1
    SUPPRESSION_DIVISOR: float = 1000.0

    # Classifier
    SVM_C: float = 1.0
    SVM_TOLERANCE: float = 1e-4
    SVM_MAX_EPOCHS: int = 1000
    SVR_EPSILON: float = 0.01
    REJECTION_PERCENTILE: float = 5.0

    # Runs
    SEED: int = 0
    N_JOBS: int = 1
    OUTPUT_DIR: str = "out"
    LOG_LEVEL: str = "INFO"

    # REST service
    MODEL_PATH: Optional[str] = None
    DEBUG: bool = False
    ALLOWED_ORIGINS: str = "http://localhost:3000"

    @property
    def cors_origins(self) -> List[str]:
        """Parse CORS origins from comma-separated string."""
        return [origin.strip() for origin in self.ALLOWED_ORIGINS.split(",")]

    @model_validator(mode='after')
    def check_nyquist(self) -> 'Settings':
        """Reject a cutoff the sample rate cannot represent."""
        if not 0 < self.FILTER_CUTOFF < self.SAMPLE_RATE / 2:
            raise ValueError(
                f"FILTER_CUTOFF={self.FILTER_CUTOFF} must lie in (0, SAMPLE_RATE/2={self.SAMPLE_RATE / 2})"
            )
        return self

    class Config:
        env_file = ".env"
        env_prefix = "WIPIN_"
        case_sensitive = True
        extra = "ignore"  # Ignore extra fields in .env


# Global settings instance
settings = Settings()
