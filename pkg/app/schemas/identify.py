"""Pydantic schemas for model files, dataset manifests and identification decisions."""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from app.models import N_FEATURES, DecisionKind


class NormalizerDocument(BaseModel):
    """Normalizer JSON: per-feature training extremes."""
    min: List[float]
    max: List[float]

    @model_validator(mode='after')
    def check_lengths(self) -> 'NormalizerDocument':
        if len(self.min) != len(self.max):
            raise ValueError("min and max must have equal length")
        return self


class SvmModelDocument(BaseModel):
    class_id: int = Field(..., ge=1)
    bias: float
    weights: List[float] = Field(..., min_length=N_FEATURES, max_length=N_FEATURES)


class IdentifierModelDocument(BaseModel):
    """Serialized IdentifierModel."""
    n_classes: int = Field(..., ge=2)
    threshold: float = Field(..., ge=0)
    normalizer: NormalizerDocument
    models: List[SvmModelDocument]

    @model_validator(mode='after')
    def check_classes(self) -> 'IdentifierModelDocument':
        if len(self.models) != self.n_classes:
            raise ValueError(f"n_classes={self.n_classes} but {len(self.models)} models present")
        return self


class SvrModelDocument(BaseModel):
    """Serialized linear SVR."""
    epsilon: float = Field(..., ge=0)
    bias: float
    weights: List[float] = Field(..., min_length=N_FEATURES, max_length=N_FEATURES)
    normalizer: NormalizerDocument


class DecisionResponse(BaseModel):
    """Decision JSON emitted by `wipin identify` and the REST service."""
    decision: DecisionKind
    identity: Optional[int] = None
    confidence: float
    threshold: float


class ModelSummary(BaseModel):
    n_classes: int
    threshold: float
    n_features: int = N_FEATURES


class ManifestRecord(BaseModel):
    subject: int = Field(..., ge=1)
    session: int
    file: str


class DatasetManifest(BaseModel):
    """manifest.json of a dataset directory."""
    records: List[ManifestRecord] = []
    generator: Dict[str, Any] = {}
    labels: Dict[str, str] = {}
