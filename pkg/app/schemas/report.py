"""Pydantic schemas for evaluation and timing reports."""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class AccuracyRow(BaseModel):
    """Accuracy statistics of one sweep point across draws."""
    k: int
    window: Optional[float] = None
    n_frames: Optional[int] = None
    mean: float = Field(..., ge=0, le=1)
    q1: float
    q2: float
    q3: float
    min: float
    max: float
    n_draws: int


class RejectionRow(BaseModel):
    """Balanced-accuracy statistics of one legal-user volume."""
    k: int
    mean_ba: float = Field(..., ge=0, le=1)
    tpr: float = Field(..., ge=0, le=1)
    tnr: float = Field(..., ge=0, le=1)
    q1: float
    q2: float
    q3: float
    mean_threshold: float
    n_draws: int


class DriftRow(BaseModel):
    strategy: str
    train_days: int
    test_day: Optional[int] = None
    accuracy: float = Field(..., ge=0, le=1)
    n_test: int


class RegressionRow(BaseModel):
    target: str
    correlation: float
    rmse: float
    n_test: int


class EvaluationReport(BaseModel):
    """Summary rows plus per-instance prediction log of one evaluation run."""
    kind: str
    seed: int
    rows: List[Dict[str, Any]]
    instances: List[Dict[str, Any]] = []
    metadata: Dict[str, Any] = {}


class StageTiming(BaseModel):
    median_ms: float
    min_ms: float
    max_ms: float


class BenchReport(BaseModel):
    """Per-stage wall-clock timing of one identification."""
    n_reps: int
    n_frames: int
    n_classes: int
    stages: Dict[str, StageTiming]
    compute_total_ms: float
    machine: Dict[str, str]
