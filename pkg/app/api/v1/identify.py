"""Identification endpoints."""
import io
import logging
from functools import lru_cache

from fastapi import APIRouter, Depends, File, HTTPException, UploadFile, status

from app.config import settings
from app.exceptions import EmptyInputError, ParseError, WipinError
from app.models import IdentifierModel
from app.schemas.identify import DecisionResponse, ModelSummary
from app.schemas.pipeline import PipelineConfig
from app.services.classifier import identify, load_identifier
from app.services.csi_io import read_csv
from app.services.harness import run_pipeline

logger = logging.getLogger(__name__)

router = APIRouter()


@lru_cache(maxsize=1)
def _load_model(path: str) -> IdentifierModel:
    logger.info(f"Loading identifier model from {path}")
    return load_identifier(path)


def get_identifier() -> IdentifierModel:
    """Dependency: the model named by WIPIN_MODEL_PATH, loaded once."""
    if not settings.MODEL_PATH:
        raise HTTPException(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE,
            detail="No identifier model configured (set WIPIN_MODEL_PATH)"
        )
    try:
        return _load_model(settings.MODEL_PATH)
    except (OSError, WipinError) as e:
        logger.error(f"Could not load model {settings.MODEL_PATH}: {e}")
        raise HTTPException(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE,
            detail=f"Identifier model unavailable: {e}"
        )


def get_pipeline_config() -> PipelineConfig:
    return PipelineConfig.from_settings(settings)


@router.get("/model", response_model=ModelSummary)
def model_summary(model: IdentifierModel = Depends(get_identifier)):
    """Describe the loaded identifier."""
    return ModelSummary(n_classes=model.n_classes, threshold=model.threshold)


@router.post("/identify", response_model=DecisionResponse)
async def identify_recording(
    file: UploadFile = File(...),
    model: IdentifierModel = Depends(get_identifier),
    cfg: PipelineConfig = Depends(get_pipeline_config),
):
    """Identify the person in an uploaded CSI CSV recording."""
    content = await file.read()
    logger.info(f"Identifying upload {file.filename} ({len(content)} bytes)")
    try:
        series = read_csv(io.StringIO(content.decode("utf-8"), newline=""), source=file.filename or "<upload>")
    except UnicodeDecodeError:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail="Upload is not UTF-8 text"
        )
    except (ParseError, EmptyInputError) as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))

    try:
        decision = identify(model, run_pipeline(series, cfg))
    except WipinError as e:
        logger.warning(f"Identification of {file.filename} failed: {e}")
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))

    logger.info(f"Decision for {file.filename}: {decision.kind.value} (confidence {decision.confidence:.4f})")
    return DecisionResponse(
        decision=decision.kind,
        identity=decision.identity,
        confidence=decision.confidence,
        threshold=decision.threshold,
    )
