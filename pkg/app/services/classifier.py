"""One-vs-all linear SVM identification, softmax confidence, rejection threshold and body-rate SVR."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, special

from app.exceptions import DegenerateModelError, InvalidInputError, InvalidLabelsError, ParseError
from app.models import (
    Decision,
    DecisionKind,
    FeatureVector,
    IdentifierModel,
    SvmModel,
    SvrModel,
)
from app.schemas.identify import IdentifierModelDocument, SvmModelDocument, SvrModelDocument
from app.schemas.pipeline import TrainConfig
from app.services.features import (
    fit_normalizer,
    normalize_matrix,
    normalizer_from_document,
    normalizer_to_document,
)

logger = logging.getLogger(__name__)

Features = Union[Sequence[FeatureVector], np.ndarray]


def _feature_matrix(features: Features) -> np.ndarray:
    if isinstance(features, np.ndarray):
        X = np.asarray(features, dtype=np.float64)
    else:
        X = np.array([f.values for f in features], dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidInputError(f"expected a non-empty (n, d) feature matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("feature matrix holds non-finite values")
    return X


# --- L2-regularized, L2-loss primal objectives ------------------------------------------------

def primal_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, C: float) -> float:
    """(1/2)|w|^2 + C * sum(max(0, 1 - y (w.x + b))^2); the bias is not regularized."""
    slack = np.maximum(0.0, 1.0 - y * (X @ w + b))
    return float(0.5 * w @ w + C * slack @ slack)


def _svc_objective(params: np.ndarray, X: np.ndarray, y: np.ndarray, C: float) -> Tuple[float, np.ndarray]:
    w, b = params[:-1], params[-1]
    slack = np.maximum(0.0, 1.0 - y * (X @ w + b))
    coef = -2.0 * C * y * slack
    grad = np.empty_like(params)
    grad[:-1] = w + X.T @ coef
    grad[-1] = coef.sum()
    return float(0.5 * w @ w + C * slack @ slack), grad


def svr_objective(w: np.ndarray, b: float, X: np.ndarray, t: np.ndarray, C: float, epsilon: float) -> float:
    """(1/2)|w|^2 + C * sum(max(0, |w.x + b - t| - eps)^2)."""
    excess = np.maximum(0.0, np.abs(X @ w + b - t) - epsilon)
    return float(0.5 * w @ w + C * excess @ excess)


def _svr_objective(params: np.ndarray, X: np.ndarray, t: np.ndarray, C: float, epsilon: float) -> Tuple[float, np.ndarray]:
    w, b = params[:-1], params[-1]
    residual = X @ w + b - t
    excess = np.maximum(0.0, np.abs(residual) - epsilon)
    coef = 2.0 * C * np.sign(residual) * excess
    grad = np.empty_like(params)
    grad[:-1] = w + X.T @ coef
    grad[-1] = coef.sum()
    return float(0.5 * w @ w + C * excess @ excess), grad


def _minimize(fun, n_params: int, args: tuple, cfg: TrainConfig) -> np.ndarray:
    # squared losses are continuously differentiable, so a quasi-Newton method reaches the optimum
    result = optimize.minimize(
        fun,
        np.zeros(n_params),
        args=args,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": cfg.max_epochs, "gtol": cfg.tolerance, "ftol": 1e-15, "maxcor": 20},
    )
    if not result.success:
        logger.warning(f"Solver stopped early: {result.message}")
    return result.x


def _fit_binary(X: np.ndarray, y: np.ndarray, cfg: TrainConfig, class_id: int) -> SvmModel:
    params = _minimize(_svc_objective, X.shape[1] + 1, (X, y, cfg.C), cfg)
    return SvmModel(params[:-1].copy(), float(params[-1]), class_id)


def _check_labels(labels: Sequence[int], n: int) -> Tuple[np.ndarray, int]:
    y = np.asarray(labels)
    if y.shape != (n,):
        raise InvalidInputError(f"{n} feature vectors but {y.size} labels")
    classes = sorted(set(y.tolist()))
    if len(classes) < 2:
        raise InvalidLabelsError(f"one-vs-all training needs at least two classes, got {classes}")
    if classes != list(range(1, len(classes) + 1)):
        raise InvalidLabelsError(f"labels must cover 1..N, got {classes}")
    return y.astype(int), len(classes)


def train_one_vs_all(features: Features, labels: Sequence[int], cfg: TrainConfig = TrainConfig(), n_jobs: int = 1) -> List[SvmModel]:
    """One binary classifier per class (class i = +1, every other class = -1)."""
    X = _feature_matrix(features)
    y, n_classes = _check_labels(labels, X.shape[0])

    def fit(class_id: int) -> SvmModel:
        return _fit_binary(X, np.where(y == class_id, 1.0, -1.0), cfg, class_id)

    class_ids = range(1, n_classes + 1)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            models = list(pool.map(fit, class_ids))
    else:
        models = [fit(c) for c in class_ids]
    logger.debug(f"Trained {n_classes} one-vs-all classifiers on {X.shape[0]} instances")
    return models


def scores(models: Sequence[SvmModel], x: Union[FeatureVector, np.ndarray]) -> np.ndarray:
    """score_i = w_i . x + b_i; x is a normalized vector or a matrix of row vectors."""
    values = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    W = np.stack([m.weights for m in models])
    b = np.array([m.bias for m in models])
    return values @ W.T + b


def predict(score_values) -> int:
    """1-based index of the highest score; ties go to the smallest class id."""
    s = np.asarray(score_values)
    if s.ndim != 1 or s.size < 2:
        raise InvalidInputError("prediction needs at least two scores")
    return int(np.argmax(s)) + 1


def predict_many(score_matrix: np.ndarray) -> np.ndarray:
    return np.argmax(score_matrix, axis=1) + 1


def softmax(score_values) -> np.ndarray:
    """Confidence distribution over classes; shift invariant and overflow safe."""
    return special.softmax(np.asarray(score_values, dtype=np.float64), axis=-1)


def nearest_rank(values: Sequence[float], percentile: float) -> float:
    """Order statistic at 1-based rank ceil(p/100 * n) of the ascending sample."""
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    rank = max(1, math.ceil(percentile * len(ordered) / 100.0))
    return float(ordered[min(rank, len(ordered)) - 1])


def learn_threshold(
    models: Sequence[SvmModel],
    training_features: Features,
    training_labels: Sequence[int],
    percentile: float = 5.0,
) -> float:
    """Low percentile of max-softmax over correctly classified training instances."""
    X = _feature_matrix(training_features)
    y = np.asarray(training_labels)
    raw = scores(models, X)
    confidence = softmax(raw)
    predicted = predict_many(raw)
    surviving = confidence.max(axis=1)[predicted == y]
    if surviving.size == 0:
        raise DegenerateModelError("every training instance is misclassified; no threshold can be learned")
    threshold = nearest_rank(surviving, percentile)
    logger.debug(f"Threshold {threshold:.4f} from {surviving.size}/{len(y)} correctly classified instances")
    return threshold


def build_identifier(
    raw_features: Features,
    labels: Sequence[int],
    cfg: TrainConfig = TrainConfig(),
    percentile: float = 5.0,
    n_jobs: int = 1,
) -> IdentifierModel:
    """Fit the normalizer, train the classifiers and learn the rejection threshold.

    Args:
        raw_features: Un-normalized training vectors, one row per recording
        labels: Class ids covering 1..N
        cfg: Trainer settings (C, tolerance, iteration cap)
        percentile: Nearest-rank percentile of correct-instance confidence used as threshold
        n_jobs: Worker threads, one binary classifier each

    Returns:
        IdentifierModel ready for identify()

    Raises:
        InvalidLabelsError: fewer than two classes or labels not 1..N
        DegenerateModelError: no training instance is classified correctly
    """
    X = _feature_matrix(raw_features)
    normalizer = fit_normalizer(X)
    Xn = normalize_matrix(X, normalizer)
    models = train_one_vs_all(Xn, labels, cfg, n_jobs=n_jobs)
    threshold = learn_threshold(models, Xn, labels, percentile)
    return IdentifierModel(tuple(models), normalizer, threshold)


def identify(model: IdentifierModel, raw_features: Union[FeatureVector, np.ndarray]) -> Decision:
    """Accept the top class when its softmax confidence is not lower than the threshold."""
    values = raw_features.values if isinstance(raw_features, FeatureVector) else np.asarray(raw_features, dtype=np.float64)
    raw = scores(model.models, normalize_matrix(values, model.normalizer))
    best = float(softmax(raw).max())
    if best < model.threshold:
        return Decision(DecisionKind.REJECT, best, model.threshold)
    return Decision(DecisionKind.ACCEPT, best, model.threshold, identity=predict(raw))


def identify_many(model: IdentifierModel, raw_features: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized identify: (predicted ids, max confidences, accepted flags)."""
    raw = normalize_matrix(raw_features, model.normalizer) @ model.weight_matrix.T + model.biases
    best = softmax(raw).max(axis=1)
    return predict_many(raw), best, best >= model.threshold


# --- body-rate regression -------------------------------------------------------------------

def train_svr(features: Features, targets: Sequence[float], cfg: TrainConfig = TrainConfig()) -> SvrModel:
    """Linear epsilon-insensitive L2-loss SVR on normalized features.

    Args:
        features: Un-normalized training vectors
        targets: One real target per vector (e.g. body fat rate)
        cfg: Trainer settings; `epsilon` is the insensitive-zone half width in target units

    Returns:
        SvrModel carrying its own normalizer
    """
    X = _feature_matrix(features)
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != (X.shape[0],):
        raise InvalidInputError(f"{X.shape[0]} feature vectors but {t.size} targets")
    if X.shape[0] < 2:
        raise InvalidInputError("SVR needs at least two training pairs")
    normalizer = fit_normalizer(X)
    Xn = normalize_matrix(X, normalizer)
    params = _minimize(_svr_objective, X.shape[1] + 1, (Xn, t, cfg.C, cfg.epsilon), cfg)
    return SvrModel(params[:-1].copy(), float(params[-1]), normalizer, cfg.epsilon)


def predict_svr(model: SvrModel, x: Union[FeatureVector, np.ndarray]) -> Union[float, np.ndarray]:
    """w . normalize(x) + b for one raw vector (float) or a matrix of them (array)."""
    values = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    out = normalize_matrix(values, model.normalizer) @ model.weights + model.bias
    return float(out) if np.ndim(out) == 0 else out


# --- model files ----------------------------------------------------------------------------

def identifier_to_document(model: IdentifierModel) -> IdentifierModelDocument:
    return IdentifierModelDocument(
        n_classes=model.n_classes,
        threshold=model.threshold,
        normalizer=normalizer_to_document(model.normalizer),
        models=[
            SvmModelDocument(class_id=m.class_id, bias=m.bias, weights=m.weights.tolist())
            for m in model.models
        ],
    )


def identifier_from_document(doc: IdentifierModelDocument) -> IdentifierModel:
    try:
        return IdentifierModel(
            tuple(SvmModel(np.array(m.weights), m.bias, m.class_id) for m in doc.models),
            normalizer_from_document(doc.normalizer),
            doc.threshold,
        )
    except InvalidInputError as e:
        raise ParseError(f"inconsistent model document: {e}") from e


def store_identifier(model: IdentifierModel, path: Union[str, Path]) -> None:
    Path(path).write_text(identifier_to_document(model).model_dump_json(indent=2) + "\n")


def load_identifier(path: Union[str, Path]) -> IdentifierModel:
    try:
        doc = IdentifierModelDocument.model_validate_json(Path(path).read_text())
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from e
    return identifier_from_document(doc)


def store_svr(model: SvrModel, path: Union[str, Path]) -> None:
    doc = SvrModelDocument(
        epsilon=model.epsilon,
        bias=model.bias,
        weights=model.weights.tolist(),
        normalizer=normalizer_to_document(model.normalizer),
    )
    Path(path).write_text(doc.model_dump_json(indent=2) + "\n")


def load_svr(path: Union[str, Path]) -> SvrModel:
    try:
        doc = SvrModelDocument.model_validate_json(Path(path).read_text())
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from e
    return SvrModel(np.array(doc.weights), doc.bias, normalizer_from_document(doc.normalizer), doc.epsilon)
