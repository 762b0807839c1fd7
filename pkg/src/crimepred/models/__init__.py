"""Multiclass classifiers with a shared train / predict-probability contract.

All classifiers are trained from scratch on a FeatureMatrix and expose
predict_proba returning an (N, C) row-stochastic matrix with class columns
fixed to label indices 0..C-1. C defaults to the full 33-label table even
when some labels are absent from training. Models remember the training
schema fingerprint and reject matrices with a different one.

Registered kinds: knn, gaussian_nb, decision_tree, random_forest,
logistic_regression, plus svm and mlp stubs that always raise
UnsupportedModelError.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import (
    LabelError,
    ParameterError,
    SchemaError,
    UnsupportedModelError,
)
from ..features import FeatureMatrix
from ..labels import CLASS_COUNT

MODEL_FORMAT_VERSION = 1


class Classifier:
    """Base class: fitted state plus the shared prediction contract."""

    kind = ""

    def __init__(self, n_classes: int, schema_fingerprint: str, feature_names: tuple[str, ...]):
        self.n_classes = n_classes
        self.schema_fingerprint = schema_fingerprint
        self.feature_names = tuple(feature_names)

    def predict_proba(self, matrix: FeatureMatrix) -> np.ndarray:
        """(N, C) class probabilities; rows are nonnegative and sum to 1."""
        if matrix.fingerprint != self.schema_fingerprint:
            raise SchemaError(
                "feature schema fingerprint does not match the one used at training"
            )
        return self._predict_values(matrix.values)

    def _predict_values(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hyperparameters(self) -> dict:
        raise NotImplementedError

    def _state_dict(self) -> dict:
        raise NotImplementedError


def predict_proba(model: Classifier, matrix: FeatureMatrix) -> np.ndarray:
    """Module-level form of the shared prediction contract."""
    return model.predict_proba(matrix)


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max for stability."""
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def check_training_matrix(matrix: FeatureMatrix, n_classes: int | None) -> int:
    """Resolve the class count and validate the label range."""
    c = CLASS_COUNT if n_classes is None else int(n_classes)
    if c < 1:
        raise ParameterError(f"class count must be >= 1, got {c}")
    if matrix.n_rows and (matrix.labels.min() < 0 or matrix.labels.max() >= c):
        raise LabelError(
            f"labels outside [0, {c}): found range "
            f"[{matrix.labels.min()}, {matrix.labels.max()}]"
        )
    return c


from .bayes import GaussianNbClassifier, train_gaussian_nb  # noqa: E402
from .forest import RandomForestClassifier, train_random_forest  # noqa: E402
from .linear import (  # noqa: E402
    LogisticRegressionClassifier,
    softmax_loss_and_gradient,
    train_logistic_regression,
)
from .neighbors import KnnClassifier, train_knn  # noqa: E402
from .tree import DecisionTreeClassifier, train_decision_tree  # noqa: E402
from .importance import ImportanceRanking, feature_importance  # noqa: E402


def _unsupported(kind: str):
    def trainer(*args, **kwargs):
        raise UnsupportedModelError(
            f"model kind {kind!r} is registered for interface completeness "
            "but training it is out of scope"
        )

    return trainer


_SEEDED_KINDS = frozenset({"random_forest", "logistic_regression"})

TRAINERS = {
    "knn": train_knn,
    "gaussian_nb": train_gaussian_nb,
    "decision_tree": train_decision_tree,
    "random_forest": train_random_forest,
    "logistic_regression": train_logistic_regression,
    "svm": _unsupported("svm"),
    "mlp": _unsupported("mlp"),
}

_CLASSES = {
    cls.kind: cls
    for cls in (
        KnnClassifier,
        GaussianNbClassifier,
        DecisionTreeClassifier,
        RandomForestClassifier,
        LogisticRegressionClassifier,
    )
}

MODEL_KINDS = tuple(TRAINERS)


def train_model(
    kind: str,
    matrix: FeatureMatrix,
    params: dict | None = None,
    seed: int = 0,
    n_classes: int | None = None,
) -> Classifier:
    """Train any registered model kind with keyword hyperparameters."""
    if kind not in TRAINERS:
        raise ParameterError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")
    kwargs = dict(params or {})
    if kind in _SEEDED_KINDS:
        kwargs.setdefault("seed", seed)
    return TRAINERS[kind](matrix, n_classes=n_classes, **kwargs)


def model_to_json_dict(model: Classifier) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "n_classes": model.n_classes,
        "schema_fingerprint": model.schema_fingerprint,
        "feature_names": list(model.feature_names),
        "hyperparameters": model.hyperparameters(),
        "state": model._state_dict(),
    }


def save_model(model: Classifier, path):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(model_to_json_dict(model), handle, indent=2, sort_keys=True)
        handle.write("\n")


def model_from_json_dict(data: dict) -> Classifier:
    if data.get("format_version") != MODEL_FORMAT_VERSION:
        raise SchemaError(f"unsupported model format version: {data.get('format_version')}")
    kind = data.get("kind")
    cls = _CLASSES.get(kind)
    if cls is None:
        raise SchemaError(f"cannot load model of kind {kind!r}")
    return cls._from_json_dict(data)


def load_model(path) -> Classifier:
    with open(path, "r", encoding="utf-8") as handle:
        return model_from_json_dict(json.load(handle))
