"""Multinomial logistic (softmax) regression via full-batch gradient descent.

Matrix products go through np.einsum rather than BLAS matmul so training is
bit-reproducible regardless of the BLAS thread count.
"""

from __future__ import annotations

import numpy as np

from ..errors import DivergenceError, ParameterError
from ..features import FeatureMatrix
from . import Classifier, check_training_matrix, softmax_rows


def _with_bias(values: np.ndarray) -> np.ndarray:
    return np.hstack([values, np.ones((values.shape[0], 1))])


def softmax_loss_and_gradient(weights, values_bias, labels, n_classes, l2):
    """Cross-entropy + L2 loss and its analytic gradient.

    weights is (F+1, C) with the bias in the last row, excluded from the
    penalty. Used by the training loop and by gradient-check tests.
    """
    n = values_bias.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        logits = np.einsum("nf,fc->nc", values_bias, weights)
        probs = softmax_rows(logits)
        picked = probs[np.arange(n), labels]
        loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))
        loss += 0.5 * l2 * float(np.sum(weights[:-1] ** 2))
        grad_scores = probs
        grad_scores[np.arange(n), labels] -= 1.0
        grad = np.einsum("nf,nc->fc", values_bias, grad_scores) / n
        grad[:-1] += l2 * weights[:-1]
    return loss, grad


class LogisticRegressionClassifier(Classifier):
    kind = "logistic_regression"

    def __init__(self, weights, l2, learning_rate, epochs, seed, loss_history,
                 n_classes, schema_fingerprint, feature_names):
        super().__init__(n_classes, schema_fingerprint, feature_names)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.l2 = float(l2)
        self.learning_rate = float(learning_rate)
        self.epochs = int(epochs)
        self.seed = int(seed)
        self.loss_history = tuple(loss_history)

    def _predict_values(self, values):
        logits = np.einsum("nf,fc->nc", _with_bias(values), self.weights)
        return softmax_rows(logits)

    def hyperparameters(self):
        return {
            "l2": self.l2,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "seed": self.seed,
        }

    def _state_dict(self):
        return {"weights": self.weights.tolist()}

    @classmethod
    def _from_json_dict(cls, data):
        hp = data["hyperparameters"]
        return cls(
            weights=np.asarray(data["state"]["weights"], dtype=np.float64),
            l2=hp["l2"],
            learning_rate=hp["learning_rate"],
            epochs=hp["epochs"],
            seed=hp["seed"],
            loss_history=(),
            n_classes=data["n_classes"],
            schema_fingerprint=data["schema_fingerprint"],
            feature_names=tuple(data["feature_names"]),
        )


def train_logistic_regression(
    matrix: FeatureMatrix,
    l2: float = 1e-4,
    learning_rate: float = 0.1,
    epochs: int = 500,
    seed: int = 0,
    n_classes: int | None = None,
) -> LogisticRegressionClassifier:
    """Minimize cross-entropy + L2 (bias unpenalized) by full-batch descent.

    Weights start at zero, so training is deterministic and `seed` only
    matters for future stochastic variants. A non-finite loss aborts with a
    DivergenceError naming the epoch.
    """
    c = check_training_matrix(matrix, n_classes)
    if epochs < 0:
        raise ParameterError(f"epochs must be >= 0, got {epochs}")
    if learning_rate <= 0:
        raise ParameterError(f"learning_rate must be positive, got {learning_rate}")
    if l2 < 0:
        raise ParameterError(f"l2 must be >= 0, got {l2}")
    xb = _with_bias(matrix.values)
    weights = np.zeros((xb.shape[1], c))
    history = []
    for epoch in range(epochs):
        loss, grad = softmax_loss_and_gradient(weights, xb, matrix.labels, c, l2)
        if not np.isfinite(loss):
            raise DivergenceError(f"training loss became non-finite at epoch {epoch}")
        history.append(loss)
        weights -= learning_rate * grad
    return LogisticRegressionClassifier(
        weights=weights,
        l2=l2,
        learning_rate=learning_rate,
        epochs=epochs,
        seed=seed,
        loss_history=history,
        n_classes=c,
        schema_fingerprint=matrix.fingerprint,
        feature_names=matrix.schema.names,
    )
