"""Gaussian naive Bayes: per-class feature Gaussians with a variance floor."""

from __future__ import annotations

import numpy as np

from ..errors import StateError
from ..features import FeatureMatrix
from . import Classifier, check_training_matrix, softmax_rows

VAR_FLOOR = 1e-9


class GaussianNbClassifier(Classifier):
    kind = "gaussian_nb"

    def __init__(self, priors, means, variances, var_floor, n_classes,
                 schema_fingerprint, feature_names):
        super().__init__(n_classes, schema_fingerprint, feature_names)
        self.priors = np.asarray(priors, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.variances = np.asarray(variances, dtype=np.float64)
        self.var_floor = float(var_floor)

    def _predict_values(self, values):
        n = values.shape[0]
        present = np.flatnonzero(self.priors > 0.0)
        log_joint = np.full((n, present.size), -np.inf)
        for idx, c in enumerate(present):
            var = self.variances[c]
            diff = values - self.means[c]
            quad = np.einsum("nf,f->n", diff * diff, 1.0 / var)
            log_joint[:, idx] = (
                np.log(self.priors[c])
                - 0.5 * np.sum(np.log(2.0 * np.pi * var))
                - 0.5 * quad
            )
        probs = np.zeros((n, self.n_classes))
        probs[:, present] = softmax_rows(log_joint)
        return probs

    def hyperparameters(self):
        return {"var_floor": self.var_floor}

    def _state_dict(self):
        return {
            "priors": self.priors.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    @classmethod
    def _from_json_dict(cls, data):
        state = data["state"]
        return cls(
            priors=state["priors"],
            means=state["means"],
            variances=state["variances"],
            var_floor=data["hyperparameters"]["var_floor"],
            n_classes=data["n_classes"],
            schema_fingerprint=data["schema_fingerprint"],
            feature_names=tuple(data["feature_names"]),
        )


def train_gaussian_nb(matrix: FeatureMatrix, var_floor: float = VAR_FLOOR,
                      n_classes: int | None = None) -> GaussianNbClassifier:
    """Class priors from frequencies; per-class per-feature Gaussian with
    population variance floored at `var_floor`. Classes absent from
    training get probability exactly zero."""
    c = check_training_matrix(matrix, n_classes)
    n, f = matrix.values.shape
    if n == 0:
        raise StateError("gaussian_nb needs at least one training sample")
    counts = np.bincount(matrix.labels, minlength=c)
    priors = counts / n
    means = np.zeros((c, f))
    variances = np.ones((c, f))
    for cls_idx in np.flatnonzero(counts):
        rows = matrix.values[matrix.labels == cls_idx]
        means[cls_idx] = rows.mean(axis=0)
        variances[cls_idx] = np.maximum(rows.var(axis=0), var_floor)
    return GaussianNbClassifier(
        priors=priors,
        means=means,
        variances=variances,
        var_floor=var_floor,
        n_classes=c,
        schema_fingerprint=matrix.fingerprint,
        feature_names=matrix.schema.names,
    )
