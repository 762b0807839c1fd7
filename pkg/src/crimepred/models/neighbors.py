"""K-nearest-neighbours classifier (majority vote, no distance weighting)."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from ..features import FeatureMatrix
from .. import kernels
from . import Classifier, check_training_matrix


class KnnClassifier(Classifier):
    kind = "knn"

    def __init__(self, train_values, train_labels, k_neighbors, n_classes,
                 schema_fingerprint, feature_names):
        super().__init__(n_classes, schema_fingerprint, feature_names)
        self.train_values = np.ascontiguousarray(train_values, dtype=np.float64)
        self.train_labels = np.ascontiguousarray(train_labels, dtype=np.int64)
        self.k_neighbors = int(k_neighbors)

    def _predict_values(self, values):
        votes = kernels.knn_votes(
            self.train_values,
            self.train_labels,
            np.ascontiguousarray(values, dtype=np.float64),
            self.k_neighbors,
            self.n_classes,
        )
        return votes / self.k_neighbors

    def hyperparameters(self):
        return {"k_neighbors": self.k_neighbors}

    def _state_dict(self):
        return {
            "train_values": self.train_values.tolist(),
            "train_labels": self.train_labels.tolist(),
        }

    @classmethod
    def _from_json_dict(cls, data):
        state = data["state"]
        return cls(
            train_values=np.asarray(state["train_values"], dtype=np.float64),
            train_labels=np.asarray(state["train_labels"], dtype=np.int64),
            k_neighbors=data["hyperparameters"]["k_neighbors"],
            n_classes=data["n_classes"],
            schema_fingerprint=data["schema_fingerprint"],
            feature_names=tuple(data["feature_names"]),
        )


def train_knn(matrix: FeatureMatrix, k_neighbors: int = 5,
              n_classes: int | None = None) -> KnnClassifier:
    """Memorize the training rows; predictions are vote fractions over the
    k nearest rows by Euclidean distance (distance ties go to the lower
    training-row index)."""
    c = check_training_matrix(matrix, n_classes)
    if not 1 <= k_neighbors <= matrix.n_rows:
        raise ParameterError(
            f"k_neighbors must be in [1, {matrix.n_rows}], got {k_neighbors}"
        )
    return KnnClassifier(
        train_values=matrix.values,
        train_labels=matrix.labels,
        k_neighbors=k_neighbors,
        n_classes=c,
        schema_fingerprint=matrix.fingerprint,
        feature_names=matrix.schema.names,
    )
