"""Random forest: bagged CART trees with per-split random feature subsets."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..errors import ParameterError
from ..features import FeatureMatrix
from ..seeding import generator
from . import Classifier, check_training_matrix
from .tree import TreeNode, grow_tree, predict_tree


class RandomForestClassifier(Classifier):
    kind = "random_forest"

    def __init__(self, trees, n_trees, features_per_split, bootstrap, seed,
                 max_depth, min_samples_leaf, n_classes, schema_fingerprint,
                 feature_names):
        super().__init__(n_classes, schema_fingerprint, feature_names)
        self.trees = list(trees)
        self.n_trees = int(n_trees)
        self.features_per_split = int(features_per_split)
        self.bootstrap = bool(bootstrap)
        self.seed = int(seed)
        self.max_depth = max_depth
        self.min_samples_leaf = int(min_samples_leaf)

    def _predict_values(self, values):
        total = np.zeros((values.shape[0], self.n_classes))
        for root in self.trees:
            total += predict_tree(root, values, self.n_classes)
        return total / len(self.trees)

    def hyperparameters(self):
        return {
            "n_trees": self.n_trees,
            "features_per_split": self.features_per_split,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
        }

    def _state_dict(self):
        return {"trees": [root.to_json_dict() for root in self.trees]}

    @classmethod
    def _from_json_dict(cls, data):
        hp = data["hyperparameters"]
        return cls(
            trees=[TreeNode.from_json_dict(t) for t in data["state"]["trees"]],
            n_trees=hp["n_trees"],
            features_per_split=hp["features_per_split"],
            bootstrap=hp["bootstrap"],
            seed=hp["seed"],
            max_depth=hp["max_depth"],
            min_samples_leaf=hp["min_samples_leaf"],
            n_classes=data["n_classes"],
            schema_fingerprint=data["schema_fingerprint"],
            feature_names=tuple(data["feature_names"]),
        )


def train_random_forest(
    matrix: FeatureMatrix,
    n_trees: int = 10,
    features_per_split: Optional[int] = None,
    seed: int = 0,
    bootstrap: bool = True,
    max_depth: Optional[int] = None,
    min_samples_leaf: int = 1,
    n_classes: int | None = None,
) -> RandomForestClassifier:
    """Train n_trees CART trees on bootstrap resamples of size N.

    Tree t derives its own generator from (seed, "tree", t), so results are
    identical across runs and independent of any training parallelism.
    features_per_split defaults to ceil(sqrt(F)). Forest trees are grown
    unpruned. With bootstrap disabled, one tree, and all features per
    split, predictions coincide exactly with train_decision_tree(prune=False).
    """
    c = check_training_matrix(matrix, n_classes)
    n, f = matrix.values.shape
    if n < 1:
        raise ParameterError("random forest needs at least one training row")
    if n_trees < 1:
        raise ParameterError(f"n_trees must be >= 1, got {n_trees}")
    if features_per_split is None:
        features_per_split = math.ceil(math.sqrt(f))
    if not 1 <= features_per_split <= f:
        raise ParameterError(
            f"features_per_split must be in [1, {f}], got {features_per_split}"
        )
    if min_samples_leaf < 1:
        raise ParameterError(f"min_samples_leaf must be >= 1, got {min_samples_leaf}")
    trees = []
    for t in range(n_trees):
        rng = generator(seed, "tree", t)
        rows = rng.integers(0, n, n) if bootstrap else np.arange(n)
        trees.append(
            grow_tree(
                matrix.values,
                matrix.labels,
                rows=rows,
                n_classes=c,
                max_depth=max_depth,
                min_samples_leaf=min_samples_leaf,
                features_per_split=features_per_split,
                rng=rng,
            )
        )
    return RandomForestClassifier(
        trees=trees,
        n_trees=n_trees,
        features_per_split=features_per_split,
        bootstrap=bootstrap,
        seed=seed,
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        n_classes=c,
        schema_fingerprint=matrix.fingerprint,
        feature_names=matrix.schema.names,
    )
