"""CART decision tree with Gini impurity and Wilson-bound pessimistic pruning.

Split selection maximizes the impurity decrease; ties go to the lower
feature index, then the lower threshold. Thresholds are midpoints of
adjacent observed values. A node with an impure label mix still splits on a
zero-decrease candidate when one exists (required e.g. for XOR-shaped data),
and stops only at purity, depth, leaf-size, or no-valid-split conditions.
"""

from __future__ import annotations

import math
from statistics import NormalDist
from typing import Optional

import numpy as np

from ..errors import ParameterError
from ..features import FeatureMatrix
from .. import kernels
from . import Classifier, check_training_matrix


class TreeNode:
    """Split node (feature, threshold, children) or leaf; every node keeps
    the class-count histogram of the training rows routed to it."""

    __slots__ = ("counts", "feature", "threshold", "decrease", "left", "right")

    def __init__(self, counts, feature=-1, threshold=0.0, decrease=0.0,
                 left=None, right=None):
        self.counts = counts
        self.feature = feature
        self.threshold = threshold
        self.decrease = decrease
        self.left = left
        self.right = right

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_json_dict(self) -> dict:
        out = {"counts": self.counts.tolist()}
        if not self.is_leaf:
            out.update(
                feature=self.feature,
                threshold=self.threshold,
                decrease=self.decrease,
                left=self.left.to_json_dict(),
                right=self.right.to_json_dict(),
            )
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "TreeNode":
        node = cls(counts=np.asarray(data["counts"], dtype=np.int64))
        if "feature" in data:
            node.feature = int(data["feature"])
            node.threshold = float(data["threshold"])
            node.decrease = float(data["decrease"])
            node.left = cls.from_json_dict(data["left"])
            node.right = cls.from_json_dict(data["right"])
        return node


def grow_tree(
    values: np.ndarray,
    labels: np.ndarray,
    rows: np.ndarray,
    n_classes: int,
    max_depth: Optional[int],
    min_samples_leaf: int,
    features_per_split: int,
    rng: Optional[np.random.Generator],
) -> TreeNode:
    """Recursive CART builder over the given row multiset.

    When features_per_split < F, each split draws a random sorted feature
    subset from rng; if that subset has no valid split, all features are
    retried (without consuming randomness) before giving up.
    """
    n_features = values.shape[1]
    all_features = np.arange(n_features)

    def make_node(node_rows: np.ndarray) -> TreeNode:
        counts = np.bincount(labels[node_rows], minlength=n_classes).astype(np.int64)
        return TreeNode(counts=counts)

    # explicit stack, left child first, so deep trees cannot overflow the
    # interpreter stack and the rng consumption order matches a left-first
    # depth-first recursion
    root = make_node(rows)
    stack = [(root, rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        n = node_rows.size
        if (
            int((node.counts > 0).sum()) <= 1
            or (max_depth is not None and depth >= max_depth)
            or n < 2 * min_samples_leaf
            or n < 2
        ):
            continue
        if features_per_split < n_features:
            feats = np.sort(rng.choice(n_features, size=features_per_split, replace=False))
        else:
            feats = all_features
        col, threshold, decrease = kernels.best_split(
            np.ascontiguousarray(values[np.ix_(node_rows, feats)]),
            labels[node_rows],
            n_classes,
            min_samples_leaf,
        )
        if col < 0 and feats.size < n_features:
            feats = all_features
            col, threshold, decrease = kernels.best_split(
                np.ascontiguousarray(values[node_rows]),
                labels[node_rows],
                n_classes,
                min_samples_leaf,
            )
        if col < 0:
            continue
        feature = int(feats[col])
        mask = values[node_rows, feature] <= threshold
        node.feature = feature
        node.threshold = float(threshold)
        node.decrease = float(decrease)
        left_rows = node_rows[mask]
        right_rows = node_rows[~mask]
        node.left = make_node(left_rows)
        node.right = make_node(right_rows)
        stack.append((node.right, right_rows, depth + 1))
        stack.append((node.left, left_rows, depth + 1))
    return root


def _wilson_upper(p_hat: float, n: float, z: float) -> float:
    z2 = z * z
    center = p_hat + z2 / (2.0 * n)
    radius = z * math.sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n))
    return (center + radius) / (1.0 + z2 / n)


def prune_tree(node: TreeNode, confidence_factor: float) -> float:
    """Bottom-up pessimistic pruning.

    Each node's pessimistic error count is n * WilsonUpper(err/n, n, z) with
    z the (1 - confidence_factor) normal quantile; a subtree whose summed
    leaf bound is >= the collapsed node's bound is replaced by a leaf.
    Returns the pruned node's error bound.
    """
    z = NormalDist().inv_cdf(1.0 - confidence_factor)
    # iterative post-order so children settle before their parent
    order = []
    stack = [node]
    while stack:
        current = stack.pop()
        order.append(current)
        if not current.is_leaf:
            stack.append(current.left)
            stack.append(current.right)
    bounds: dict[int, float] = {}
    for current in reversed(order):
        n = int(current.counts.sum())
        errors = n - int(current.counts.max())
        collapsed = _wilson_upper(errors / n, n, z) * n
        if current.is_leaf:
            bounds[id(current)] = collapsed
            continue
        subtree = bounds[id(current.left)] + bounds[id(current.right)]
        if subtree >= collapsed:
            current.left = None
            current.right = None
            current.feature = -1
            current.threshold = 0.0
            current.decrease = 0.0
            bounds[id(current)] = collapsed
        else:
            bounds[id(current)] = subtree
    return bounds[id(node)]


def predict_tree(root: TreeNode, values: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.empty((values.shape[0], n_classes))
    cache: dict[int, np.ndarray] = {}
    for i in range(values.shape[0]):
        node = root
        while not node.is_leaf:
            node = node.left if values[i, node.feature] <= node.threshold else node.right
        key = id(node)
        prob = cache.get(key)
        if prob is None:
            prob = node.counts / node.counts.sum()
            cache[key] = prob
        out[i] = prob
    return out


class DecisionTreeClassifier(Classifier):
    kind = "decision_tree"

    def __init__(self, root, confidence_factor, max_depth, min_samples_leaf,
                 prune, n_classes, schema_fingerprint, feature_names):
        super().__init__(n_classes, schema_fingerprint, feature_names)
        self.root = root
        self.confidence_factor = confidence_factor
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.prune = prune

    def _predict_values(self, values):
        return predict_tree(self.root, values, self.n_classes)

    def hyperparameters(self):
        return {
            "confidence_factor": self.confidence_factor,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "prune": self.prune,
        }

    def _state_dict(self):
        return {"root": self.root.to_json_dict()}

    @classmethod
    def _from_json_dict(cls, data):
        hp = data["hyperparameters"]
        return cls(
            root=TreeNode.from_json_dict(data["state"]["root"]),
            confidence_factor=hp["confidence_factor"],
            max_depth=hp["max_depth"],
            min_samples_leaf=hp["min_samples_leaf"],
            prune=hp["prune"],
            n_classes=data["n_classes"],
            schema_fingerprint=data["schema_fingerprint"],
            feature_names=tuple(data["feature_names"]),
        )


def train_decision_tree(
    matrix: FeatureMatrix,
    confidence_factor: float = 0.3,
    max_depth: Optional[int] = None,
    min_samples_leaf: int = 1,
    prune: bool = True,
    n_classes: int | None = None,
) -> DecisionTreeClassifier:
    """Grow a CART tree; optionally apply Wilson-bound pruning."""
    c = check_training_matrix(matrix, n_classes)
    if matrix.n_rows < 1:
        raise ParameterError("decision tree needs at least one training row")
    if min_samples_leaf < 1:
        raise ParameterError(f"min_samples_leaf must be >= 1, got {min_samples_leaf}")
    if max_depth is not None and max_depth < 0:
        raise ParameterError(f"max_depth must be >= 0, got {max_depth}")
    if prune and not 0.0 < confidence_factor < 1.0:
        raise ParameterError(
            f"confidence_factor must be in (0, 1), got {confidence_factor}"
        )
    root = grow_tree(
        matrix.values,
        matrix.labels,
        rows=np.arange(matrix.n_rows),
        n_classes=c,
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        features_per_split=matrix.values.shape[1],
        rng=None,
    )
    if prune:
        prune_tree(root, confidence_factor)
    return DecisionTreeClassifier(
        root=root,
        confidence_factor=confidence_factor if prune else None,
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        prune=prune,
        n_classes=c,
        schema_fingerprint=matrix.fingerprint,
        feature_names=matrix.schema.names,
    )
