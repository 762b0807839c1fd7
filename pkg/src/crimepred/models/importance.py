"""Mean-decrease-in-impurity feature importance for tree-based models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UnsupportedModelError
from . import Classifier
from .forest import RandomForestClassifier
from .tree import DecisionTreeClassifier, TreeNode


@dataclass(frozen=True)
class ImportanceRanking:
    """(feature name, weight) pairs, weights summing to 1, sorted descending."""

    entries: tuple[tuple[str, float], ...]

    def weights(self) -> dict[str, float]:
        return dict(self.entries)

    def to_csv_rows(self) -> list[tuple[int, str, float]]:
        return [(rank, name, weight) for rank, (name, weight) in enumerate(self.entries)]

    def to_json_dict(self) -> dict:
        return {"entries": [{"feature": n, "weight": w} for n, w in self.entries]}

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write("rank,feature,weight\n")
            for rank, name, weight in self.to_csv_rows():
                handle.write(f"{rank},{name},{weight!r}\n")


def _accumulate(root: TreeNode, n_root: int, out: np.ndarray):
    stack = [root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            continue
        out[node.feature] += (int(node.counts.sum()) / n_root) * node.decrease
        stack.append(node.left)
        stack.append(node.right)


def feature_importance(model: Classifier) -> ImportanceRanking:
    """Impurity-decrease importance summed over splits (and trees), then
    normalized to sum to 1. A forest of pure-leaf trees (total credit zero)
    yields uniform weights."""
    if isinstance(model, DecisionTreeClassifier):
        roots = [model.root]
    elif isinstance(model, RandomForestClassifier):
        roots = model.trees
    else:
        raise UnsupportedModelError(
            f"feature importance requires a tree-based model, got {model.kind!r}"
        )
    n_features = len(model.feature_names)
    raw = np.zeros(n_features)
    for root in roots:
        _accumulate(root, int(root.counts.sum()), raw)
    total = float(raw.sum())
    weights = raw / total if total > 0 else np.full(n_features, 1.0 / n_features)
    order = sorted(range(n_features), key=lambda i: (-weights[i], i))
    return ImportanceRanking(
        entries=tuple((model.feature_names[i], float(weights[i])) for i in order)
    )
