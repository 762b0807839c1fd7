"""Decision tree, random forest, and impurity-based importance."""

import numpy as np
import pytest

from conftest import make_matrix
from crimepred.errors import ParameterError, UnsupportedModelError
from crimepred.models import (
    feature_importance,
    train_decision_tree,
    train_gaussian_nb,
    train_random_forest,
)


def gini(counts):
    total = counts.sum()
    p = counts / total
    return 1.0 - float((p * p).sum())


def exhaustive_best_split(x, y, n_classes):
    """Independent oracle over every (feature, midpoint) pair; ties go to the
    lower feature index, then the lower threshold."""
    n, f = x.shape
    parent = gini(np.bincount(y, minlength=n_classes))
    best = None
    for feat in range(f):
        values = np.unique(x[:, feat])
        for lo, hi in zip(values[:-1], values[1:]):
            threshold = (lo + hi) / 2.0
            if not lo < threshold < hi:
                continue
            mask = x[:, feat] <= threshold
            nl, nr = mask.sum(), (~mask).sum()
            left = np.bincount(y[mask], minlength=n_classes)
            right = np.bincount(y[~mask], minlength=n_classes)
            decrease = parent - (nl * gini(left) + nr * gini(right)) / n
            key = (-decrease, feat, threshold)
            if best is None or key < best:
                best = key
    return None if best is None else (best[1], best[2], -best[0])


class TestDecisionTree:
    def test_pure_training_set_single_leaf(self):
        m = make_matrix([[0.0], [1.0], [2.0]], [4, 4, 4], names=("X",))
        model = train_decision_tree(m, n_classes=5)
        assert model.root.is_leaf
        p = model.predict_proba(make_matrix([[9.0]], [0], names=("X",)))
        assert p[0, 4] == 1.0

    def test_xor_perfect_at_depth_two(self):
        m = make_matrix([[0, 0], [1, 1], [0, 1], [1, 0]], [0, 0, 1, 1], names=("X", "Y"))
        model = train_decision_tree(m, max_depth=2, n_classes=2)
        p = model.predict_proba(m)
        assert (p.argmax(1) == m.labels).all()

    def test_root_split_matches_exhaustive_oracle(self, rng):
        for trial in range(10):
            x = rng.standard_normal((50, 4))
            y = rng.integers(0, 3, 50)
            m = make_matrix(x, y)
            model = train_decision_tree(m, max_depth=3, prune=False, n_classes=3)
            want = exhaustive_best_split(x, y, 3)
            assert want is not None
            assert model.root.feature == want[0]
            assert model.root.threshold == pytest.approx(want[1], abs=1e-12)
            assert model.root.decrease == pytest.approx(want[2], abs=1e-12)

    def test_perfect_fit_on_consistent_data(self, rng):
        x = rng.standard_normal((80, 3))
        y = rng.integers(0, 4, 80)
        m = make_matrix(x, y)
        model = train_decision_tree(m, prune=False, n_classes=4)
        p = model.predict_proba(m)
        assert (p.argmax(1) == y).mean() == 1.0

    def test_min_samples_leaf_respected(self, rng):
        x = rng.standard_normal((40, 2))
        y = rng.integers(0, 2, 40)
        model = train_decision_tree(make_matrix(x, y), min_samples_leaf=5, prune=False, n_classes=2)

        def check(node):
            if node.is_leaf:
                assert node.counts.sum() >= 5
            else:
                check(node.left)
                check(node.right)

        check(model.root)

    def test_max_depth_zero_is_single_leaf(self, rng):
        x = rng.standard_normal((20, 2))
        y = rng.integers(0, 2, 20)
        model = train_decision_tree(make_matrix(x, y), max_depth=0, n_classes=2)
        assert model.root.is_leaf

    def test_pruning_collapses_unhelpful_split(self):
        # both children keep the parent's majority and error rate, so the
        # collapsed Wilson bound beats the subtree bound
        from crimepred.models.tree import TreeNode, prune_tree

        left = TreeNode(counts=np.array([15, 5], dtype=np.int64))
        right = TreeNode(counts=np.array([15, 5], dtype=np.int64))
        root = TreeNode(
            counts=np.array([30, 10], dtype=np.int64),
            feature=0, threshold=0.5, decrease=0.0, left=left, right=right,
        )
        prune_tree(root, confidence_factor=0.3)
        assert root.is_leaf

    def test_pruning_keeps_informative_split(self):
        from crimepred.models.tree import TreeNode, prune_tree

        left = TreeNode(counts=np.array([20, 0], dtype=np.int64))
        right = TreeNode(counts=np.array([0, 20], dtype=np.int64))
        root = TreeNode(
            counts=np.array([20, 20], dtype=np.int64),
            feature=0, threshold=0.5, decrease=0.5, left=left, right=right,
        )
        prune_tree(root, confidence_factor=0.3)
        assert not root.is_leaf

    def test_pruning_preserves_separable_fit(self, rng):
        x = np.concatenate([rng.standard_normal((40, 2)) - 3, rng.standard_normal((40, 2)) + 3])
        y = np.repeat([0, 1], 40)
        m = make_matrix(x, y)
        pruned = train_decision_tree(m, confidence_factor=0.3, prune=True, n_classes=2)
        assert (pruned.predict_proba(m).argmax(1) == y).mean() == 1.0

    def test_leaf_histograms_total_training_rows(self, rng):
        x = rng.standard_normal((60, 2))
        y = rng.integers(0, 3, 60)
        model = train_decision_tree(make_matrix(x, y), prune=False, n_classes=3)

        def leaf_total(node):
            if node.is_leaf:
                return int(node.counts.sum())
            return leaf_total(node.left) + leaf_total(node.right)

        assert leaf_total(model.root) == 60

    def test_permutation_invariance(self, rng):
        x = rng.standard_normal((50, 3))
        y = rng.integers(0, 3, 50)
        perm = rng.permutation(50)
        q = make_matrix(rng.standard_normal((20, 3)), np.zeros(20))
        p1 = train_decision_tree(make_matrix(x, y), prune=False, n_classes=3).predict_proba(q)
        p2 = train_decision_tree(make_matrix(x[perm], y[perm]), prune=False, n_classes=3).predict_proba(q)
        assert np.array_equal(p1, p2)

    def test_hyperparameter_validation(self, rng):
        m = make_matrix(rng.standard_normal((10, 2)), np.zeros(10))
        with pytest.raises(ParameterError):
            train_decision_tree(m, min_samples_leaf=0)
        with pytest.raises(ParameterError):
            train_decision_tree(m, max_depth=-1)
        with pytest.raises(ParameterError):
            train_decision_tree(m, confidence_factor=1.5)


class TestRandomForest:
    def test_degenerate_forest_equals_tree(self, rng):
        x = rng.standard_normal((60, 4))
        y = rng.integers(0, 3, 60)
        m = make_matrix(x, y)
        tree = train_decision_tree(m, prune=False, n_classes=3)
        forest = train_random_forest(
            m, n_trees=1, bootstrap=False, features_per_split=4, n_classes=3
        )
        q = make_matrix(rng.standard_normal((25, 4)), np.zeros(25))
        assert np.array_equal(tree.predict_proba(q), forest.predict_proba(q))

    def test_same_seed_identical_predictions(self, rng):
        x = rng.standard_normal((80, 3))
        y = rng.integers(0, 3, 80)
        m = make_matrix(x, y)
        q = make_matrix(rng.standard_normal((30, 3)), np.zeros(30))
        p1 = train_random_forest(m, n_trees=5, seed=7, n_classes=3).predict_proba(q)
        p2 = train_random_forest(m, n_trees=5, seed=7, n_classes=3).predict_proba(q)
        assert np.array_equal(p1, p2)

    def test_training_accuracy_non_decreasing_on_separable_suite(self):
        rng = np.random.default_rng(0)
        centers = np.array([[-3.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
        x = np.concatenate([c + 0.3 * rng.standard_normal((50, 2)) for c in centers])
        y = np.repeat([0, 1, 2], 50)
        m = make_matrix(x, y)
        accuracies = []
        for n_trees in (1, 5, 10, 25):
            model = train_random_forest(m, n_trees=n_trees, seed=3, n_classes=3)
            accuracies.append((model.predict_proba(m).argmax(1) == y).mean())
        assert all(b >= a - 1e-12 for a, b in zip(accuracies, accuracies[1:]))

    def test_default_features_per_split(self, rng):
        x = rng.standard_normal((30, 9))
        model = train_random_forest(make_matrix(x, np.zeros(30)), n_trees=2, n_classes=2)
        assert model.features_per_split == 3

    def test_validation(self, rng):
        m = make_matrix(rng.standard_normal((10, 2)), np.zeros(10))
        with pytest.raises(ParameterError):
            train_random_forest(m, n_trees=0)
        with pytest.raises(ParameterError):
            train_random_forest(m, features_per_split=3)


class TestImportance:
    def test_single_signal_feature_dominates(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((400, 4))
        y = (x[:, 0] > 0).astype(int)
        model = train_random_forest(
            make_matrix(x, y), n_trees=10, features_per_split=4, seed=0, n_classes=2
        )
        ranking = feature_importance(model)
        assert ranking.weights()["PC1"] > 0.95

    def test_weights_sum_to_one_and_sorted(self, rng):
        x = rng.standard_normal((100, 5))
        y = rng.integers(0, 3, 100)
        model = train_random_forest(make_matrix(x, y), n_trees=5, seed=2, n_classes=3)
        ranking = feature_importance(model)
        weights = [w for _, w in ranking.entries]
        assert sum(weights) == pytest.approx(1.0, abs=1e-9)
        assert all(w >= 0 for w in weights)
        assert all(a >= b for a, b in zip(weights, weights[1:]))

    def test_tree_importance_supported(self, rng):
        x = rng.standard_normal((50, 3))
        y = (x[:, 1] > 0).astype(int)
        model = train_decision_tree(make_matrix(x, y), prune=False, n_classes=2)
        ranking = feature_importance(model)
        assert ranking.entries[0][0] == "PC2"

    def test_non_tree_model_rejected(self, rng):
        m = make_matrix(rng.standard_normal((20, 2)), np.zeros(20))
        model = train_gaussian_nb(m, n_classes=2)
        with pytest.raises(UnsupportedModelError):
            feature_importance(model)
