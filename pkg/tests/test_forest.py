"""Random forest behavior: hyperparameter handling, purity, importance,
bootstrap contract and determinism."""

import numpy as np
import pytest

from treescore.dataset import EncodedMatrix
from treescore.errors import FitError, UsageError
from treescore.forest import (
    ForestParams,
    fit_forest,
    predict_class_forest,
    predict_proba_forest,
    resolve_max_features,
)
from treescore.rng import stream

from conftest import random_labeled_matrix
from test_tree import brute_force_split


def matrix(X, y):
    return EncodedMatrix(X=np.asarray(X, dtype=np.float64), col_meta=[],
                         labels=np.asarray(y, dtype=np.int64))


class TestParams:
    def test_sqrt_rule(self):
        assert resolve_max_features("sqrt", 8990) == 94
        assert resolve_max_features("sqrt", 25) == 5
        assert resolve_max_features(3, 25) == 3

    def test_paper_setting_accepted(self):
        params = ForestParams(no_trees=5000, sample_split=2, sample_leaf=1)
        assert params.no_trees == 5000

    def test_validation(self):
        with pytest.raises(UsageError):
            ForestParams(no_trees=0)
        with pytest.raises(UsageError):
            ForestParams(sample_split=1)
        with pytest.raises(UsageError):
            ForestParams(sample_leaf=0)
        with pytest.raises(UsageError):
            ForestParams(max_features="log2")
        with pytest.raises(UsageError):
            resolve_max_features(10, 4)


class TestFit:
    def test_single_class_rejected(self):
        X = np.random.default_rng(0).normal(size=(10, 2))
        with pytest.raises(FitError):
            fit_forest(matrix(X, np.zeros(10)), ForestParams(no_trees=2))

    def test_separable_single_feature_gives_stumps(self):
        # x separates y perfectly: every tree must be a stump on feature 0
        # with its threshold inside the class gap, and importance is [1.0]
        x = np.arange(12, dtype=float)
        y = (x >= 6).astype(int)
        model = fit_forest(matrix(x.reshape(-1, 1), y),
                           ForestParams(no_trees=3, max_features=1, seed=13))
        assert len(model.trees) == 3
        for tree in model.trees:
            assert tree.n_nodes == 3
            assert tree.feature[tree.root] == 0
            assert 5.0 < tree.threshold[tree.root] < 6.0
            assert set(tree.value[tree.feature < 0]) == {0.0, 1.0}
        assert model.importance.shape == (1,)
        assert model.importance[0] == 1.0

    def test_stump_matches_brute_force_and_children_are_unsplittable(self):
        x = np.arange(12, dtype=float)
        y = (x >= 6).astype(int)
        X = x.reshape(-1, 1)
        model = fit_forest(matrix(X, y),
                           ForestParams(no_trees=1, max_features=1, seed=13),
                           bootstrap=False)
        tree = model.trees[0]
        oracle = brute_force_split(X, y, np.arange(12), [0])
        assert tree.threshold[tree.root] == oracle[2]
        # no further positive-decrease split exists inside either pure side
        left_rows = np.nonzero(x <= tree.threshold[tree.root])[0]
        right_rows = np.nonzero(x > tree.threshold[tree.root])[0]
        assert brute_force_split(X, y, left_rows, [0]) is None
        assert brute_force_split(X, y, right_rows, [0]) is None

    def test_depth_one_root_matches_brute_force(self, rng):
        for _ in range(15):
            n = int(rng.integers(8, 40))
            X, y = random_labeled_matrix(rng, n, 4)
            model = fit_forest(
                matrix(X, y),
                ForestParams(no_trees=1, max_features=4, sample_split=2,
                             sample_leaf=1, seed=0),
                bootstrap=False,
            )
            tree = model.trees[0]
            oracle = brute_force_split(X, y, np.arange(n), [0, 1, 2, 3])
            assert tree.feature[tree.root] == oracle[1]
            assert tree.threshold[tree.root] == oracle[2]

    def test_full_features_reach_zero_training_impurity(self, rng):
        # consistent data, all features available, no bootstrap: every tree
        # must drive training impurity to zero, so predictions equal labels
        X, y = random_labeled_matrix(rng, 60, 3)
        model = fit_forest(
            matrix(X, y),
            ForestParams(no_trees=3, max_features=3, sample_split=2,
                         sample_leaf=1, seed=5),
            bootstrap=False,
        )
        assert np.array_equal(predict_proba_forest(model, X), y.astype(float))

    def test_bootstrap_draws_exactly_n_with_replacement(self, rng):
        # a never-split tree's single leaf equals the class fraction of the
        # documented per-tree bag (n draws with replacement)
        X, y = random_labeled_matrix(rng, 50, 2)
        params = ForestParams(no_trees=3, sample_split=10**6, seed=21)
        model = fit_forest(matrix(X, y), params)
        for t, tree in enumerate(model.trees):
            bag = stream(params.seed, 0xF0, t).integers(0, 50, size=50)
            assert bag.size == 50
            assert tree.n_nodes == 1
            assert tree.value[tree.root] == y[bag].mean()

    def test_importance_normalized(self, rng):
        X, y = random_labeled_matrix(rng, 80, 5)
        model = fit_forest(matrix(X, y), ForestParams(no_trees=10, max_features=2, seed=3))
        assert np.all(model.importance >= 0)
        assert model.importance.sum() == pytest.approx(1.0, abs=1e-9)

    def test_deterministic_across_threads_and_runs(self, rng):
        X, y = random_labeled_matrix(rng, 60, 4)
        params = ForestParams(no_trees=12, sample_leaf=2, max_features=2, seed=17)
        models = [
            fit_forest(matrix(X, y), params, threads=t) for t in (1, 1, 4)
        ]
        base = predict_proba_forest(models[0], X)
        for m in models[1:]:
            assert np.array_equal(predict_proba_forest(m, X), base)
            for ta, tb in zip(models[0].trees, m.trees):
                assert np.array_equal(ta.feature, tb.feature)
                assert np.array_equal(ta.threshold, tb.threshold)
                assert np.array_equal(ta.value, tb.value)
        assert np.array_equal(models[0].importance, models[2].importance)

    def test_stability_improves_with_more_trees(self, rng):
        # variance over reseeded fits of the mean test probability must drop
        # as the ensemble grows 10 -> 100 -> 1000
        X, y = random_labeled_matrix(rng, 120, 4)
        Xtr, ytr = X[:84], y[:84]
        Xte = X[84:]
        variances = []
        for no_trees in (10, 100, 1000):
            means = []
            for s in range(10):
                model = fit_forest(
                    matrix(Xtr, ytr),
                    ForestParams(no_trees=no_trees, sample_leaf=2,
                                 max_features=2, seed=1000 + s),
                )
                means.append(float(predict_proba_forest(model, Xte).mean()))
            variances.append(float(np.var(means)))
        assert variances[0] > variances[1] > variances[2]


class TestPredict:
    def test_mean_of_trees(self, rng):
        X, y = random_labeled_matrix(rng, 40, 3)
        model = fit_forest(matrix(X, y), ForestParams(no_trees=3, max_features=2, seed=9))
        per_tree = np.stack([t.predict(X) for t in model.trees])
        assert np.array_equal(predict_proba_forest(model, X), per_tree.mean(axis=0))

    def test_single_tree_identity(self, rng):
        X, y = random_labeled_matrix(rng, 30, 2)
        model = fit_forest(matrix(X, y), ForestParams(no_trees=1, max_features=1, seed=2))
        assert np.array_equal(predict_proba_forest(model, X), model.trees[0].predict(X))

    def test_probabilities_in_unit_interval(self, rng):
        X, y = random_labeled_matrix(rng, 50, 3)
        model = fit_forest(matrix(X, y), ForestParams(no_trees=5, max_features=2, seed=4))
        probas = predict_proba_forest(model, rng.normal(size=(20, 3)))
        assert np.all((probas >= 0) & (probas <= 1))

    def test_class_threshold_rule_and_ties(self, rng):
        X, y = random_labeled_matrix(rng, 40, 3)
        model = fit_forest(matrix(X, y), ForestParams(no_trees=4, max_features=2, seed=6))
        probas = predict_proba_forest(model, X)
        classes = predict_class_forest(model, X)
        assert np.array_equal(classes, (probas >= 0.5).astype(int))
        # explicit tie: 2-2 vote from pure trees is class 1
        half = np.array([1.0, 1.0, 0.0, 0.0])
        assert (half.mean() >= 0.5) == 1

    def test_threshold_validation(self, rng):
        X, y = random_labeled_matrix(rng, 20, 2)
        model = fit_forest(matrix(X, y), ForestParams(no_trees=1, max_features=1, seed=2))
        with pytest.raises(UsageError):
            predict_class_forest(model, X, threshold=0.0)
