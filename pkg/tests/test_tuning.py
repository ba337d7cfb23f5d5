"""Grid resolution, trial reproducibility and the tuning-table format."""

import pytest

from treescore.boosting import BoostParams, fit_boosted, predict_proba_boosted
from treescore.dataset import SplitSpec, encode, train_test_split
from treescore.errors import GridError
from treescore.metrics import auc_score
from treescore.synthetic import generate_synthetic
from treescore.tuning import (
    GridSpec,
    TrialResult,
    best_trial,
    read_grid,
    resolve_cells,
    run_grid,
    write_trial_table,
)

TABLE2_GRID = """\
[grid]
model = boosted
metric = auc
mode = rows
seed = 11

[fixed]
n_rounds = 12
max_depth = 20
eta = 0.01
colsample_bytree = 0.7
subsample = 0.7
min_child_weight = 1
gamma = 0.01
alpha = 1

[row.1]
[row.2]
max_depth = 10
[row.3]
max_depth = 5
[row.4]
eta = 0.1
[row.5]
eta = 0.3
[row.6]
colsample_bytree = 0.8
subsample = 0.8
[row.7]
colsample_bytree = 0.6
subsample = 0.6
[row.8]
min_child_weight = 3
[row.9]
min_child_weight = 5
[row.10]
gamma = 0.1
[row.11]
alpha = 0.1
[row.12]
colsample_bytree = 0.8
subsample = 0.8
alpha = 0.1
"""


@pytest.fixture(scope="module")
def small_split():
    batch, _ = generate_synthetic(400, seed=31)
    m = encode(batch)
    return train_test_split(m, SplitSpec(0.7, seed=31))


class TestResolveCells:
    def test_ofat_baseline_plus_axis_values(self):
        spec = GridSpec(model_kind="forest", mode="ofat",
                        axes={"no_trees": [10, 50]}, fixed={"no_trees": 20, "sample_leaf": 2})
        cells = resolve_cells(spec)
        assert cells == [
            {"no_trees": 20, "sample_leaf": 2},
            {"no_trees": 10, "sample_leaf": 2},
            {"no_trees": 50, "sample_leaf": 2},
        ]

    def test_grouped_axis_moves_in_lockstep(self):
        spec = GridSpec(model_kind="boosted", mode="ofat",
                        axes={"colsample_bytree,subsample": [0.6, 0.8]},
                        fixed={"colsample_bytree": 0.7, "subsample": 0.7})
        cells = resolve_cells(spec)
        assert cells[1]["colsample_bytree"] == 0.6 and cells[1]["subsample"] == 0.6
        assert cells[2]["colsample_bytree"] == 0.8 and cells[2]["subsample"] == 0.8

    def test_cartesian_product(self):
        spec = GridSpec(model_kind="boosted", mode="cartesian",
                        axes={"max_depth": [2, 3], "eta": [0.1, 0.3]})
        cells = resolve_cells(spec)
        assert len(cells) == 4
        assert {(c["max_depth"], c["eta"]) for c in cells} == {
            (2, 0.1), (2, 0.3), (3, 0.1), (3, 0.3)
        }

    def test_rows_mode_overrides_fixed(self):
        spec = GridSpec(model_kind="boosted", mode="rows",
                        rows=[{}, {"eta": 0.2}], fixed={"eta": 0.1, "max_depth": 4})
        cells = resolve_cells(spec)
        assert cells[0]["eta"] == 0.1 and cells[1]["eta"] == 0.2

    def test_lambda_alias(self):
        spec = GridSpec(model_kind="boosted", mode="rows",
                        rows=[{"lambda": 2.0}], fixed={})
        assert resolve_cells(spec)[0]["reg_lambda"] == 2.0

    def test_unknown_parameter_rejected(self):
        with pytest.raises(GridError, match="no_bananas"):
            GridSpec(model_kind="forest", axes={"no_bananas": [1]})

    def test_unknown_metric_rejected(self):
        with pytest.raises(GridError, match="rmse"):
            GridSpec(model_kind="forest", axes={"no_trees": [1]}, metric="rmse")


class TestRunGrid:
    def test_single_cell_equals_direct_fit(self, small_split):
        train, test = small_split
        spec = GridSpec(model_kind="boosted", mode="rows", seed=5,
                        rows=[{}], fixed={"n_rounds": 10, "max_depth": 3, "eta": 0.3})
        results = run_grid(spec, train, test)
        assert len(results) == 1
        params = BoostParams(n_rounds=10, max_depth=3, eta=0.3, seed=5)
        model = fit_boosted(train, params)
        direct = auc_score(predict_proba_boosted(model, test), test.labels)
        assert results[0].test_metric == direct

    def test_results_sorted_descending_with_stable_ties(self):
        trials = [
            TrialResult(params={}, train_metric=0, test_metric=0.8, fit_seconds=0, index=0),
            TrialResult(params={}, train_metric=0, test_metric=0.9, fit_seconds=0, index=1),
            TrialResult(params={}, train_metric=0, test_metric=0.8, fit_seconds=0, index=2),
        ]
        assert best_trial(trials).index == 1
        tied = [trials[0], trials[2]]
        assert best_trial(tied) is trials[0]

    def test_best_trial_empty_errors(self):
        with pytest.raises(GridError):
            best_trial([])

    def test_rerun_is_identical(self, small_split, tmp_path):
        train, test = small_split
        spec = GridSpec(model_kind="forest", mode="ofat", seed=3,
                        axes={"no_trees": [5, 10]},
                        fixed={"no_trees": 8, "sample_leaf": 3, "max_features": 3})
        a = run_grid(spec, train, test)
        b = run_grid(spec, train, test)
        assert [r.test_metric for r in a] == [r.test_metric for r in b]
        assert [r.params for r in a] == [r.params for r in b]
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trial_table(a, "forest", "auc", pa)
        write_trial_table(b, "forest", "auc", pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_threads_do_not_change_results(self, small_split):
        train, test = small_split
        spec = GridSpec(model_kind="boosted", mode="ofat", seed=3,
                        axes={"max_depth": [2, 3]},
                        fixed={"n_rounds": 5, "eta": 0.3})
        a = run_grid(spec, train, test, threads=1)
        b = run_grid(spec, train, test, threads=4)
        assert [r.test_metric for r in a] == [r.test_metric for r in b]

    def test_every_trial_matches_independent_fit(self, small_split):
        train, test = small_split
        spec = GridSpec(model_kind="boosted", mode="rows", seed=9,
                        rows=[{}, {"eta": 0.5}, {"max_depth": 2}],
                        fixed={"n_rounds": 6, "max_depth": 3, "eta": 0.2})
        for r in run_grid(spec, train, test):
            params = BoostParams(**r.params)
            model = fit_boosted(train, params)
            assert r.test_metric == auc_score(predict_proba_boosted(model, test), test.labels)


class TestTable2Shape:
    def test_twelve_rows_in_paper_column_order(self, small_split, tmp_path):
        grid_path = tmp_path / "grid.cfg"
        grid_path.write_text(TABLE2_GRID, encoding="utf-8")
        spec = read_grid(grid_path)
        assert spec.mode == "rows" and spec.seed == 11
        cells = resolve_cells(spec)
        assert len(cells) == 12
        assert cells[0]["alpha"] == 1 and cells[10]["alpha"] == 0.1
        assert cells[11] == {**cells[0], "colsample_bytree": 0.8, "subsample": 0.8, "alpha": 0.1}

        train, test = small_split
        results = run_grid(spec, train, test)
        table = tmp_path / "table.csv"
        columns = write_trial_table(results, spec.model_kind, spec.metric, table)
        assert columns == ["max_depth", "eta", "colsample_bytree", "subsample",
                           "min_child_weight", "gamma", "alpha", "val_auc"]
        lines = table.read_text().splitlines()
        assert lines[0] == "max_depth,eta,colsample_bytree,subsample,min_child_weight,gamma,alpha,val_auc"
        assert len(lines) == 13
        best = best_trial(results)
        assert best.test_metric == max(r.test_metric for r in results)
        assert float(lines[1].split(",")[-1]) == best.test_metric
