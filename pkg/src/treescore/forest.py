"""Random forest for binary default prediction.

Each tree trains on a bootstrap sample of n rows drawn with replacement; at
every node a fresh uniform subset of max_features columns is drawn and the
best gini-impurity-decrease split is taken.  Leaf values are the fraction of
class-1 rows, so the ensemble score is the mean leaf fraction (a continuous
probability), and class assignment at threshold 0.5 coincides with majority
vote when leaves are pure.

Every tree owns an independent seeded stream, so fitting is bitwise
deterministic for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import ColumnMeta, EncodedMatrix
from .errors import FitError, UsageError
from .rng import stream
from .tree import Tree, TreeBuilder, best_split

_TREE_STREAM = 0xF0


@dataclass
class ForestParams:
    no_trees: int = 500
    sample_split: int = 2     # min rows to split an internal node
    sample_leaf: int = 1      # min rows in each child
    max_features: int | str = "sqrt"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.no_trees < 1:
            raise UsageError(f"no_trees must be >= 1, got {self.no_trees}")
        if self.sample_split < 2:
            raise UsageError(f"sample_split must be >= 2, got {self.sample_split}")
        if self.sample_leaf < 1:
            raise UsageError(f"sample_leaf must be >= 1, got {self.sample_leaf}")
        if isinstance(self.max_features, str):
            if self.max_features != "sqrt":
                raise UsageError(f"max_features must be a count or 'sqrt', got {self.max_features!r}")
        elif self.max_features < 1:
            raise UsageError(f"max_features must be >= 1, got {self.max_features}")


def resolve_max_features(max_features: int | str, n_cols: int) -> int:
    """'sqrt' -> floor(sqrt(n_cols)), clamped to [1, n_cols]."""
    if max_features == "sqrt":
        k = int(math.floor(math.sqrt(n_cols)))
    else:
        k = int(max_features)
    if k > n_cols:
        raise UsageError(f"max_features {k} exceeds column count {n_cols}")
    return max(1, k)


@dataclass
class ForestModel:
    trees: list[Tree]
    params: ForestParams
    col_meta: list[ColumnMeta] | None
    importance: np.ndarray  # normalized mean decrease in impurity


class GiniCriterion:
    """Weighted gini impurity decrease with a strict > 0 acceptance floor and
    a minimum-rows-per-child constraint."""

    def __init__(self, labels: np.ndarray, min_leaf: int = 1) -> None:
        labels = np.asarray(labels, dtype=np.float64)
        self._stats = np.column_stack([np.ones_like(labels), labels])
        self.min_leaf = int(min_leaf)

    def row_stats(self, rows: np.ndarray) -> np.ndarray:
        return self._stats[rows]

    def gains(self, left: np.ndarray, total: np.ndarray) -> np.ndarray:
        nl = left[..., 0]
        pl = left[..., 1]
        n = total[..., 0]
        p = total[..., 1]
        nr = n - nl
        pr = p - pl
        frac = p / n
        fl = pl / nl
        fr = pr / nr
        # keep the canonical impurity(node) - weight*impurity(child) shape:
        # counts are exact in float64, so any direct recount reproduces these
        # gains bitwise and ties resolve identically everywhere
        g_node = 2.0 * frac * (1.0 - frac)
        g_left = 2.0 * fl * (1.0 - fl)
        g_right = 2.0 * fr * (1.0 - fr)
        dec = g_node - (nl / n) * g_left - (nr / n) * g_right
        bad = (nl < self.min_leaf) | (nr < self.min_leaf) | (dec <= 0.0)
        return np.where(bad, -np.inf, dec)


def _as_X(rows) -> np.ndarray:
    if isinstance(rows, EncodedMatrix):
        return rows.X
    return np.asarray(rows, dtype=np.float64)


def _fit_tree(
    X: np.ndarray,
    labels: np.ndarray,
    params: ForestParams,
    max_features: int,
    tree_index: int,
    bootstrap: bool,
) -> tuple[Tree, np.ndarray]:
    n, d = X.shape
    rng = stream(params.seed, _TREE_STREAM, tree_index)
    if bootstrap:
        rows = rng.integers(0, n, size=n)   # exactly n draws with replacement
    else:
        rows = np.arange(n)
    crit = GiniCriterion(labels, min_leaf=params.sample_leaf)
    importance = np.zeros(d)

    builder = TreeBuilder()
    # explicit stack: unpruned trees can exceed the interpreter recursion limit
    stack = [(rows, -1, False)]
    root = -1
    while stack:
        node_rows, parent, is_left = stack.pop()
        m = node_rows.size
        pos = float(labels[node_rows].sum())
        cand = None
        if m >= params.sample_split and 0.0 < pos < m:
            feats = np.sort(rng.choice(d, size=max_features, replace=False))
            cand = best_split(X, node_rows, feats, crit)
        if cand is None:
            nid = builder.add_leaf(pos / m)
        else:
            importance[cand.feature] += (m / n) * cand.score
            nid = builder.add_split(cand.feature, cand.threshold)
            go_left = X[node_rows, cand.feature] <= cand.threshold
            # push right first so the left child is processed (and numbered) first
            stack.append((node_rows[~go_left], nid, False))
            stack.append((node_rows[go_left], nid, True))
        if parent < 0:
            root = nid
        elif is_left:
            builder.left[parent] = nid
        else:
            builder.right[parent] = nid
    return builder.build(root), importance


def fit_forest(
    train: EncodedMatrix,
    params: ForestParams,
    *,
    bootstrap: bool = True,
    threads: int = 1,
) -> ForestModel:
    """Fit a random forest; deterministic for fixed (data, params, seed)
    regardless of thread count."""
    X = train.X
    labels = train.labels
    if labels is None:
        raise FitError("training matrix has no labels")
    n, d = X.shape
    if n == 0:
        raise FitError("training matrix is empty")
    pos = int(labels.sum())
    if pos == 0 or pos == n:
        raise FitError("training labels contain a single class")
    max_features = resolve_max_features(params.max_features, d)

    def one(t: int) -> tuple[Tree, np.ndarray]:
        return _fit_tree(X, labels, params, max_features, t, bootstrap)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(params.no_trees)))
    else:
        results = [one(t) for t in range(params.no_trees)]

    trees = [t for t, _ in results]
    importance = np.zeros(d)
    for _, imp in results:        # fixed summation order keeps results bitwise stable
        importance += imp
    total = importance.sum()
    if total > 0.0:
        importance = importance / total
    return ForestModel(trees=trees, params=params, col_meta=train.col_meta, importance=importance)


def predict_proba_forest(model: ForestModel, rows) -> np.ndarray:
    """Mean of per-tree leaf class-1 fractions."""
    X = _as_X(rows)
    acc = np.zeros(X.shape[0])
    for tree in model.trees:
        acc += tree.predict(X)
    return acc / len(model.trees)


def predict_class_forest(model: ForestModel, rows, threshold: float = 0.5) -> np.ndarray:
    """Class 1 iff probability >= threshold (ties go to class 1)."""
    if not 0.0 < threshold < 1.0:
        raise UsageError(f"threshold must be in (0, 1), got {threshold}")
    return (predict_proba_forest(model, rows) >= threshold).astype(np.int64)
