"""Second-order gradient-boosted trees with a regularized objective.

Each round fits one tree to the first- and second-order derivatives (g, h) of
the binary log-loss at the current margins, over a per-round row subsample
and column subset.  Split quality is the reduction of the regularized
second-order objective

    gain = 1/2 * [ s(GL)^2/(HL+lambda) + s(GR)^2/(HR+lambda)
                   - s(GL+GR)^2/(HL+HR+lambda) ] - gamma

where s() is the alpha soft-threshold, and the optimal leaf weight is
-s(G)/(H+lambda).  Candidates are rejected when the gain is <= 0 or either
child's hessian mass is below min_child_weight.  Leaf values are stored
already multiplied by eta, so prediction is sigmoid(base margin + plain sum
over trees).

Note on lambda: the production hyperparameter list names alpha (L1) and gamma
but leaves the L2 term implicit; it is exposed here as reg_lambda with
default 1.0 because the gain formula needs it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dataset import ColumnMeta, EncodedMatrix, floor_fraction
from .errors import FitError, UsageError
from .rng import stream
from .tree import Tree, TreeBuilder, best_split

_ROUND_STREAM = 0xB0


@dataclass
class BoostParams:
    n_rounds: int = 200
    max_depth: int = 6
    eta: float = 0.1
    colsample_bytree: float = 1.0
    subsample: float = 1.0
    min_child_weight: float = 1.0
    gamma: float = 0.0
    alpha: float = 0.0
    reg_lambda: float = 1.0
    base_score: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_rounds < 1:
            raise UsageError(f"n_rounds must be >= 1, got {self.n_rounds}")
        if self.max_depth < 1:
            raise UsageError(f"max_depth must be >= 1, got {self.max_depth}")
        for name in ("colsample_bytree", "subsample"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise UsageError(f"{name} must be in (0, 1], got {v}")
        for name in ("min_child_weight", "gamma", "alpha", "reg_lambda"):
            if getattr(self, name) < 0.0:
                raise UsageError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 < self.base_score < 1.0:
            raise UsageError(f"base_score must be in (0, 1), got {self.base_score}")


class GradHess(NamedTuple):
    g: np.ndarray | float
    h: np.ndarray | float


def sigmoid(margin):
    scalar = np.ndim(margin) == 0
    m = np.atleast_1d(np.asarray(margin, dtype=np.float64))
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    e = np.exp(m[~pos])
    out[~pos] = e / (1.0 + e)
    return float(out[0]) if scalar else out


def logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))


def log_loss(margins, labels) -> float:
    """Mean binary log-loss of margins against 0/1 labels (stable form)."""
    m = np.asarray(margins, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, (1.0 - 2.0 * y) * m)))


def logistic_grad_hess(margin, label) -> GradHess:
    """g = p - label, h = p(1-p) with p = sigmoid(margin)."""
    p = sigmoid(margin)
    if np.ndim(margin) == 0:
        return GradHess(g=p - float(label), h=p * (1.0 - p))
    y = np.asarray(label, dtype=np.float64)
    return GradHess(g=p - y, h=p * (1.0 - p))


def _soft(G, alpha: float):
    return np.sign(G) * np.maximum(np.abs(G) - alpha, 0.0)


def leaf_weight(G: float, H: float, params: BoostParams) -> float:
    """Optimal regularized leaf weight -soft(G)/(H + lambda)."""
    denom = H + params.reg_lambda
    if denom <= 0.0:
        return 0.0
    return float(-_soft(G, params.alpha) / denom)


def split_gain(GL: float, HL: float, GR: float, HR: float, params: BoostParams) -> float:
    """Objective reduction of splitting (GL+GR, HL+HR) into the two children,
    minus the gamma floor.  May be <= 0; acceptance is the caller's call."""
    lam = params.reg_lambda

    def score(G, H):
        denom = H + lam
        if denom <= 0.0:
            return 0.0
        s = _soft(G, params.alpha)
        return s * s / denom

    return 0.5 * (score(GL, HL) + score(GR, HR) - score(GL + GR, HL + HR)) - params.gamma


class GainCriterion:
    """Vectorized second-order gain for best_split."""

    def __init__(self, g: np.ndarray, h: np.ndarray, params: BoostParams) -> None:
        self._stats = np.column_stack([g, h])
        self.params = params

    def row_stats(self, rows: np.ndarray) -> np.ndarray:
        return self._stats[rows]

    def gains(self, left: np.ndarray, total: np.ndarray) -> np.ndarray:
        p = self.params
        gl = left[..., 0]
        hl = left[..., 1]
        gt = total[..., 0]
        ht = total[..., 1]
        gr = gt - gl
        hr = ht - hl

        def score(G, H):
            denom = H + p.reg_lambda
            s = _soft(G, p.alpha)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(denom > 0.0, s * s / denom, 0.0)

        gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(gt, ht)) - p.gamma
        bad = (np.minimum(hl, hr) < p.min_child_weight) | (gain <= 0.0)
        return np.where(bad, -np.inf, gain)


@dataclass
class BoostedModel:
    trees: list[Tree]
    params: BoostParams
    col_meta: list[ColumnMeta] | None
    importance: np.ndarray  # normalized total gain per feature

    @property
    def base_margin(self) -> float:
        return logit(self.params.base_score)


def _as_X(rows) -> np.ndarray:
    if isinstance(rows, EncodedMatrix):
        return rows.X
    return np.asarray(rows, dtype=np.float64)


def _grow_tree(
    X: np.ndarray,
    rows: np.ndarray,
    feats: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    crit: GainCriterion,
    params: BoostParams,
    importance: np.ndarray,
) -> Tree | None:
    """Greedy tree to max_depth; None when the root has no accepted split."""
    builder = TreeBuilder()
    stack = [(rows, 0, -1, False)]
    root = -1
    while stack:
        node_rows, depth, parent, is_left = stack.pop()
        cand = None
        if depth < params.max_depth and node_rows.size >= 2:
            cand = best_split(X, node_rows, feats, crit)
        if cand is None:
            if parent < 0:
                return None
            G = float(g[node_rows].sum())
            H = float(h[node_rows].sum())
            nid = builder.add_leaf(params.eta * leaf_weight(G, H, params))
        else:
            importance[cand.feature] += cand.score
            nid = builder.add_split(cand.feature, cand.threshold)
            go_left = X[node_rows, cand.feature] <= cand.threshold
            stack.append((node_rows[~go_left], depth + 1, nid, False))
            stack.append((node_rows[go_left], depth + 1, nid, True))
        if parent < 0:
            root = nid
        elif is_left:
            builder.left[parent] = nid
        else:
            builder.right[parent] = nid
    return builder.build(root)


def fit_boosted(train: EncodedMatrix, params: BoostParams) -> BoostedModel:
    """Additive training: rounds are strictly sequential; the tree of round r
    is built from (g, h) at the margins left by rounds 0..r-1.

    Sampled rows and columns drive the tree structure, but the margin update
    applies to every row (standard stochastic boosting semantics).
    """
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

    y = labels.astype(np.float64)
    margins = np.full(n, logit(params.base_score))
    trees: list[Tree] = []
    importance = np.zeros(d)

    all_rows = np.arange(n)
    all_cols = np.arange(d)
    for r in range(params.n_rounds):
        rng = stream(params.seed, _ROUND_STREAM, r)
        if params.colsample_bytree < 1.0:
            k = max(1, floor_fraction(params.colsample_bytree, d))
            feats = np.sort(rng.choice(d, size=k, replace=False))
        else:
            feats = all_cols
        if params.subsample < 1.0:
            m = max(1, floor_fraction(params.subsample, n))
            rows = np.sort(rng.choice(n, size=m, replace=False))
        else:
            rows = all_rows

        g, h = logistic_grad_hess(margins, y)
        crit = GainCriterion(g, h, params)
        tree = _grow_tree(X, rows, feats, g, h, crit, params, importance)
        if tree is None:
            continue  # no split cleared the gamma floor: the round adds no tree
        margins += tree.predict(X)
        trees.append(tree)

    total = importance.sum()
    if total > 0.0:
        importance = importance / total
    return BoostedModel(trees=trees, params=params, col_meta=train.col_meta, importance=importance)


def predict_margin(model: BoostedModel, rows) -> np.ndarray:
    X = _as_X(rows)
    acc = np.full(X.shape[0], model.base_margin)
    for tree in model.trees:
        acc += tree.predict(X)
    return acc


def predict_proba_boosted(model: BoostedModel, rows) -> np.ndarray:
    """sigmoid(base margin + sum of eta-scaled leaf values)."""
    return sigmoid(predict_margin(model, rows))


def training_loss_curve(model: BoostedModel, train: EncodedMatrix) -> np.ndarray:
    """Mean training log-loss after each prefix of rounds (entry 0 = base).

    Not guaranteed monotone under row/column subsampling; reported as-is.
    """
    X = train.X
    labels = train.labels
    if labels is None:
        raise FitError("training matrix has no labels")
    margins = np.full(X.shape[0], model.base_margin)
    losses = [log_loss(margins, labels)]
    for tree in model.trees:
        margins += tree.predict(X)
        losses.append(log_loss(margins, labels))
    return np.asarray(losses)
