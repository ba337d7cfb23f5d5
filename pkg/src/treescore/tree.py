"""Binary decision trees with exact greedy split search.

A tree is a flat node store: parallel arrays (feature, threshold, left,
right, value) where ``feature == -1`` marks a leaf.  Routing is strictly
"go left iff x[feature] <= threshold".

Split search is the exact sorted-scan algorithm, not a histogram
approximation: every candidate feature column is sorted (O(n log n) per
feature) and every midpoint between adjacent distinct values is scored by the
criterion.  Exactness is what lets brute-force oracles verify the chosen
split in tests.  Ties are broken deterministically: higher score, then lower
feature index, then lower threshold, so permuting the candidate feature list
never changes the result.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

LEAF = -1


@dataclass
class SplitCandidate:
    """Winning split for one node; score is the criterion gain."""

    feature: int
    threshold: float
    score: float
    left_count: int
    right_count: int


@dataclass
class Tree:
    """Immutable after construction; safe to share across threads."""

    feature: np.ndarray    # int32, LEAF for leaves
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32 child ids
    right: np.ndarray
    value: np.ndarray      # float64 leaf payload
    root: int = 0

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def n_splits(self) -> int:
        return int(np.count_nonzero(self.feature >= 0))

    @property
    def depth(self) -> int:
        """Maximum root-to-leaf edge count."""
        best = 0
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            if self.feature[node] < 0:
                best = max(best, d)
            else:
                stack.append((int(self.left[node]), d + 1))
                stack.append((int(self.right[node]), d + 1))
        return best

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Route every row of X to its leaf value (vectorized by level)."""
        X = np.asarray(X, dtype=np.float64)
        node = np.full(X.shape[0], self.root, dtype=np.int64)
        active = np.nonzero(self.feature[node] >= 0)[0]
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return self.value[node]


def predict_row(tree: Tree, row: Sequence[float]) -> float:
    """Route a single feature vector to its leaf value."""
    row = np.asarray(row, dtype=np.float64)
    node = tree.root
    while tree.feature[node] >= 0:
        if row[tree.feature[node]] <= tree.threshold[node]:
            node = int(tree.left[node])
        else:
            node = int(tree.right[node])
    return float(tree.value[node])


class TreeBuilder:
    """Append-only node store used while growing a tree."""

    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add_leaf(self, value: float) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(float(value))
        return len(self.feature) - 1

    def add_split(self, feature: int, threshold: float) -> int:
        self.feature.append(int(feature))
        self.threshold.append(float(threshold))
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(0.0)
        return len(self.feature) - 1

    def link(self, node: int, left: int, right: int) -> None:
        self.left[node] = left
        self.right[node] = right

    def build(self, root: int = 0) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
            root=root,
        )


class SplitCriterion(Protocol):
    """Vectorized split-quality callback used by best_split.

    ``row_stats(rows)`` returns one statistics row per training row, shape
    (m, c).  ``gains(left, total)`` receives the left-side prefix sums at
    every candidate boundary, shape (b, k, c), and the per-feature totals,
    shape (k, c); it returns the gain score per (boundary, feature), with
    -inf for candidates that fail the criterion's acceptance floor or its
    minimum-child constraints.
    """

    def row_stats(self, rows: np.ndarray) -> np.ndarray: ...

    def gains(self, left: np.ndarray, total: np.ndarray) -> np.ndarray: ...


def best_split(
    X: np.ndarray,
    rows: np.ndarray,
    candidate_features: Sequence[int],
    criterion: SplitCriterion,
) -> SplitCandidate | None:
    """Exhaustive scan over candidate features and distinct-value midpoints.

    Returns the maximal-score candidate, or None when no boundary yields two
    non-empty sides with a score above the criterion's floor.
    """
    rows = np.asarray(rows)
    feats = np.unique(np.asarray(candidate_features, dtype=np.int64))
    m = rows.size
    if m < 2 or feats.size == 0:
        return None

    sub = X[np.ix_(rows, feats)]                      # (m, k)
    order = np.argsort(sub, axis=0, kind="stable")
    svals = np.take_along_axis(sub, order, axis=0)
    stats = criterion.row_stats(rows)                 # (m, c)
    cum = np.cumsum(stats[order], axis=0)             # (m, k, c)
    left = cum[:-1]                                   # (b, k, c) boundary prefixes
    total = cum[-1]                                   # (k, c)

    gains = criterion.gains(left, total)              # (b, k)
    gains[svals[1:] == svals[:-1]] = -np.inf          # no boundary inside a tie run

    best: SplitCandidate | None = None
    for j in range(feats.size):
        i = int(np.argmax(gains[:, j]))               # first max = lowest threshold
        score = gains[i, j]
        if not np.isfinite(score):
            continue
        if best is None or score > best.score:
            lo = svals[i, j]
            hi = svals[i + 1, j]
            thr = lo + (hi - lo) / 2.0
            if thr >= hi:                             # adjacent floats round up
                thr = lo
            best = SplitCandidate(
                feature=int(feats[j]),
                threshold=float(thr),
                score=float(score),
                left_count=i + 1,
                right_count=m - 1 - i,
            )
    return best
