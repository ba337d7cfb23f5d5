"""Score-based evaluation: confusion sweeps, PR and ROC curves, AUC, Lorenz
curves and the K-S statistic.

Conventions (documented because the underlying business definitions are
orientation-sensitive): label 1 is the bad/default case, higher score means
more likely bad, a row is predicted positive iff score >= threshold, tied
scores collapse to a single operating point, and precision with zero
predicted positives is defined as 1.0.  If a score anti-correlates with the
labels the K-S value is reported on the raw orientation (near 0), never
auto-flipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass
class ScoredSet:
    """Per-row scores with binary labels (1 = bad/default)."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.scores.ndim != 1 or self.labels.ndim != 1:
            raise EvaluationError("scores and labels must be 1-D")
        if self.scores.size != self.labels.size or self.scores.size < 1:
            raise EvaluationError("scores and labels must have equal length >= 1")
        if not np.all(np.isfinite(self.scores)):
            raise EvaluationError("scores contain non-finite values")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise EvaluationError("labels must be 0 or 1")

    @property
    def positives(self) -> int:
        return int(self.labels.sum())

    @property
    def negatives(self) -> int:
        return int(self.labels.size - self.labels.sum())


@dataclass
class CurveReport:
    """All curves derived from one sort-and-sweep over a ScoredSet.

    pr_points rows are (recall, precision, threshold); roc_points rows are
    (fpr, tpr, threshold), anchored at (0, 0) and ending at (1, 1); lorenz
    rows are (sample_fraction, cum_bad_fraction, cum_good_fraction), one per
    distinct score.
    """

    pr_points: np.ndarray
    roc_points: np.ndarray
    auc: float
    lorenz: np.ndarray
    ks: float
    ks_at_fraction: float
    n: int = 0
    positives: int = 0
    average_precision: float = field(default=float("nan"))


def confusion_at(s: ScoredSet, threshold: float) -> ConfusionCounts:
    """Confusion counts with positives predicted at score >= threshold."""
    pred = s.scores >= threshold
    pos = s.labels == 1
    tp = int(np.count_nonzero(pred & pos))
    fp = int(np.count_nonzero(pred & ~pos))
    fn = int(np.count_nonzero(~pred & pos))
    tn = int(np.count_nonzero(~pred & ~pos))
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def precision(c: ConfusionCounts) -> float:
    """tp/(tp+fp); 1.0 when nothing is predicted positive."""
    if c.tp + c.fp == 0:
        return 1.0
    return c.tp / (c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    """tp/(tp+fn); undefined without positives."""
    if c.tp + c.fn == 0:
        raise EvaluationError("recall undefined: no positive labels")
    return c.tp / (c.tp + c.fn)


def _sweep(s: ScoredSet) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Descending-score sweep collapsed to distinct thresholds.

    Returns (thresholds, tp, fp, n_seen) where entry i counts rows with
    score >= thresholds[i].
    """
    order = np.argsort(-s.scores, kind="stable")
    sorted_scores = s.scores[order]
    sorted_labels = s.labels[order]
    # last index of each tied block = the operating point for that threshold
    cut = np.nonzero(np.diff(sorted_scores))[0]
    idx = np.concatenate([cut, [sorted_scores.size - 1]])
    tp = np.cumsum(sorted_labels)[idx].astype(np.float64)
    n_seen = (idx + 1).astype(np.float64)
    fp = n_seen - tp
    return sorted_scores[idx], tp, fp, n_seen


def pr_curve(s: ScoredSet) -> np.ndarray:
    """(recall, precision, threshold) per distinct threshold, descending,
    preceded by the recall-0 anchor at threshold +inf."""
    n_pos = s.positives
    if n_pos == 0:
        raise EvaluationError("PR curve undefined: no positive labels")
    thresholds, tp, fp, _ = _sweep(s)
    rec = tp / n_pos
    prec = tp / (tp + fp)
    points = np.column_stack([rec, prec, thresholds])
    anchor = np.array([[0.0, 1.0, np.inf]])
    return np.concatenate([anchor, points])


def roc_auc(s: ScoredSet) -> tuple[np.ndarray, float]:
    """ROC points (fpr, tpr, threshold) with tied scores collapsed, plus the
    trapezoidal AUC."""
    n_pos, n_neg = s.positives, s.negatives
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("ROC undefined: both classes must be present")
    thresholds, tp, fp, _ = _sweep(s)
    tpr = tp / n_pos
    fpr = fp / n_neg
    points = np.column_stack(
        [np.concatenate([[0.0], fpr]),
         np.concatenate([[0.0], tpr]),
         np.concatenate([[np.inf], thresholds])]
    )
    x = points[:, 0]
    y = points[:, 1]
    auc = float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) * 0.5))
    return points, auc


def ks_lorenz(s: ScoredSet) -> tuple[np.ndarray, float, float]:
    """Lorenz cuts (sample_fraction, cum_bad, cum_good) sorted by descending
    score; K-S = max(cum_bad - cum_good) and the first sample fraction
    achieving it."""
    n_pos, n_neg = s.positives, s.negatives
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("K-S undefined: both classes must be present")
    _, tp, fp, n_seen = _sweep(s)
    cum_bad = tp / n_pos
    cum_good = fp / n_neg
    frac = n_seen / s.scores.size
    gaps = cum_bad - cum_good
    k = int(np.argmax(gaps))
    return np.column_stack([frac, cum_bad, cum_good]), float(gaps[k]), float(frac[k])


def average_precision(s: ScoredSet) -> float:
    """Step-sum AP over the distinct-threshold PR points."""
    points = pr_curve(s)
    rec = points[:, 0]
    prec = points[:, 1]
    return float(np.sum((rec[1:] - rec[:-1]) * prec[1:]))


def evaluate_scores(s: ScoredSet) -> CurveReport:
    """Full curve report from one sweep; both classes required.

    Asserts the K-S / ROC consistency identity ks == max(tpr - fpr) on every
    call: the two are computed from the same sweep and must agree exactly.
    """
    pr = pr_curve(s)
    roc, auc = roc_auc(s)
    lorenz, ks, ks_at = ks_lorenz(s)
    roc_gap = float(np.max(roc[:, 1] - roc[:, 0]))
    if ks != roc_gap:
        raise AssertionError(f"K-S consistency violated: ks={ks!r} max(tpr-fpr)={roc_gap!r}")
    return CurveReport(
        pr_points=pr,
        roc_points=roc,
        auc=auc,
        lorenz=lorenz,
        ks=ks,
        ks_at_fraction=ks_at,
        n=int(s.scores.size),
        positives=s.positives,
        average_precision=average_precision(s),
    )


def auc_score(scores: np.ndarray, labels: np.ndarray) -> float:
    return roc_auc(ScoredSet(scores, labels))[1]


def ks_score(scores: np.ndarray, labels: np.ndarray) -> float:
    return ks_lorenz(ScoredSet(scores, labels))[1]


def avg_precision_score(scores: np.ndarray, labels: np.ndarray) -> float:
    return average_precision(ScoredSet(scores, labels))
