import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_scored_set(rng, max_n=500):
    """Random scores/labels with both classes present; half the time the
    scores are quantized so tied thresholds get exercised."""
    n = int(rng.integers(2, max_n + 1))
    labels = rng.integers(0, 2, size=n)
    if labels.sum() == 0:
        labels[int(rng.integers(0, n))] = 1
    if labels.sum() == n:
        labels[int(rng.integers(0, n))] = 0
    if rng.random() < 0.5:
        scores = np.round(rng.random(n), 2)
    else:
        scores = rng.normal(size=n)
    return scores, labels


def random_labeled_matrix(rng, n, d):
    """Continuous feature matrix with noisy linear labels, both classes."""
    X = rng.normal(size=(n, d))
    w = rng.normal(size=d)
    margin = X @ w + 0.5 * rng.normal(size=n)
    labels = (margin > np.median(margin)).astype(np.int64)
    return X, labels
