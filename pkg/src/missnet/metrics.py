"""AUC, standardized MSE and the Wilcoxon rank-sum test."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, rankdata

from .errors import MetricError


@dataclass(frozen=True)
class EvalReport:
    metric: str
    value: float
    n: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.metric == "auc" and not 0.0 <= self.value <= 1.0:
            raise MetricError(f"AUC out of range: {self.value}")
        if self.metric == "smse" and self.value < 0:
            raise MetricError(f"negative SMSE: {self.value}")


def auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative (ties count 1/2)."""
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise MetricError("scores and labels differ in length")
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0 or n_pos + n_neg != labels.size:
        raise MetricError("AUC needs 0/1 labels with both classes present")
    ranks = rankdata(scores)
    # U statistic of the positives; midranks make ties count half.
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def smse(preds, targets) -> float:
    """Mean squared error over the population variance of the targets."""
    preds = np.asarray(preds, dtype=float).ravel()
    targets = np.asarray(targets, dtype=float).ravel()
    if preds.shape != targets.shape or targets.size < 2:
        raise MetricError("smse needs equal-length inputs of length >= 2")
    var = targets.var()
    if var == 0:
        raise MetricError("smse undefined for constant targets")
    return float(np.mean((preds - targets) ** 2) / var)


def rank_sum_test(a, b) -> float:
    """Two-sided Mann-Whitney / Wilcoxon rank-sum p-value.

    Normal approximation with midranks, tie-corrected variance and a
    continuity correction of 1/2.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    n1, n2 = a.size, b.size
    if n1 < 5 or n2 < 5:
        raise MetricError("rank-sum test needs at least 5 observations per sample")
    ranks = rankdata(np.concatenate([a, b]))
    u = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    n = n1 + n2
    _, ties = np.unique(ranks, return_counts=True)
    var = n1 * n2 / 12.0 * ((n + 1) - np.sum(ties ** 3 - ties) / (n * (n - 1)))
    if var <= 0:
        return 1.0
    z = max(abs(u - n1 * n2 / 2.0) - 0.5, 0.0) / math.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(z)))
