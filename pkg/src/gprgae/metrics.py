"""Rank-based ROC AUC and step-interpolated average precision."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == len(labels):
        raise ValueError("both classes must be present")
    return scores, labels, n_pos


def auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied scores receive midranks (a tie counts 1/2)."""
    scores, labels, n_pos = _check(scores, labels)
    n_neg = len(labels) - n_pos
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def ap(scores, labels) -> float:
    """Average precision: sum over distinct thresholds of precision times recall gain."""
    scores, labels, n_pos = _check(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    # last index of every block of tied scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(y)[ends]
    precision = tp / (ends + 1)
    recall_gain = np.diff(np.r_[0, tp]) / n_pos
    return float(np.sum(precision * recall_gain))
