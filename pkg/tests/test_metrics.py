import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import average_precision_score, roc_auc_score

from gprgae.metrics import ap, auc


def brute_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return total / (len(pos) * len(neg))


def brute_ap(scores, labels):
    # precision at each distinct threshold, weighted by the recall it adds
    out, prev_tp = 0.0, 0
    for t in sorted(set(scores.tolist()), reverse=True):
        sel = scores >= t
        tp = int(labels[sel].sum())
        out += tp / sel.sum() * (tp - prev_tp) / labels.sum()
        prev_tp = tp
    return out


def test_perfect_and_reversed():
    s = np.array([0.9, 0.8, 0.2, 0.1])
    y = np.array([1, 1, 0, 0])
    assert auc(s, y) == 1.0 and ap(s, y) == 1.0
    assert auc(-s, y) == 0.0


def test_all_tied_gives_half():
    assert auc(np.full(6, 0.3), [1, 0, 1, 0, 0, 1]) == 0.5


def test_single_class_rejected():
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        ap([0.1, 0.2], [0, 0])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=10))
def test_match_brute_force(items):
    scores = np.array([s for s, _ in items], dtype=float)
    labels = np.array([int(b) for _, b in items])
    if labels.min() == labels.max():
        return
    assert auc(scores, labels) == pytest.approx(brute_auc(scores, labels), abs=1e-12)
    assert ap(scores, labels) == pytest.approx(brute_ap(scores, labels), abs=1e-12)
    assert auc(scores, labels) == pytest.approx(roc_auc_score(labels, scores), abs=1e-12)
    assert ap(scores, labels) == pytest.approx(average_precision_score(labels, scores), abs=1e-12)
