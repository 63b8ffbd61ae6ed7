"""Synthetic planted-partition graphs with class-correlated features."""

from __future__ import annotations

import numpy as np

from .graph import LabeledGraph, SparseAdjacency


def planted_partition(n_nodes: int = 600, n_classes: int = 5, p_in: float = 0.05,
                      p_out: float = 0.003, n_features: int = 16, feature_noise: float = 1.5,
                      n_train_per_class: int = 20, n_val_per_class: int = 20,
                      test_fraction: float = 0.2, labeled_fraction: float = 1.0,
                      random_state=0) -> LabeledGraph:
    """Sample a planted-partition graph and an inductive split.

    Node ``v`` has class ``v % n_classes`` before shuffling.  Features are a
    random unit class mean plus isotropic Gaussian noise of scale
    ``feature_noise``.  The split holds ``n_train_per_class`` and
    ``n_val_per_class`` labeled nodes per class and a stratified test set of
    ``test_fraction`` of all nodes; remaining nodes are unlabeled training
    nodes unless ``labeled_fraction`` keeps their labels.
    """
    rng = np.random.default_rng(random_state)
    labels = rng.permutation(np.arange(n_nodes) % n_classes)

    iu, ju = np.triu_indices(n_nodes, k=1)
    same = labels[iu] == labels[ju]
    prob = np.where(same, p_in, p_out)
    keep = rng.random(len(iu)) < prob
    adjacency = SparseAdjacency.from_edges(n_nodes, iu[keep], ju[keep])

    means = rng.normal(size=(n_classes, n_features))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    features = means[labels] + feature_noise * rng.normal(size=(n_nodes, n_features)) / np.sqrt(n_features)

    train, val, test = [], [], []
    for c in range(n_classes):
        members = rng.permutation(np.flatnonzero(labels == c))
        n_test = int(round(test_fraction * len(members)))
        test.extend(members[:n_test])
        val.extend(members[n_test:n_test + n_val_per_class])
        train.extend(members[n_test + n_val_per_class:
                             n_test + n_val_per_class + n_train_per_class])
    out_labels = labels.copy()
    if labeled_fraction < 1.0:
        known = np.zeros(n_nodes, dtype=bool)
        known[np.concatenate([train, val, test]).astype(np.int64)] = True
        hide = (~known) & (rng.random(n_nodes) >= labeled_fraction)
        out_labels[hide] = -1
    return LabeledGraph(adjacency, features, out_labels, np.sort(train), np.sort(val),
                        np.sort(test))
