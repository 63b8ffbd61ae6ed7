"""Input coercion shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.utils.validation import check_array

from .graph import GraphFormatError, SparseAdjacency


def check_features(X, n_nodes: int | None = None, n_features: int | None = None) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if n_nodes is not None and X.shape[0] != n_nodes:
        raise ValueError(f"X has {X.shape[0]} rows but the graph has {n_nodes} nodes")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, expected {n_features}")
    return X


def check_adjacency(adjacency, n_nodes: int | None = None) -> SparseAdjacency:
    """Accept a SparseAdjacency, a scipy sparse matrix or a dense array."""
    if isinstance(adjacency, SparseAdjacency):
        a = adjacency
    elif sp.issparse(adjacency):
        a = SparseAdjacency(adjacency)
    else:
        arr = np.asarray(adjacency, dtype=np.float64)
        if arr.ndim != 2:
            raise GraphFormatError("adjacency must be 2-d")
        a = SparseAdjacency(sp.csr_matrix(arr))
    if n_nodes is not None and a.n != n_nodes:
        raise ValueError(f"adjacency has {a.n} nodes, expected {n_nodes}")
    return a


def check_index(idx, n_nodes: int, name: str = "index") -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64).ravel()
    if len(idx) and (idx.min() < 0 or idx.max() >= n_nodes):
        raise ValueError(f"{name} out of range for {n_nodes} nodes")
    return idx
