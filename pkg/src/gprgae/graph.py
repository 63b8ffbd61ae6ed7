"""Graph containers, symmetric normalization and file ingestion."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised when graph input violates the file formats or type invariants."""


class SparseAdjacency:
    """Symmetric, self-loop-free, positively weighted adjacency in CSR form.

    Each undirected edge is stored in both directions.  Instances are treated
    as immutable; use the constructors to derive new graphs.
    """

    __slots__ = ("_csr",)

    def __init__(self, matrix, check: bool = True):
        csr = sp.csr_matrix(matrix, dtype=np.float64)
        csr.eliminate_zeros()
        csr.sum_duplicates()
        csr.sort_indices()
        if check:
            _check_adjacency(csr)
        csr.data.setflags(write=False)
        self._csr = csr

    @classmethod
    def from_edges(cls, n: int, src, dst, weights=None) -> "SparseAdjacency":
        """Build from undirected pairs; each pair is mirrored.  Pairs must be unique."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        w = np.ones(len(src)) if weights is None else np.asarray(weights, dtype=np.float64)
        if len(src) and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= n):
            raise GraphFormatError("node index out of range")
        if np.any(src == dst):
            raise GraphFormatError("self-loops are not allowed")
        rows = np.concatenate([src, dst])
        cols = np.concatenate([dst, src])
        m = sp.coo_matrix((np.concatenate([w, w]), (rows, cols)), shape=(n, n))
        return cls(m)

    @classmethod
    def empty(cls, n: int) -> "SparseAdjacency":
        return cls(sp.csr_matrix((n, n)))

    @property
    def n(self) -> int:
        return self._csr.shape[0]

    @property
    def indptr(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def weights(self) -> np.ndarray:
        return self._csr.data

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return self._csr.nnz // 2

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr.copy()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Upper-triangle pairs ``(i, j, w)`` with ``i < j``, in row-major order."""
        coo = sp.triu(self._csr, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order].astype(np.int64), coo.col[order].astype(np.int64), coo.data[order]

    def degrees(self, weighted: bool = True) -> np.ndarray:
        if weighted:
            return np.asarray(self._csr.sum(axis=1)).ravel()
        return np.diff(self._csr.indptr).astype(np.float64)

    def with_weights(self, weights) -> "SparseAdjacency":
        """Same upper-triangle pairs as ``edges()`` with new weights (zeros drop the edge)."""
        i, j, _ = self.edges()
        w = np.asarray(weights, dtype=np.float64)
        keep = w != 0
        return SparseAdjacency.from_edges(self.n, i[keep], j[keep], w[keep])

    def subgraph(self, nodes) -> "SparseAdjacency":
        nodes = np.asarray(nodes, dtype=np.int64)
        return SparseAdjacency(self._csr[nodes][:, nodes], check=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseAdjacency) or other.n != self.n:
            return NotImplemented if not isinstance(other, SparseAdjacency) else False
        a, b = self._csr, other._csr
        return (a.nnz == b.nnz and np.array_equal(a.indptr, b.indptr)
                and np.array_equal(a.indices, b.indices) and np.array_equal(a.data, b.data))

    __hash__ = None

    def __repr__(self) -> str:
        return f"SparseAdjacency(n={self.n}, edges={self.num_edges})"


def _check_adjacency(csr: sp.csr_matrix) -> None:
    if csr.shape[0] != csr.shape[1]:
        raise GraphFormatError("adjacency must be square")
    if csr.nnz == 0:
        return
    if np.any(csr.diagonal() != 0):
        raise GraphFormatError("self-loops are not allowed")
    if np.any(csr.data < 0) or not np.all(np.isfinite(csr.data)):
        raise GraphFormatError("edge weights must be finite and positive")
    diff = csr - csr.T
    if diff.nnz and np.abs(diff.data).max() > 0:
        raise GraphFormatError("adjacency must be symmetric")


def normalize(a: SparseAdjacency, with_self_loops: bool = False) -> sp.csr_matrix:
    """Symmetric degree normalization ``D^-1/2 A D^-1/2``.

    With ``with_self_loops`` a unit diagonal is added before computing degrees.
    Degrees are weighted row sums; isolated nodes get all-zero rows.
    """
    m = a.to_scipy()
    if with_self_loops:
        m = (m + sp.identity(a.n, format="csr")).tocsr()
    deg = np.asarray(m.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = 1.0 / np.sqrt(deg[nz])
    # row i of CSR is scaled by inv[i], column j by inv[j]
    rows = np.repeat(np.arange(a.n), np.diff(m.indptr))
    m.data = m.data * inv[rows] * inv[m.indices]
    if not np.all(np.isfinite(m.data)):
        raise FloatingPointError("normalization produced non-finite entries")
    return m


@dataclass
class LabeledGraph:
    adjacency: SparseAdjacency
    features: np.ndarray
    labels: np.ndarray
    train: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    val: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    test: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    duplicate_edges: int = 0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.train = np.asarray(self.train, dtype=np.int64)
        self.val = np.asarray(self.val, dtype=np.int64)
        self.test = np.asarray(self.test, dtype=np.int64)
        n = self.adjacency.n
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise GraphFormatError(
                f"feature rows ({self.features.shape[0]}) do not match node count ({n})")
        if not np.all(np.isfinite(self.features)):
            raise GraphFormatError("features must be finite")
        if self.labels.shape != (n,):
            raise GraphFormatError("one label per node is required")
        sets = [set(self.train.tolist()), set(self.val.tolist()), set(self.test.tolist())]
        if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
            raise GraphFormatError("train/val/test masks must be disjoint")
        for s in (self.train, self.val, self.test):
            if len(s) and (s.min() < 0 or s.max() >= n):
                raise GraphFormatError("split index out of range")

    @property
    def n(self) -> int:
        return self.adjacency.n

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    def with_adjacency(self, adjacency: SparseAdjacency) -> "LabeledGraph":
        return LabeledGraph(adjacency, self.features, self.labels,
                            self.train, self.val, self.test)

    def induced(self, nodes) -> "LabeledGraph":
        """Subgraph on ``nodes``; masks are remapped and restricted to kept nodes."""
        nodes = np.sort(np.asarray(nodes, dtype=np.int64))
        remap = -np.ones(self.n, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))

        def keep(mask):
            r = remap[mask]
            return r[r >= 0]

        return LabeledGraph(self.adjacency.subgraph(nodes), self.features[nodes],
                            self.labels[nodes], keep(self.train), keep(self.val),
                            keep(self.test))

    def training_view(self) -> "LabeledGraph":
        """Inductive training graph: drops validation and test nodes with their edges."""
        held = np.zeros(self.n, dtype=bool)
        held[self.val] = True
        held[self.test] = True
        return self.induced(np.flatnonzero(~held))

    def validation_view(self) -> "LabeledGraph":
        """Graph without test nodes, used for classifier early stopping."""
        held = np.zeros(self.n, dtype=bool)
        held[self.test] = True
        return self.induced(np.flatnonzero(~held))


def read_edges(path, n: int | None = None) -> tuple[SparseAdjacency, int]:
    """Parse a TSV edge list.  Returns the adjacency and the number of dropped duplicates."""
    src, dst, wts = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(f"{path}:{lineno}: expected 'src dst [weight]'")
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
            if i == j:
                raise GraphFormatError(f"{path}:{lineno}: self-loop {i}-{j}")
            if i < 0 or j < 0 or (n is not None and max(i, j) >= n):
                raise GraphFormatError(f"{path}:{lineno}: node index out of range")
            if not (w > 0 and np.isfinite(w)):
                raise GraphFormatError(f"{path}:{lineno}: weight must be positive")
            src.append(i)
            dst.append(j)
            wts.append(w)
    if n is None:
        n = max(max(src, default=-1), max(dst, default=-1)) + 1
    src_a, dst_a = np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64)
    lo, hi = np.minimum(src_a, dst_a), np.maximum(src_a, dst_a)
    keys = lo * n + hi
    _, first = np.unique(keys, return_index=True)
    dups = len(keys) - len(first)
    if dups:
        logger.warning("%s: collapsed %d duplicate edges", path, dups)
    adj = SparseAdjacency.from_edges(n, lo[first], hi[first], np.asarray(wts)[first])
    return adj, dups


def write_edges(adjacency: SparseAdjacency, path, weighted: bool = True) -> None:
    i, j, w = adjacency.edges()
    with open(path, "w") as fh:
        for a, b, c in zip(i, j, w):
            if weighted:
                fh.write(f"{a}\t{b}\t{c:.6g}\n")
            else:
                fh.write(f"{a}\t{b}\n")


def load_graph(edge_path, feature_path, label_path, split_path) -> LabeledGraph:
    features = np.loadtxt(feature_path, delimiter=",", ndmin=2)
    labels = np.loadtxt(label_path, dtype=np.int64, ndmin=1)
    n = features.shape[0]
    if labels.shape[0] != n:
        raise GraphFormatError(f"label rows ({labels.shape[0]}) do not match feature rows ({n})")
    adjacency, dups = read_edges(edge_path, n=n)
    split = json.loads(Path(split_path).read_text())
    try:
        parts = {k: np.asarray(split[k], dtype=np.int64) for k in ("train", "val", "test")}
    except KeyError as exc:
        raise GraphFormatError(f"split file missing key {exc}") from None
    for k, idx in parts.items():
        if len(idx) and np.any(labels[idx[idx < n]] < 0):
            raise GraphFormatError(f"unlabeled node in {k} split")
    g = LabeledGraph(adjacency, features, labels, parts["train"], parts["val"], parts["test"])
    g.duplicate_edges = dups
    return g


def save_graph(g: LabeledGraph, directory) -> dict[str, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {"edges": d / "edges.tsv", "features": d / "features.csv",
             "labels": d / "labels.csv", "split": d / "split.json"}
    write_edges(g.adjacency, paths["edges"], weighted=False)
    np.savetxt(paths["features"], g.features, delimiter=",", fmt="%.10g")
    np.savetxt(paths["labels"], g.labels, fmt="%d")
    paths["split"].write_text(json.dumps(
        {"train": g.train.tolist(), "val": g.val.tolist(), "test": g.test.tolist()}))
    return paths
