"""GPR-GAE purifier: multi-filter GPR node encoder, order-variant edge encoder
and a sigmoid decoder averaged over both edge directions."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .autodiff import Tape, Tensor
from .graph import SparseAdjacency, normalize

CHECKPOINT_FORMAT = "gprgae-params"
CHECKPOINT_VERSION = 1


@dataclass
class GprGaeParams:
    """Learnable purifier weights.

    ``gamma`` is a lower-triangular ``(K+1, K+1)`` table whose row ``k`` holds
    the coefficients of filter ``k``; ``gamma[0, 0]`` is pinned to 1.
    """

    w_n: np.ndarray
    gamma: np.ndarray
    w_e: np.ndarray
    w_d: np.ndarray

    @property
    def k_max(self) -> int:
        return self.gamma.shape[0] - 1

    @property
    def z1(self) -> int:
        return self.w_n.shape[1]

    @property
    def z2(self) -> int:
        return self.w_e.shape[1]

    @property
    def n_features(self) -> int:
        return self.w_n.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"w_n": self.w_n, "gamma": self.gamma, "w_e": self.w_e, "w_d": self.w_d}

    def trainable_masks(self) -> dict[str, np.ndarray]:
        """1 where a coordinate may be updated by the optimizer."""
        k1 = self.k_max + 1
        gmask = np.tril(np.ones((k1, k1)))
        gmask[0, 0] = 0.0
        return {"gamma": gmask}

    def copy(self) -> "GprGaeParams":
        return GprGaeParams(**{k: v.copy() for k, v in self.arrays().items()})

    def validate(self) -> None:
        k1 = self.k_max + 1
        if self.gamma.shape != (k1, k1):
            raise ValueError("gamma must be square")
        if self.gamma[0, 0] != 1.0 or np.any(np.triu(self.gamma, 1) != 0):
            raise ValueError("gamma must be lower triangular with gamma[0,0] == 1")
        if self.w_e.shape[0] != 2 * k1 * self.z1:
            raise ValueError("w_e rows must equal 2 * (K+1) * Z1")
        if self.w_d.shape != (self.z2, 1):
            raise ValueError("w_d must be (Z2, 1)")
        for name, arr in self.arrays().items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")

    def to_dict(self) -> dict:
        k1 = self.k_max + 1
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "dims": {"n_features": self.n_features, "k": self.k_max, "z1": self.z1, "z2": self.z2},
            "gamma": [self.gamma[k, :k + 1].tolist() for k in range(k1)],
            "w_n": self.w_n.tolist(),
            "w_e": self.w_e.tolist(),
            "w_d": self.w_d.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GprGaeParams":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a GPR-GAE checkpoint")
        if d.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('version')}")
        dims = d["dims"]
        k1 = dims["k"] + 1
        gamma = np.zeros((k1, k1))
        for k, row in enumerate(d["gamma"]):
            gamma[k, :k + 1] = row
        params = cls(w_n=np.asarray(d["w_n"], dtype=np.float64).reshape(dims["n_features"], dims["z1"]),
                     gamma=gamma,
                     w_e=np.asarray(d["w_e"], dtype=np.float64).reshape(2 * k1 * dims["z1"], dims["z2"]),
                     w_d=np.asarray(d["w_d"], dtype=np.float64).reshape(dims["z2"], 1))
        params.validate()
        return params

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "GprGaeParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(n_features: int, k: int = 7, z1: int = 128, z2: int = 512,
                rng: np.random.Generator | None = None) -> GprGaeParams:
    rng = rng if rng is not None else np.random.default_rng(0)
    gamma = np.zeros((k + 1, k + 1))
    for row in range(k + 1):
        bound = 1.0 / np.sqrt(row + 1)
        gamma[row, :row + 1] = rng.uniform(-bound, bound, size=row + 1)
    gamma[0, 0] = 1.0
    return GprGaeParams(w_n=_glorot(rng, n_features, z1), gamma=gamma,
                        w_e=_glorot(rng, 2 * (k + 1) * z1, z2), w_d=_glorot(rng, z2, 1))


class Bound:
    """Parameters placed on a tape as tensors."""

    def __init__(self, tape: Tape, params: GprGaeParams, requires_grad: bool = False):
        self.params = params
        self.tensors = {name: tape.tensor(arr, requires_grad=requires_grad)
                        for name, arr in params.arrays().items()}

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]


def propagation_operator(adjacency: SparseAdjacency, self_loops: bool = False) -> sp.csr_matrix:
    return normalize(adjacency, with_self_loops=self_loops)


def encode_nodes(tape: Tape, bound: Bound, a_norm, x: Tensor, training: bool = False,
                 rng: np.random.Generator | None = None, dropout: float = 0.7) -> Tensor:
    """Concatenated outputs of the K+1 GPR filters, ``N x (K+1)*Z1``."""
    params = bound.params
    if x.shape[1] != params.n_features:
        raise ValueError(f"feature dim {x.shape[1]} != model input dim {params.n_features}")
    if a_norm.shape[0] != x.shape[0]:
        raise ValueError("adjacency and feature rows differ")
    h0 = tape.dropout(tape.matmul(x, bound["w_n"]), dropout, rng, training)
    hops = [h0]
    for _ in range(params.k_max):
        hops.append(tape.spmm(a_norm, hops[-1]))
    gamma = bound["gamma"]
    blocks = [h0]
    for k in range(1, params.k_max + 1):
        acc = None
        for m in range(k + 1):
            acc = tape.scale_add(acc, tape.entry(gamma, k, m), hops[m])
        blocks.append(acc)
    return tape.concat_cols(blocks)


def node_projections(tape: Tape, bound: Bound, h: Tensor) -> tuple[Tensor, Tensor]:
    """Split the first edge layer into per-node halves.

    ELU acts element-wise, so ``elu(H_i || H_j) W_e`` equals
    ``elu(H)_i W_top + elu(H)_j W_bottom``; both products are computed once per
    node and gathered per pair.
    """
    eh = tape.elu(h)
    width = h.shape[1]
    w_e = bound["w_e"]
    return (tape.matmul(eh, tape.slice_rows(w_e, 0, width)),
            tape.matmul(eh, tape.slice_rows(w_e, width, 2 * width)))


def decode(tape: Tape, bound: Bound, left: Tensor, right: Tensor, src, dst) -> Tensor:
    """Directed scores ``sigmoid(elu(E_src,dst) W_d)`` as a column."""
    e = tape.add(tape.gather_rows(left, src), tape.gather_rows(right, dst))
    return tape.sigmoid(tape.matmul(tape.elu(e), bound["w_d"]))


def directed_scores(tape: Tape, bound: Bound, h: Tensor, src, dst) -> Tensor:
    left, right = node_projections(tape, bound, h)
    return decode(tape, bound, left, right, src, dst)


def encode_edge(h: np.ndarray, i: int, j: int, params: GprGaeParams) -> np.ndarray:
    """Edge embedding ``elu(H_i || H_j) W_e``; order matters."""
    if i == j:
        raise ValueError("self-loops are never scored")
    if not (0 <= i < h.shape[0] and 0 <= j < h.shape[0]):
        raise IndexError("node index out of range")
    cat = np.concatenate([h[i], h[j]])
    return np.where(cat < 0, np.expm1(np.minimum(cat, 0)), cat) @ params.w_e


@dataclass
class EdgeScores:
    pairs: np.ndarray
    forward: np.ndarray
    backward: np.ndarray

    @property
    def symmetric(self) -> np.ndarray:
        return (self.forward + self.backward) / 2.0

    def __len__(self) -> int:
        return len(self.pairs)


def _check_pairs(pairs, n):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs):
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise ValueError("candidate pairs must not contain self-loops")
        if pairs.min() < 0 or pairs.max() >= n:
            raise IndexError("candidate node index out of range")
    return pairs


def predict_scores(params: GprGaeParams, adjacency: SparseAdjacency, x, pairs,
                   self_loops: bool = False, chunk: int = 16384) -> EdgeScores:
    """Evaluation-mode link scores for undirected ``pairs`` over ``adjacency``."""
    pairs = _check_pairs(pairs, adjacency.n)
    if len(pairs) == 0:
        return EdgeScores(pairs, np.zeros(0), np.zeros(0))
    tape = Tape(record=False)
    bound = Bound(tape, params)
    a_norm = propagation_operator(adjacency, self_loops)
    h = encode_nodes(tape, bound, a_norm, tape.tensor(x), training=False)
    left, right = node_projections(tape, bound, h)
    fwd = np.empty(len(pairs))
    bwd = np.empty(len(pairs))
    for start in range(0, len(pairs), chunk):
        block = pairs[start:start + chunk]
        src = np.concatenate([block[:, 0], block[:, 1]])
        dst = np.concatenate([block[:, 1], block[:, 0]])
        s = decode(tape, bound, left, right, src, dst).value[:, 0]
        fwd[start:start + len(block)] = s[:len(block)]
        bwd[start:start + len(block)] = s[len(block):]
    return EdgeScores(pairs, fwd, bwd)


def score_pairs(tape: Tape, bound: Bound, adjacency: SparseAdjacency, x, pairs,
                training: bool, rng=None, dropout: float = 0.7,
                self_loops: bool = False) -> tuple[Tensor, Tensor]:
    """Differentiable directed scores ``(i -> j, j -> i)`` for each undirected pair."""
    pairs = _check_pairs(pairs, adjacency.n)
    a_norm = propagation_operator(adjacency, self_loops)
    h = encode_nodes(tape, bound, a_norm, tape.tensor(x), training=training, rng=rng,
                     dropout=dropout)
    m = len(pairs)
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    s = directed_scores(tape, bound, h, src, dst)
    fwd = tape.gather_rows(s, np.arange(m))
    bwd = tape.gather_rows(s, np.arange(m, 2 * m))
    return fwd, bwd
