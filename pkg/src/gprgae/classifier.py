"""Two-layer GCN node classifier with tanh-margin or cross-entropy training."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tape, Tensor
from .graph import SparseAdjacency, normalize
from .optim import AdamState, adam_step

CHECKPOINT_FORMAT = "gcn-params"
CHECKPOINT_VERSION = 1


@dataclass
class GcnParams:
    w1: np.ndarray
    w2: np.ndarray
    dropout: float = 0.5

    @property
    def n_classes(self) -> int:
        return self.w2.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "w2": self.w2}

    def copy(self) -> "GcnParams":
        return GcnParams(self.w1.copy(), self.w2.copy(), self.dropout)

    def to_dict(self) -> dict:
        return {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
                "dims": {"n_features": self.w1.shape[0], "hidden": self.w1.shape[1],
                         "n_classes": self.n_classes},
                "dropout": self.dropout, "w1": self.w1.tolist(), "w2": self.w2.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GcnParams":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a GCN checkpoint")
        if d.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('version')}")
        dims = d["dims"]
        return cls(np.asarray(d["w1"], dtype=np.float64).reshape(dims["n_features"], dims["hidden"]),
                   np.asarray(d["w2"], dtype=np.float64).reshape(dims["hidden"], dims["n_classes"]),
                   float(d["dropout"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "GcnParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ClassifierTrainConfig:
    max_epochs: int = 3000
    lr: float = 0.01
    weight_decay: float = 1e-3
    loss: str = "tanh_margin"
    patience: int = 200
    hidden: int = 64
    dropout: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.patience >= self.max_epochs:
            raise ValueError("patience must be smaller than max_epochs")
        if self.loss not in ("tanh_margin", "cross_entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")


def init_gcn(n_features: int, n_classes: int, hidden: int = 64, dropout: float = 0.5,
             rng: np.random.Generator | None = None) -> GcnParams:
    rng = rng if rng is not None else np.random.default_rng(0)

    def glorot(a, b):
        bound = np.sqrt(6.0 / (a + b))
        return rng.uniform(-bound, bound, size=(a, b))

    return GcnParams(glorot(n_features, hidden), glorot(hidden, n_classes), dropout)


def gcn_forward(tape: Tape, w1: Tensor, w2: Tensor, a_norm, x: Tensor, dropout: float = 0.5,
                training: bool = False, rng=None) -> Tensor:
    """``A (relu(A dropout(X) W1)) W2`` for a pre-normalized operator ``a_norm``.

    ``a_norm`` may be a sparse matrix or a tape tensor (dense attack path).
    """
    if x.shape[1] != w1.shape[0]:
        raise ValueError(f"feature dim {x.shape[1]} != classifier input dim {w1.shape[0]}")

    def prop(h):
        if isinstance(a_norm, Tensor):
            return tape.matmul(a_norm, h)
        return tape.spmm(a_norm, h)

    h = tape.dropout(x, dropout, rng, training)
    h = tape.relu(prop(tape.matmul(h, w1)))
    return prop(tape.matmul(h, w2))


def logits(params: GcnParams, adjacency: SparseAdjacency, x) -> np.ndarray:
    tape = Tape(record=False)
    a = normalize(adjacency, with_self_loops=True)
    return gcn_forward(tape, tape.tensor(params.w1), tape.tensor(params.w2), a,
                       tape.tensor(x)).value


def predict(params: GcnParams, adjacency: SparseAdjacency, x) -> np.ndarray:
    # argmax returns the lowest index among ties
    return np.argmax(logits(params, adjacency, x), axis=1)


def tanh_margin_loss(tape: Tape, z: Tensor, labels, mask) -> Tensor:
    """Mean of ``-tanh(z[y] - max_{c != y} z[c])`` over ``mask``."""
    mask = np.asarray(mask, dtype=np.int64)
    if len(mask) == 0:
        raise ValueError("mask is empty")
    y = np.asarray(labels)[mask]
    if np.any(y < 0):
        raise ValueError("mask contains unlabeled nodes")
    m = tape.margin(tape.gather_rows(z, mask), y)
    return tape.scale(tape.mean(tape.tanh(m)), -1.0)


def cross_entropy_loss(tape: Tape, z: Tensor, labels, mask) -> Tensor:
    mask = np.asarray(mask, dtype=np.int64)
    if len(mask) == 0:
        raise ValueError("mask is empty")
    y = np.asarray(labels)[mask]
    if np.any(y < 0):
        raise ValueError("mask contains unlabeled nodes")
    return tape.cross_entropy(tape.gather_rows(z, mask), y)


LOSSES = {"tanh_margin": tanh_margin_loss, "cross_entropy": cross_entropy_loss}


def accuracy(params: GcnParams, adjacency: SparseAdjacency, x, labels, mask) -> float:
    mask = np.asarray(mask, dtype=np.int64)
    if len(mask) == 0:
        raise ValueError("mask is empty")
    pred = predict(params, adjacency, x)
    return float(np.mean(pred[mask] == np.asarray(labels)[mask]))


def train_classifier(adjacency: SparseAdjacency, x, labels, train_mask,
                     cfg: ClassifierTrainConfig | None = None, val=None) -> tuple[GcnParams, list[dict]]:
    """Fit on ``train_mask`` of the given (training) graph.

    ``val`` is an optional ``(adjacency, x, labels, mask)`` tuple evaluated
    every epoch for early stopping; without it the training graph's accuracy
    on ``train_mask`` is used.  Returns the best checkpoint and the log.
    """
    cfg = cfg or ClassifierTrainConfig()
    train_mask = np.asarray(train_mask, dtype=np.int64)
    labels = np.asarray(labels)
    if len(train_mask) == 0 or np.all(labels[train_mask] < 0):
        raise ValueError("no labeled training nodes")
    x = np.asarray(x, dtype=np.float64)
    init_rng, drop_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2))
    n_classes = int(labels.max()) + 1
    params = init_gcn(x.shape[1], n_classes, cfg.hidden, cfg.dropout, init_rng)
    a_norm = normalize(adjacency, with_self_loops=True)
    if val is None:
        val = (adjacency, x, labels, train_mask)
    loss_fn = LOSSES[cfg.loss]
    state = AdamState()
    best, best_acc, since = params.copy(), -math.inf, 0
    history = []
    for epoch in range(1, cfg.max_epochs + 1):
        tape = Tape()
        w1 = tape.tensor(params.w1, requires_grad=True)
        w2 = tape.tensor(params.w2, requires_grad=True)
        z = gcn_forward(tape, w1, w2, a_norm, tape.tensor(x), cfg.dropout, True, drop_rng)
        loss = loss_fn(tape, z, labels, train_mask)
        tape.backward(loss)
        adam_step(params.arrays(), {"w1": w1.grad, "w2": w2.grad}, state, lr=cfg.lr,
                  weight_decay=cfg.weight_decay)
        val_acc = accuracy(params, *val)
        history.append({"epoch": epoch, "loss": loss.item(), "val_acc": val_acc})
        if val_acc > best_acc:
            best, best_acc, since = params.copy(), val_acc, 0
        else:
            since += 1
            if since >= cfg.patience:
                break
    return best, history
