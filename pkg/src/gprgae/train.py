"""Self-supervised purifier training on randomly perturbed graphs."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Tensor
from .graph import SparseAdjacency
from .metrics import ap, auc
from .model import Bound, EdgeScores, GprGaeParams, init_params, predict_scores, score_pairs
from .optim import AdamState, adam_step
from .perturb import PerturbationBudget, make_validation_sets, sample_perturbed

logger = logging.getLogger(__name__)

CLAMP = 1e-7


@dataclass
class TrainConfig:
    epochs: int = 2000
    lr: float = 0.01
    weight_decay: float = 1e-4
    delta: float = 0.2
    budget: PerturbationBudget = field(default_factory=PerturbationBudget)
    k: int = 7
    z1: int = 128
    z2: int = 512
    dropout: float = 0.7
    self_loops: bool = False
    reweight: bool = True
    n_val_sets: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")


@dataclass
class TrainResult:
    params: GprGaeParams
    history: list[dict]
    best_epoch: int
    best_metric: float
    aborted: bool = False

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.history:
                fh.write(json.dumps(row) + "\n")


def restoration_loss(scores: EdgeScores, labels) -> float:
    """Binary cross-entropy: clean pairs (label 1) toward 1, injected toward 0."""
    labels = np.asarray(labels).astype(bool)
    s = np.clip(scores.symmetric, CLAMP, 1 - CLAMP)
    loss = 0.0
    if labels.any():
        loss -= np.mean(np.log(s[labels]))
    if (~labels).any():
        loss -= np.mean(np.log(1 - s[~labels]))
    else:
        logger.warning("no injected edges; negative restoration term omitted")
    return float(loss)


def symmetry_loss(scores: EdgeScores) -> float:
    if len(scores) == 0:
        logger.warning("empty candidate set; symmetry loss is 0")
        return 0.0
    return float(np.mean((scores.forward - scores.backward) ** 2))


def total_loss(restore: float, sym: float, delta: float = 0.2) -> float:
    return restore + delta * sym


def loss_terms(tape: Tape, fwd: Tensor, bwd: Tensor, labels) -> tuple[Tensor, Tensor]:
    """Tape versions of the restoration and symmetry losses."""
    labels = np.asarray(labels).astype(bool)
    avg = tape.scale(tape.add(fwd, bwd), 0.5)
    pos = np.flatnonzero(labels)
    neg = np.flatnonzero(~labels)
    restore = None
    if len(pos):
        restore = tape.scale(tape.mean(tape.log_clamped(tape.gather_rows(avg, pos), CLAMP, 1 - CLAMP)), -1.0)
    if len(neg):
        ones = tape.tensor(np.ones((len(neg), 1)))
        comp = tape.sub(ones, tape.gather_rows(avg, neg))
        term = tape.scale(tape.mean(tape.log_clamped(comp, CLAMP, 1 - CLAMP)), -1.0)
        restore = term if restore is None else tape.add(restore, term)
    sym = tape.mean(tape.square(tape.sub(fwd, bwd)))
    return restore, sym


def training_loss(tape: Tape, params: GprGaeParams, adjacency: SparseAdjacency, x, pairs,
                  labels, delta: float, training: bool = True, rng=None, dropout: float = 0.7,
                  self_loops: bool = False, requires_grad: bool = True):
    """Build the full loss on ``tape``; returns ``(bound, total, restore, sym)``."""
    bound = Bound(tape, params, requires_grad=requires_grad)
    fwd, bwd = score_pairs(tape, bound, adjacency, x, pairs, training, rng, dropout, self_loops)
    restore, sym = loss_terms(tape, fwd, bwd, labels)
    total = tape.add(restore, tape.scale(sym, delta)) if delta else restore
    return bound, total, restore, sym


def validate(params: GprGaeParams, x, val_sets, self_loops: bool = False) -> tuple[float, float]:
    aucs, aps = [], []
    for rec in val_sets:
        pairs, labels = rec.candidates()
        s = predict_scores(params, rec.perturbed, x, pairs, self_loops=self_loops).symmetric
        aucs.append(auc(s, labels))
        aps.append(ap(s, labels))
    return float(np.mean(aucs)), float(np.mean(aps))


def train_purifier(adjacency: SparseAdjacency, x, cfg: TrainConfig | None = None,
                   params: GprGaeParams | None = None, callback=None) -> TrainResult:
    """Train on ``(adjacency, x)``, which must already exclude held-out nodes.

    Each epoch samples a fresh perturbed graph, takes one Adam step on the
    restoration + symmetry loss and scores the fixed validation sets.  The
    parameters with the best ``(mean AUC + mean AP) / 2`` are returned.
    """
    cfg = cfg or TrainConfig()
    x = np.asarray(x, dtype=np.float64)
    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    init_rng, sample_rng, drop_rng, val_rng = (np.random.default_rng(s) for s in seeds)
    if params is None:
        params = init_params(x.shape[1], cfg.k, cfg.z1, cfg.z2, rng=init_rng)
    else:
        params = params.copy()
    val_sets = make_validation_sets(adjacency, cfg.n_val_sets, val_rng)
    state = AdamState()
    masks = params.trainable_masks()
    best, best_metric, best_epoch = params.copy(), -math.inf, 0
    history = []
    aborted = False
    for epoch in range(1, cfg.epochs + 1):
        rec = sample_perturbed(adjacency, cfg.budget, sample_rng, reweight=cfg.reweight)
        pairs, labels = rec.candidates()
        tape = Tape()
        try:
            bound, total, restore, sym = training_loss(
                tape, params, rec.perturbed, x, pairs, labels, cfg.delta, training=True,
                rng=drop_rng, dropout=cfg.dropout, self_loops=cfg.self_loops)
            tape.backward(total)
        except FloatingPointError:
            logger.error("non-finite loss at epoch %d; keeping last good checkpoint", epoch)
            aborted = True
            break
        grads = {name: t.grad for name, t in bound.tensors.items()}
        adam_step(params.arrays(), grads, state, lr=cfg.lr, weight_decay=cfg.weight_decay,
                  masks=masks)
        val_auc, val_ap = validate(params, x, val_sets, cfg.self_loops)
        row = {"epoch": epoch, "loss": total.item(), "restore": restore.item(),
               "sym": sym.item(), "val_auc": val_auc, "val_ap": val_ap}
        history.append(row)
        metric = (val_auc + val_ap) / 2
        if metric > best_metric:
            best, best_metric, best_epoch = params.copy(), metric, epoch
        if callback is not None:
            callback(row)
    return TrainResult(best, history, best_epoch, best_metric, aborted)
