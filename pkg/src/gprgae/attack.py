"""Evasion attacks used to build transfer-attack test graphs.

``prbcd_lite`` is a reduced randomized-block gradient attack: it scores
sampled candidate flips by the gradient of the victim's tanh-margin loss on
the targeted nodes, commits flips progressively over rounds, and finally
flips the top-``Δ`` pairs.  ``random_flip_attack`` is the uniform baseline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .autodiff import Tape
from .classifier import GcnParams, gcn_forward, tanh_margin_loss
from .graph import SparseAdjacency

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 0.25
    block_size: int = 10_000
    rounds: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


def budget(adjacency: SparseAdjacency, targets, epsilon: float) -> int:
    """``floor(epsilon * sum of unweighted target degrees / 2)``."""
    deg = adjacency.degrees(weighted=False)
    total = float(deg[np.asarray(targets, dtype=np.int64)].sum())
    return int(np.floor(epsilon * total / 2 + 1e-9))


def apply_flips(adjacency: SparseAdjacency, flips: np.ndarray) -> SparseAdjacency:
    """Toggle each undirected pair in ``flips``; inserted edges get weight 1."""
    dense = adjacency.to_scipy().tolil()
    for i, j in np.asarray(flips, dtype=np.int64).reshape(-1, 2):
        if dense[i, j] != 0:
            dense[i, j] = 0
            dense[j, i] = 0
        else:
            dense[i, j] = 1.0
            dense[j, i] = 1.0
    return SparseAdjacency(dense.tocsr())


def _candidate_pool(n: int, targets: np.ndarray) -> np.ndarray:
    """All pairs ``i < j`` with at least one targeted endpoint, as keys ``i * n + j``."""
    t = np.unique(targets)
    others = np.arange(n)
    a = np.repeat(t, n)
    b = np.tile(others, len(t))
    keep = a != b
    lo, hi = np.minimum(a[keep], b[keep]), np.maximum(a[keep], b[keep])
    return np.unique(lo * n + hi)


def adjacency_gradient(params: GcnParams, dense_adj: np.ndarray, x, labels, targets) -> np.ndarray:
    """Gradient of the tanh-margin attack objective w.r.t. every dense adjacency entry.

    The attacker maximizes the tanh-margin loss, so a positive entry means
    increasing that weight hurts the victim.
    """
    tape = Tape()
    a = tape.tensor(dense_adj, requires_grad=True)
    a_norm = tape.gcn_normalize_dense(a)
    z = gcn_forward(tape, tape.tensor(params.w1), tape.tensor(params.w2), a_norm, tape.tensor(x))
    loss = tanh_margin_loss(tape, z, labels, targets)
    tape.backward(loss)
    return a.grad


def prbcd_lite(params: GcnParams, adjacency: SparseAdjacency, x, labels, targets,
               cfg: AttackConfig) -> tuple[SparseAdjacency, dict]:
    """Gradient-guided flips of exactly ``Δ`` pairs touching ``targets``.

    Each round samples ``block_size`` candidate pairs from the pool of pairs
    with a targeted endpoint, evaluates the adjacency gradient at the graph
    with the currently committed flips applied, and folds the flip-direction
    gradient into a running per-pair mean.  Round ``r`` commits the best
    ``Δ * r / rounds`` pairs seen so far.
    """
    targets = np.asarray(targets, dtype=np.int64)
    delta = budget(adjacency, targets, cfg.epsilon)
    report = {"epsilon": cfg.epsilon, "delta": delta}
    if delta == 0:
        return adjacency, {**report, "flips_inserted": 0, "flips_deleted": 0}
    rng = np.random.default_rng(cfg.seed)
    n = adjacency.n
    clean = adjacency.to_dense()
    clean_bin = (clean > 0).astype(np.float64)
    pool = _candidate_pool(n, targets)
    if delta > len(pool):
        logger.warning("budget %d exceeds %d candidate pairs; flipping all", delta, len(pool))
        delta = len(pool)
    score_sum = np.zeros(len(pool))
    seen = np.zeros(len(pool))
    committed = np.zeros(0, dtype=np.int64)
    for r in range(1, cfg.rounds + 1):
        block = rng.choice(len(pool), size=min(cfg.block_size, len(pool)), replace=False)
        current = clean_bin.copy()
        if len(committed):
            ci, cj = np.divmod(pool[committed], n)
            current[ci, cj] = 1 - current[ci, cj]
            current[cj, ci] = current[ci, cj]
        grad = adjacency_gradient(params, current, x, labels, targets)
        bi, bj = np.divmod(pool[block], n)
        # flipping moves the entry by +1 (insert) or -1 (delete) in both directions
        direction = 1.0 - 2.0 * clean_bin[bi, bj]
        gain = (grad[bi, bj] + grad[bj, bi]) * direction
        score_sum[block] += gain
        seen[block] += 1
        mean = np.where(seen > 0, score_sum / np.maximum(seen, 1), -np.inf)
        k = int(np.floor(delta * r / cfg.rounds))
        committed = _top(mean, k)
    mean = np.where(seen > 0, score_sum / np.maximum(seen, 1), -np.inf)
    chosen = _top(mean, delta)
    if np.isinf(mean[chosen]).any():
        # pairs never sampled fill the remaining budget in random order
        unseen = np.flatnonzero(seen == 0)
        picked = chosen[~np.isinf(mean[chosen])]
        fill = rng.choice(unseen, size=delta - len(picked), replace=False)
        chosen = np.concatenate([picked, fill])
    fi, fj = np.divmod(pool[chosen], n)
    inserted = int(np.sum(clean_bin[fi, fj] == 0))
    attacked = apply_flips(adjacency, np.stack([fi, fj], axis=1))
    return attacked, {**report, "flips_inserted": inserted, "flips_deleted": delta - inserted}


def _top(values: np.ndarray, k: int) -> np.ndarray:
    if k <= 0:
        return np.zeros(0, dtype=np.int64)
    # stable order: higher value first, lower index on ties
    order = np.lexsort((np.arange(len(values)), -values))
    return order[:k]


def random_flip_attack(adjacency: SparseAdjacency, targets, cfg: AttackConfig,
                       restrict_to_targets: bool = False) -> tuple[SparseAdjacency, dict]:
    """Flip ``Δ`` pairs drawn uniformly without replacement.

    Pairs are drawn from all ``i < j`` unless ``restrict_to_targets``, in which
    case only pairs with a targeted endpoint are eligible.
    """
    targets = np.asarray(targets, dtype=np.int64)
    delta = budget(adjacency, targets, cfg.epsilon)
    report = {"epsilon": cfg.epsilon, "delta": delta}
    if delta == 0:
        return adjacency, {**report, "flips_inserted": 0, "flips_deleted": 0}
    rng = np.random.default_rng(cfg.seed)
    n = adjacency.n
    if restrict_to_targets:
        keys = rng.choice(_candidate_pool(n, targets), size=delta, replace=False)
    else:
        total = n * (n - 1) // 2
        if delta > total:
            raise ValueError("budget exceeds the number of node pairs")
        flat = rng.choice(total, size=delta, replace=False)
        iu, ju = np.triu_indices(n, k=1)
        keys = iu[flat] * n + ju[flat]
    fi, fj = np.divmod(keys, n)
    existing = adjacency.to_scipy()
    inserted = int(sum(existing[a, b] == 0 for a, b in zip(fi, fj)))
    attacked = apply_flips(adjacency, np.stack([fi, fj], axis=1))
    return attacked, {**report, "flips_inserted": inserted, "flips_deleted": delta - inserted}
