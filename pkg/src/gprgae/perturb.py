"""Random training perturbations: edge injection, masking and reweighting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import SparseAdjacency


@dataclass(frozen=True)
class PerturbationBudget:
    p: float = 1.5
    q: float = 0.2
    eta: float = 3.0
    beta: float = 1.0

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("injection ratio p must be >= 0")
        if not 0 <= self.q < 1:
            raise ValueError("mask ratio q must be in [0, 1)")
        if self.eta < 1:
            raise ValueError("reweight scale eta must be >= 1")
        if self.beta <= 0:
            raise ValueError("base weight beta must be > 0")


@dataclass
class PerturbationRecord:
    """A sampled perturbed graph plus the edge sets the losses need.

    Edge sets are ``(m, 2)`` arrays of undirected pairs with ``i < j``.
    """

    perturbed: SparseAdjacency
    originals: np.ndarray
    injected: np.ndarray
    e_clean: np.ndarray
    e_inject: np.ndarray
    e_mask: np.ndarray

    @property
    def e_all(self) -> np.ndarray:
        return np.concatenate([self.e_clean, self.e_inject])

    def candidates(self) -> tuple[np.ndarray, np.ndarray]:
        """Candidate pairs ``E ∪ E_inject`` and their 0/1 labels (clean = 1)."""
        labels = np.concatenate([np.ones(len(self.e_clean)), np.zeros(len(self.e_inject))])
        return self.e_all, labels


def _count(ratio: float, size: int) -> int:
    # tolerance absorbs products like 0.3 * 3 * 10 = 8.999...
    return int(np.floor(ratio * size + 1e-9))


def sample_non_edges(adjacency: SparseAdjacency, count: int, rng: np.random.Generator,
                     exclude=None) -> np.ndarray:
    """Uniformly sample ``count`` distinct non-adjacent pairs by rejection."""
    n = adjacency.n
    total = n * (n - 1) // 2
    taken = set()
    i, j, _ = adjacency.edges()
    existing = set((i * n + j).tolist())
    if exclude is not None and len(exclude):
        existing |= set((exclude[:, 0] * n + exclude[:, 1]).tolist())
    if count > total - len(existing):
        raise ValueError(
            f"cannot inject {count} edges: only {total - len(existing)} non-edges available")
    out = []
    while len(out) < count:
        need = count - len(out)
        a = rng.integers(0, n, size=2 * need + 8)
        b = rng.integers(0, n, size=2 * need + 8)
        for x, y in zip(a.tolist(), b.tolist()):
            if x == y:
                continue
            if x > y:
                x, y = y, x
            key = x * n + y
            if key in existing or key in taken:
                continue
            taken.add(key)
            out.append((x, y))
            if len(out) == count:
                break
    return np.asarray(out, dtype=np.int64).reshape(-1, 2)


def sample_perturbed(adjacency: SparseAdjacency, budget: PerturbationBudget,
                     rng: np.random.Generator, reweight: bool = True) -> PerturbationRecord:
    """Draw one graph from the injection → masking → reweighting sample space."""
    n = adjacency.n
    if n < 2:
        raise ValueError("need at least two nodes")
    i, j, _ = adjacency.edges()
    clean = np.stack([i, j], axis=1)
    n_edges = len(clean)

    injected = sample_non_edges(adjacency, _count(budget.p, n_edges), rng)

    n_mask_orig = _count(budget.q, n_edges)
    n_mask_inj = _count(budget.q, len(injected))
    mask_orig = rng.choice(n_edges, size=n_mask_orig, replace=False)
    mask_inj = rng.choice(len(injected), size=n_mask_inj, replace=False)
    keep_orig = np.ones(n_edges, dtype=bool)
    keep_orig[mask_orig] = False
    keep_inj = np.ones(len(injected), dtype=bool)
    keep_inj[mask_inj] = False

    survivors = np.concatenate([clean[keep_orig], injected[keep_inj]])
    if reweight:
        weights = rng.uniform(budget.beta, budget.beta * budget.eta, size=len(survivors))
    else:
        weights = np.full(len(survivors), budget.beta)
    perturbed = SparseAdjacency.from_edges(n, survivors[:, 0], survivors[:, 1], weights)
    masked = np.concatenate([clean[~keep_orig], injected[~keep_inj]])
    return PerturbationRecord(perturbed=perturbed, originals=clean[keep_orig],
                              injected=injected[keep_inj], e_clean=clean,
                              e_inject=injected, e_mask=masked.reshape(-1, 2))


def make_validation_sets(adjacency: SparseAdjacency, count: int = 10,
                         rng: np.random.Generator | None = None,
                         step: float = 0.3) -> list[PerturbationRecord]:
    """Fixed injection-only sets; the ``i``-th (1-based) uses ratio ``step * i``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    return [sample_perturbed(adjacency, PerturbationBudget(p=step * k, q=0.0, eta=1.0), rng)
            for k in range(1, count + 1)]
