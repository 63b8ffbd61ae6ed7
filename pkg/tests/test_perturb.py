import numpy as np
import pytest
from scipy.stats import chisquare

from gprgae.graph import SparseAdjacency
from gprgae.perturb import (PerturbationBudget, make_validation_sets, sample_non_edges,
                            sample_perturbed)

from helpers import random_graph


def pair_set(arr):
    return {tuple(r) for r in np.asarray(arr).tolist()}


def test_counts_on_forty_edge_graph(rng):
    a = random_graph(40, 0.3, seed=1)
    a = SparseAdjacency.from_edges(40, *[c[:40] for c in a.edges()[:2]])
    assert a.num_edges == 40
    rec = sample_perturbed(a, PerturbationBudget(1.5, 0.2, 3.0), rng)
    assert len(rec.e_inject) == 60
    assert len(rec.originals) == 32
    assert len(rec.injected) == 48
    assert rec.perturbed.num_edges == 80
    assert len(rec.e_mask) == 20


def test_masking_removes_only_originals_and_injected(rng):
    a = random_graph(30, 0.2, seed=2)
    rec = sample_perturbed(a, PerturbationBudget(1.0, 0.3, 2.0), rng)
    clean, inj = pair_set(rec.e_clean), pair_set(rec.e_inject)
    assert not clean & inj
    assert pair_set(rec.originals) | pair_set(rec.e_mask) >= clean
    i, j, _ = rec.perturbed.edges()
    assert pair_set(np.stack([i, j], 1)) == pair_set(rec.originals) | pair_set(rec.injected)


def test_weights_in_range(rng):
    a = random_graph(25, 0.3, seed=3)
    rec = sample_perturbed(a, PerturbationBudget(1.5, 0.2, 3.0, beta=1.0), rng)
    w = rec.perturbed.weights
    assert w.min() >= 1.0 and w.max() <= 3.0
    np.testing.assert_array_equal(rec.perturbed.to_dense(), rec.perturbed.to_dense().T)
    flat = sample_perturbed(a, PerturbationBudget(1.5, 0.2, 3.0), rng, reweight=False)
    assert np.all(flat.perturbed.weights == 1.0)


def test_zero_budget_reproduces_graph(rng):
    a = random_graph(15, 0.3, seed=4)
    rec = sample_perturbed(a, PerturbationBudget(0.0, 0.0, 1.0), rng)
    assert rec.perturbed == a
    assert len(rec.e_inject) == 0


def test_infeasible_injection_raises(rng):
    full = SparseAdjacency(np.ones((4, 4)) - np.eye(4))
    with pytest.raises(ValueError, match="non-edges"):
        sample_perturbed(full, PerturbationBudget(0.5, 0.0, 1.0), rng)


def test_determinism():
    a = random_graph(30, 0.2, seed=5)
    r1 = sample_perturbed(a, PerturbationBudget(), np.random.default_rng(7))
    r2 = sample_perturbed(a, PerturbationBudget(), np.random.default_rng(7))
    assert r1.perturbed == r2.perturbed
    np.testing.assert_array_equal(r1.e_inject, r2.e_inject)


def test_non_edge_sampling_is_uniform():
    # 6 nodes, path 0-1-2-3-4-5 leaves 10 non-edges; draw one many times
    a = SparseAdjacency.from_edges(6, [0, 1, 2, 3, 4], [1, 2, 3, 4, 5])
    rng = np.random.default_rng(0)
    counts = {}
    for _ in range(5000):
        (x, y), = sample_non_edges(a, 1, rng).tolist()
        counts[(x, y)] = counts.get((x, y), 0) + 1
    assert len(counts) == 10
    assert chisquare(list(counts.values())).pvalue > 1e-3


def test_validation_sets_use_increasing_ratios():
    a = random_graph(40, 0.2, seed=6)
    m = a.num_edges
    sets = make_validation_sets(a, 10, np.random.default_rng(0))
    assert [len(s.e_inject) for s in sets] == [int(np.floor(0.3 * k * m + 1e-9))
                                              for k in range(1, 11)]
    for s in sets:
        assert len(s.e_mask) == 0
        assert np.all(s.perturbed.weights == 1.0)


def test_three_tenths_times_three_rounds_correctly():
    a = SparseAdjacency.from_edges(20, np.arange(10), np.arange(10) + 10)
    sets = make_validation_sets(a, 3, np.random.default_rng(0))
    assert len(sets[2].e_inject) == 9


def test_budget_validation():
    with pytest.raises(ValueError):
        PerturbationBudget(q=1.0)
    with pytest.raises(ValueError):
        PerturbationBudget(eta=0.5)
