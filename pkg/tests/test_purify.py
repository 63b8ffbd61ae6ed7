import importlib
import json

import numpy as np
import pytest

from gprgae.graph import SparseAdjacency
from gprgae.model import EdgeScores, init_params
from gprgae.purify import PurifyConfig, estimate_lipschitz, purify, purify_step

from helpers import random_graph

purify_mod = importlib.import_module("gprgae.purify")


def constant_scores(value):
    def fake(params, adjacency, x, pairs, self_loops=False):
        pairs = np.asarray(pairs).reshape(-1, 2)
        s = np.full(len(pairs), value, dtype=float)
        return EdgeScores(pairs, s, s)
    return fake


@pytest.fixture
def setup():
    rng = np.random.default_rng(0)
    a = random_graph(10, 0.4, seed=2)
    x = rng.normal(size=(10, 3))
    params = init_params(3, k=2, z1=4, z2=4, rng=rng)
    return params, a, x


def test_half_step_toward_prediction(monkeypatch, setup):
    params, _, x = setup
    monkeypatch.setattr(purify_mod, "predict_scores", constant_scores(0.2))
    a = SparseAdjacency.from_edges(10, [0], [1])
    new, ratio = purify_step(params, a, x, alpha=0.5)
    assert new.to_dense()[0, 1] == pytest.approx(0.6)
    assert ratio == pytest.approx(0.8)


def test_full_step_replaces_with_prediction(monkeypatch, setup):
    params, a, x = setup
    monkeypatch.setattr(purify_mod, "predict_scores", constant_scores(0.3))
    new, _ = purify_step(params, a, x, alpha=1.0)
    np.testing.assert_allclose(new.weights, 0.3)


def test_small_weights_pruned(monkeypatch, setup):
    params, a, x = setup
    monkeypatch.setattr(purify_mod, "predict_scores", constant_scores(5e-5))
    new, _ = purify_step(params, a, x, alpha=1.0)
    assert new.num_edges == 0
    again, ratio = purify_step(params, new, x)
    assert again.num_edges == 0 and ratio == 0.0


def test_zero_decoder_ratio_sequence(setup):
    params, a, x = setup
    params.w_d[:] = 0.0
    trace = purify(params, a, x, PurifyConfig(alpha=0.5))
    # weights go 1 -> 0.75 -> 0.625 ... toward 0.5
    np.testing.assert_allclose(trace.ratios, [0.5, 1 / 3, 0.2, 1 / 9, 1 / 17])
    assert trace.termination == "max_steps"
    assert len(trace.steps) == 5


def test_large_tau_stops_after_one_step(setup):
    params, a, x = setup
    trace = purify(params, a, x, PurifyConfig(tau=10.0))
    assert len(trace.steps) == 1 and trace.termination == "threshold"


def test_support_never_grows(setup):
    params, a, x = setup
    trace = purify(params, a, x)
    before = set(zip(*a.edges()[:2]))
    after = set(zip(*trace.final.edges()[:2]))
    assert after <= before
    assert len(trace.steps) <= 5


def test_discretized_single_step(setup):
    params, a, x = setup
    params.w_d[:] = 0.0
    trace = purify(params, a, x, PurifyConfig(single_step_discretize=True))
    assert trace.final == a
    assert trace.termination == "discretized"
    trace = purify(params, a, x, PurifyConfig(single_step_discretize=True,
                                              discretize_threshold=0.6))
    assert trace.final.num_edges == 0


def test_trace_json(setup):
    params, a, x = setup
    trace = purify(params, a, x)
    rows = json.loads(trace.to_json())
    assert [r["step"] for r in rows] == list(range(1, len(rows) + 1))


def test_zero_decoder_lipschitz_is_half(setup):
    # f returns 0.5 on every present pair, so differences come only from the
    # pairs present in one sample: 0.5 per unit input difference
    params, a, x = setup
    params.w_d[:] = 0.0
    value = estimate_lipschitz(params, a, x, pairs=10, rng=np.random.default_rng(0))
    assert value == pytest.approx(0.5)


def test_lipschitz_returns_all_ratios(setup):
    params, a, x = setup
    value, ratios = estimate_lipschitz(params, a, x, pairs=5, rng=np.random.default_rng(1),
                                       return_ratios=True)
    assert len(ratios) == 5 and value == max(ratios)
    with pytest.raises(ValueError):
        estimate_lipschitz(params, SparseAdjacency.empty(10), x, pairs=1)


def test_config_validation():
    with pytest.raises(ValueError):
        PurifyConfig(alpha=0.0)
    with pytest.raises(ValueError):
        PurifyConfig(max_steps=0)
