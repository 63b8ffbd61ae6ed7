import numpy as np
import pytest

from gprgae.autodiff import Tape
from gprgae.graph import SparseAdjacency, normalize
from gprgae.model import (Bound, GprGaeParams, encode_edge, encode_nodes, init_params,
                          predict_scores)

from helpers import random_graph


def elu(v):
    return np.where(v > 0, v, np.expm1(np.minimum(v, 0)))


def sigmoid(v):
    return 1 / (1 + np.exp(-v))


def dense_encode(params, adjacency, x):
    a = normalize(adjacency).toarray()
    h0 = x @ params.w_n
    blocks = [h0]
    for k in range(1, params.k_max + 1):
        blocks.append(sum(params.gamma[k, m] * np.linalg.matrix_power(a, m) @ h0
                          for m in range(k + 1)))
    return np.hstack(blocks)


def encode(params, adjacency, x):
    tape = Tape(record=False)
    return encode_nodes(tape, Bound(tape, params), normalize(adjacency), tape.tensor(x)).value


@pytest.fixture
def small():
    rng = np.random.default_rng(3)
    a = random_graph(8, 0.4, seed=11, weighted=True)
    x = rng.normal(size=(8, 5))
    params = init_params(5, k=3, z1=4, z2=6, rng=rng)
    return params, a, x


def test_encode_nodes_matches_matrix_powers(small):
    params, a, x = small
    np.testing.assert_allclose(encode(params, a, x), dense_encode(params, a, x), atol=1e-10)


def test_filter_coefficient_identity():
    a = SparseAdjacency.from_edges(2, [0], [1])
    x = np.array([[1.0], [0.0]])
    params = init_params(1, k=1, z1=1, z2=2)
    params.w_n[:] = 1.0
    params.gamma[1] = [0.5, 0.5]
    h = encode(params, a, x)
    np.testing.assert_allclose(h[:, 1], [0.5, 0.5])
    np.testing.assert_allclose(h[:, 0], [1.0, 0.0])


def test_edgeless_graph_keeps_only_zeroth_hop(small):
    params, _, x = small
    h = encode(params, SparseAdjacency.empty(8), x)
    h0 = x @ params.w_n
    for k in range(params.k_max + 1):
        np.testing.assert_allclose(h[:, k * params.z1:(k + 1) * params.z1],
                                   params.gamma[k, 0] * h0, atol=1e-12)


def test_scores_match_compositional_oracle(small):
    params, a, x = small
    h = dense_encode(params, a, x)
    pairs = np.array([[0, 1], [2, 7], [5, 3]])
    scores = predict_scores(params, a, x, pairs)
    for (i, j), f, b in zip(pairs, scores.forward, scores.backward):
        assert f == pytest.approx(sigmoid(elu(encode_edge(h, i, j, params)) @ params.w_d)[0])
        assert b == pytest.approx(sigmoid(elu(encode_edge(h, j, i, params)) @ params.w_d)[0])


def test_edge_encoding_is_order_variant(small):
    params, a, x = small
    h = encode(params, a, x)
    assert not np.allclose(encode_edge(h, 0, 1, params), encode_edge(h, 1, 0, params))
    with pytest.raises(ValueError):
        encode_edge(h, 2, 2, params)


def test_symmetric_score_is_bitwise_symmetric(small):
    params, a, x = small
    s1 = predict_scores(params, a, x, [[1, 4]]).symmetric
    s2 = predict_scores(params, a, x, [[4, 1]]).symmetric
    assert s1.tobytes() == s2.tobytes()


def test_zero_decoder_gives_half(small):
    params, a, x = small
    params.w_d[:] = 0.0
    s = predict_scores(params, a, x, [[0, 1], [2, 3]])
    np.testing.assert_array_equal(s.symmetric, [0.5, 0.5])


def test_permutation_equivariance(small):
    params, a, x = small
    perm = np.random.default_rng(0).permutation(8)
    inv = np.argsort(perm)
    a_perm = SparseAdjacency(a.to_dense()[np.ix_(perm, perm)])
    pairs = np.array([[0, 1], [3, 6], [2, 5]])
    s = predict_scores(params, a, x, pairs).symmetric
    s_perm = predict_scores(params, a_perm, x[perm], inv[pairs]).symmetric
    np.testing.assert_allclose(s, s_perm, atol=1e-12)


def test_eval_mode_is_deterministic(small):
    params, a, x = small
    s1 = predict_scores(params, a, x, [[0, 2]]).symmetric
    s2 = predict_scores(params, a, x, [[0, 2]]).symmetric
    assert s1.tobytes() == s2.tobytes()


def test_chunking_does_not_change_scores(small):
    params, a, x = small
    pairs = np.array([[i, j] for i in range(8) for j in range(i + 1, 8)])
    np.testing.assert_array_equal(predict_scores(params, a, x, pairs).forward,
                                  predict_scores(params, a, x, pairs, chunk=5).forward)


def test_bad_inputs(small):
    params, a, x = small
    with pytest.raises(ValueError):
        predict_scores(params, a, x[:, :3], [[0, 1]])
    with pytest.raises(ValueError):
        predict_scores(params, a, x, [[2, 2]])
    with pytest.raises(IndexError):
        predict_scores(params, a, x, [[0, 8]])


def test_checkpoint_round_trip(small, tmp_path):
    params, a, x = small
    params.save(tmp_path / "p.json")
    loaded = GprGaeParams.load(tmp_path / "p.json")
    for name, arr in params.arrays().items():
        np.testing.assert_array_equal(loaded.arrays()[name], arr)
    pairs = [[0, 1], [4, 6]]
    np.testing.assert_array_equal(predict_scores(loaded, a, x, pairs).symmetric,
                                  predict_scores(params, a, x, pairs).symmetric)


def test_checkpoint_rejects_other_formats():
    with pytest.raises(ValueError):
        GprGaeParams.from_dict({"format": "gcn-params", "version": 1})


def test_init_pins_first_coefficient():
    params = init_params(3, k=4, z1=2, z2=3, rng=np.random.default_rng(1))
    assert params.gamma[0, 0] == 1.0
    assert np.all(np.triu(params.gamma, 1) == 0)
    params.validate()


def test_zeroth_order_coefficients_repeat_first_block(small):
    params, a, x = small
    params.gamma[:] = 0.0
    params.gamma[:, 0] = 1.0
    h = encode(params, a, x)
    h0 = x @ params.w_n
    np.testing.assert_allclose(h, np.tile(h0, params.k_max + 1), atol=1e-12)
