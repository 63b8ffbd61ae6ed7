import numpy as np
import pytest
import scipy.sparse as sp

from gprgae.autodiff import Tape, TapeError, grad_check
from gprgae.graph import SparseAdjacency, normalize

from helpers import random_graph


def test_spmm_zero_and_permutation():
    tape = Tape(record=False)
    h = tape.tensor(np.arange(6.0).reshape(2, 3))
    assert np.all(tape.spmm(sp.csr_matrix((2, 2)), h).value == 0)
    a = normalize(SparseAdjacency.from_edges(2, [0], [1]))
    out = tape.spmm(a, tape.tensor(np.eye(2))).value
    np.testing.assert_array_equal(out, [[0, 1], [1, 0]])


def test_spmm_matches_dense_product(rng):
    a = normalize(random_graph(5, 0.5, seed=4, weighted=True))
    h = rng.normal(size=(5, 3))
    out = Tape(record=False).spmm(a, Tape().tensor(h)).value
    np.testing.assert_allclose(out, a.toarray() @ h, atol=1e-12)


def test_spmm_rejects_mismatch():
    with pytest.raises(ValueError):
        Tape().spmm(sp.identity(3, format="csr"), Tape().tensor(np.ones((4, 2))))


def test_spmm_backward_against_dense_transpose(rng):
    a = normalize(random_graph(10, 0.4, seed=5, weighted=True))
    h0 = rng.normal(size=(10, 4))
    up = rng.normal(size=(10, 4))
    tape = Tape()
    h = tape.tensor(h0, requires_grad=True)
    out = tape.spmm(a, h)
    tape.backward(tape.sum(tape.mul(out, tape.tensor(up))))
    np.testing.assert_allclose(h.grad, a.toarray().T @ up, atol=1e-12)


def test_elementwise_definitions():
    tape = Tape(record=False)
    assert tape.sigmoid(tape.tensor(0.0)).item() == 0.5
    x = np.array([[0.0, 0.5, 3.0]])
    np.testing.assert_array_equal(tape.elu(tape.tensor(x)).value, x)
    assert tape.elu(tape.tensor(-1.0)).item() == pytest.approx(np.exp(-1) - 1)


def test_dropout_contract(rng):
    tape = Tape(record=False)
    x = tape.tensor(rng.normal(size=(20, 20)))
    assert tape.dropout(x, 0.0, rng, True) is x
    assert tape.dropout(x, 0.9, rng, False) is x
    y = tape.dropout(x, 0.5, rng, True).value
    kept = y != 0
    np.testing.assert_allclose(y[kept], 2 * x.value[kept])
    assert 0.3 < kept.mean() < 0.7
    with pytest.raises(ValueError):
        tape.dropout(x, 1.0, rng, True)


def test_backward_is_single_use():
    tape = Tape()
    w = tape.tensor([[1.0]], requires_grad=True)
    loss = tape.sum(tape.square(w))
    tape.backward(loss)
    with pytest.raises(TapeError):
        tape.backward(loss)


def test_grad_check_sigmoid_matmul(rng):
    x = Tape().tensor(rng.normal(size=(3, 3)))
    w = Tape().tensor(rng.normal(size=(3, 3)))
    err = grad_check(lambda t: t.sum(t.sigmoid(t.matmul(x, w))), [x, w])
    assert err < 1e-6


def test_grad_check_constant():
    w = Tape().tensor(np.ones((2, 2)))
    const = np.array([[3.0]])
    err = grad_check(lambda t: t.tensor(const) if True else w, [w])
    assert err == 0.0
    assert np.all(w.grad == 0)


PRIMITIVES = {
    "matmul": lambda t, a, b: t.matmul(a, b),
    "elu": lambda t, a, b: t.elu(t.matmul(a, b)),
    "relu": lambda t, a, b: t.relu(t.matmul(a, b)),
    "tanh": lambda t, a, b: t.tanh(t.matmul(a, b)),
    "sigmoid": lambda t, a, b: t.sigmoid(t.matmul(a, b)),
    "square": lambda t, a, b: t.square(t.sub(a, t.scale(b, 0.5))),
    "concat": lambda t, a, b: t.concat_cols([a, t.mul(a, b), b]),
    "gather": lambda t, a, b: t.gather_rows(t.add(a, b), [0, 2, 2, 1]),
    "slice": lambda t, a, b: t.slice_rows(t.mul(a, b), 1, 3),
    "scale_add": lambda t, a, b: t.scale_add(t.scale_add(None, t.entry(b, 0, 1), a),
                                             t.entry(a, 2, 0), b),
    "log": lambda t, a, b: t.log_clamped(t.sigmoid(t.mul(a, b))),
    "margin": lambda t, a, b: t.margin(t.matmul(a, b), [0, 1, 2]),
    "cross_entropy": lambda t, a, b: t.cross_entropy(t.matmul(a, b), [2, 0, 1]),
    "mean": lambda t, a, b: t.mean(t.mul(a, b)),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients(name, rng):
    a = Tape().tensor(rng.normal(size=(3, 3)))
    b = Tape().tensor(rng.normal(size=(3, 3)))
    fixed = {}

    def f(t):
        out = PRIMITIVES[name](t, a, b)
        if out.shape not in fixed:
            fixed[out.shape] = np.random.default_rng(9).normal(size=out.shape)
        return t.sum(t.mul(out, t.tensor(fixed[out.shape])))

    assert grad_check(f, [a, b]) < 1e-5


def test_gcn_normalize_dense_gradient(rng):
    dense = random_graph(6, 0.5, seed=8, weighted=True).to_dense()
    a = Tape().tensor(dense)
    up = rng.normal(size=(6, 6))
    err = grad_check(lambda t: t.sum(t.mul(t.gcn_normalize_dense(a), t.tensor(up))), [a])
    assert err < 1e-6
    value = Tape(record=False).gcn_normalize_dense(Tape().tensor(dense)).value
    np.testing.assert_allclose(value, normalize(SparseAdjacency(dense), True).toarray(), atol=1e-14)


def test_non_finite_values_rejected():
    tape = Tape()
    with pytest.raises(FloatingPointError):
        tape.scale(tape.tensor([[np.inf]]), 1.0)
