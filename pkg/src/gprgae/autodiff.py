"""A small reverse-mode tape over dense numpy arrays.

Only the primitives needed by the purifier, the GCN classifier and the
dense attack path are provided.  Every primitive records a closure that
maps the upstream gradient to gradients of its inputs; ``Tape.backward``
replays them once in reverse order.

>>> tape = Tape()
>>> w = tape.tensor([[1.0], [2.0]], requires_grad=True)
>>> x = tape.tensor([[3.0, 4.0]])
>>> loss = tape.sum(tape.matmul(x, w))
>>> tape.backward(loss)
>>> w.grad.ravel().tolist()
[3.0, 4.0]
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp


class TapeError(RuntimeError):
    pass


class Tensor:
    """Dense 2-d value with an optional accumulated gradient."""

    __slots__ = ("value", "grad", "requires_grad")

    def __init__(self, value, requires_grad: bool = False):
        value = np.asarray(value, dtype=np.float64)
        if value.ndim == 0:
            value = value.reshape(1, 1)
        elif value.ndim == 1:
            value = value.reshape(1, -1)
        self.value = value
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(value) if requires_grad else None

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Records primitives in execution order.

    With ``record=False`` the tape only computes values, which is what the
    evaluation paths use.
    """

    def __init__(self, record: bool = True):
        self.record = record
        self._records: list[tuple[Tensor, Sequence[Tensor], Callable]] = []
        self._used = False

    def __len__(self) -> int:
        return len(self._records)

    def tensor(self, value, requires_grad: bool = False) -> Tensor:
        return Tensor(value, requires_grad=requires_grad)

    def _out(self, value: np.ndarray, inputs: Sequence[Tensor], backward: Callable) -> Tensor:
        if not np.all(np.isfinite(value)):
            raise FloatingPointError("non-finite value produced by primitive")
        needs = self.record and any(t.requires_grad for t in inputs)
        out = Tensor(value, requires_grad=needs)
        if needs:
            self._records.append((out, inputs, backward))
        return out

    def backward(self, loss: Tensor) -> None:
        if self._used:
            raise TapeError("tape already consumed; re-run the forward pass")
        if loss.shape != (1, 1):
            raise ValueError("backward needs a scalar loss")
        self._used = True
        if not loss.requires_grad:
            return
        loss.grad = np.ones((1, 1))
        for out, inputs, rule in reversed(self._records):
            if not out.grad.any():
                continue
            grads = rule(out.grad)
            for t, g in zip(inputs, grads):
                if g is not None and t.requires_grad:
                    t.grad += g
        self._records.clear()

    # -- linear algebra -------------------------------------------------

    def spmm(self, a, h: Tensor) -> Tensor:
        """Sparse (or dense constant) ``a`` times ``h``."""
        if a.shape[1] != h.shape[0]:
            raise ValueError(f"spmm shape mismatch: {a.shape} @ {h.shape}")
        value = np.asarray(a @ h.value)
        at = a.T
        return self._out(value, (h,), lambda g: (np.asarray(at @ g),))

    def matmul(self, x: Tensor, w: Tensor) -> Tensor:
        if x.shape[1] != w.shape[0]:
            raise ValueError(f"matmul shape mismatch: {x.shape} @ {w.shape}")
        xv, wv = x.value, w.value

        def rule(g):
            return (g @ wv.T if x.requires_grad else None,
                    xv.T @ g if w.requires_grad else None)

        return self._out(xv @ wv, (x, w), rule)

    def concat_cols(self, parts: Sequence[Tensor]) -> Tensor:
        widths = np.cumsum([0] + [p.shape[1] for p in parts])
        value = np.concatenate([p.value for p in parts], axis=1)

        def rule(g):
            return [g[:, widths[i]:widths[i + 1]] for i in range(len(parts))]

        return self._out(value, tuple(parts), rule)

    def gather_rows(self, x: Tensor, idx) -> Tensor:
        idx = np.asarray(idx, dtype=np.int64)
        n = x.shape[0]

        def rule(g):
            scatter = sp.csr_matrix((np.ones(len(idx)), (idx, np.arange(len(idx)))),
                                    shape=(n, len(idx)))
            return (np.asarray(scatter @ g),)

        return self._out(x.value[idx], (x,), rule)

    def slice_rows(self, x: Tensor, start: int, stop: int) -> Tensor:
        shape = x.shape

        def rule(g):
            out = np.zeros(shape)
            out[start:stop] = g
            return (out,)

        return self._out(x.value[start:stop], (x,), rule)

    def entry(self, x: Tensor, i: int, j: int) -> Tensor:
        shape = x.shape

        def rule(g):
            out = np.zeros(shape)
            out[i, j] = g[0, 0]
            return (out,)

        return self._out(x.value[i:i + 1, j:j + 1].copy(), (x,), rule)

    def scale_add(self, accum: Tensor | None, coef: Tensor, x: Tensor) -> Tensor:
        """``accum + coef * x`` with ``coef`` a 1x1 tensor; ``accum`` may be None."""
        c = coef.value[0, 0]
        xv = x.value
        if accum is None:
            return self._out(c * xv, (coef, x),
                             lambda g: (np.array([[np.sum(g * xv)]]), c * g))
        return self._out(accum.value + c * xv, (accum, coef, x),
                         lambda g: (g, np.array([[np.sum(g * xv)]]), c * g))

    # -- element-wise ---------------------------------------------------

    def add(self, x: Tensor, y: Tensor) -> Tensor:
        return self._out(x.value + y.value, (x, y), lambda g: (g, g))

    def sub(self, x: Tensor, y: Tensor) -> Tensor:
        return self._out(x.value - y.value, (x, y), lambda g: (g, -g))

    def mul(self, x: Tensor, y: Tensor) -> Tensor:
        xv, yv = x.value, y.value
        return self._out(xv * yv, (x, y), lambda g: (g * yv, g * xv))

    def scale(self, x: Tensor, c: float) -> Tensor:
        return self._out(c * x.value, (x,), lambda g: (c * g,))

    def elu(self, x: Tensor) -> Tensor:
        xv = x.value
        neg = xv < 0
        value = xv.copy()
        np.expm1(xv, out=value, where=neg)

        def rule(g):
            out = g.copy()
            np.multiply(g, value + 1.0, out=out, where=neg)
            return (out,)

        return self._out(value, (x,), rule)

    def relu(self, x: Tensor) -> Tensor:
        pos = x.value > 0
        return self._out(np.where(pos, x.value, 0.0), (x,), lambda g: (g * pos,))

    def sigmoid(self, x: Tensor) -> Tensor:
        s = _sigmoid(x.value)
        return self._out(s, (x,), lambda g: (g * s * (1.0 - s),))

    def tanh(self, x: Tensor) -> Tensor:
        t = np.tanh(x.value)
        return self._out(t, (x,), lambda g: (g * (1.0 - t * t),))

    def square(self, x: Tensor) -> Tensor:
        xv = x.value
        return self._out(xv * xv, (x,), lambda g: (2.0 * g * xv,))

    def log_clamped(self, x: Tensor, lo: float = 1e-7, hi: float = 1.0 - 1e-7) -> Tensor:
        xv = x.value
        inside = (xv >= lo) & (xv <= hi)
        c = np.clip(xv, lo, hi)
        return self._out(np.log(c), (x,), lambda g: (np.where(inside, g / c, 0.0),))

    def dropout(self, x: Tensor, rate: float, rng: np.random.Generator | None,
                training: bool) -> Tensor:
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        if not training or rate == 0.0:
            return x
        keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
        return self._out(x.value * keep, (x,), lambda g: (g * keep,))

    # -- reductions -----------------------------------------------------

    def sum(self, x: Tensor) -> Tensor:
        shape = x.shape
        return self._out(np.array([[x.value.sum()]]), (x,),
                         lambda g: (np.full(shape, g[0, 0]),))

    def mean(self, x: Tensor) -> Tensor:
        shape = x.shape
        n = x.value.size
        return self._out(np.array([[x.value.mean()]]), (x,),
                         lambda g: (np.full(shape, g[0, 0] / n),))

    def margin(self, logits: Tensor, labels) -> Tensor:
        """Per-row ``z[y] - max_{c != y} z[c]`` as an (n, 1) column."""
        z = logits.value
        labels = np.asarray(labels, dtype=np.int64)
        rows = np.arange(z.shape[0])
        other = z.copy()
        other[rows, labels] = -np.inf
        runner = np.argmax(other, axis=1)
        value = (z[rows, labels] - other[rows, runner])[:, None]

        def rule(g):
            out = np.zeros_like(z)
            out[rows, labels] += g[:, 0]
            out[rows, runner] -= g[:, 0]
            return (out,)

        return self._out(value, (logits,), rule)

    def cross_entropy(self, logits: Tensor, labels) -> Tensor:
        z = logits.value
        labels = np.asarray(labels, dtype=np.int64)
        rows = np.arange(z.shape[0])
        shifted = z - z.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        n = z.shape[0]

        def rule(g):
            p = np.exp(logp)
            p[rows, labels] -= 1.0
            return (g[0, 0] * p / n,)

        return self._out(np.array([[-logp[rows, labels].mean()]]), (logits,), rule)

    # -- dense adjacency path (attack only) ----------------------------

    def gcn_normalize_dense(self, a: Tensor) -> Tensor:
        """``D^-1/2 (A + I) D^-1/2`` for a dense symmetric ``a``."""
        av = a.value + np.eye(a.shape[0])
        d = av.sum(axis=1)
        s = 1.0 / np.sqrt(d)
        value = s[:, None] * av * s[None, :]

        def rule(g):
            direct = s[:, None] * g * s[None, :]
            # d value_ij / d d_k enters through s_i and s_j
            t = (g * value).sum(axis=1) + (g * value).sum(axis=0)
            grad_d = -0.5 * t / d
            return (direct + grad_d[:, None],)

        return self._out(value, (a,), rule)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def grad_check(f: Callable[[Tape], Tensor], params: Sequence[Tensor], epsilon: float = 1e-5,
               max_coords: int = 50, rng: np.random.Generator | None = None) -> float:
    """Compare tape gradients of ``f`` against central finite differences.

    ``f`` builds the scalar loss on the tape it is given, reading the current
    ``value`` of each tensor in ``params``.  At most ``max_coords`` coordinates
    per parameter are probed.  Returns the max of
    ``|analytic - numeric| / max(1, |numeric|)``.
    """
    rng = rng or np.random.default_rng(0)
    for p in params:
        p.requires_grad = True
        p.grad = np.zeros_like(p.value)
    tape = Tape()
    loss = f(tape)
    if not np.isfinite(loss.value).all():
        raise FloatingPointError("loss is not finite")
    tape.backward(loss)
    analytic = [p.grad.copy() for p in params]

    def evaluate() -> float:
        val = f(Tape(record=False)).item()
        if not np.isfinite(val):
            raise FloatingPointError("loss is not finite")
        return val

    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.value.reshape(-1)
        coords = np.arange(flat.size)
        if flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + epsilon
            up = evaluate()
            flat[c] = orig - epsilon
            down = evaluate()
            flat[c] = orig
            numeric = (up - down) / (2 * epsilon)
            err = abs(grad.reshape(-1)[c] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst


def as_operator(a) -> sp.csr_matrix:
    """Coerce an adjacency-like object into a CSR matrix usable by ``spmm``."""
    if sp.issparse(a):
        return a.tocsr()
    return sp.csr_matrix(np.asarray(a, dtype=np.float64))
