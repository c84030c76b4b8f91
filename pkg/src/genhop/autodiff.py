"""A small reverse-mode autodiff engine over dense float64 numpy arrays.

Operations build a graph of :class:`Tensor` nodes as they run (define by run);
:func:`grad` walks it once in reverse topological order. Sparse matrices only
ever enter as constants through :func:`spmm`.
"""
from __future__ import annotations

import builtins
import contextlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

ArrayLike = "np.ndarray | float | int | Tensor"


class Tensor:
    __slots__ = ("data", "requires_grad", "parents", "backward_fn", "op", "grad")

    def __init__(self, data, requires_grad: bool = False, parents: tuple = (), backward_fn=None, op: str = "leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf needing it."""
        leaves = [t for t in _topo_order(self) if t.requires_grad and not t.parents]
        for t, g in zip(leaves, grad(self, leaves, allow_unused=True)):
            t.grad = g if t.grad is None else t.grad + g

    __add__ = lambda a, b: add(a, b)
    __radd__ = lambda a, b: add(b, a)
    __sub__ = lambda a, b: sub(a, b)
    __rsub__ = lambda a, b: sub(b, a)
    __mul__ = lambda a, b: mul(a, b)
    __rmul__ = lambda a, b: mul(b, a)
    __truediv__ = lambda a, b: div(a, b)
    __rtruediv__ = lambda a, b: div(b, a)
    __matmul__ = lambda a, b: matmul(a, b)
    __neg__ = lambda a: neg(a)
    __getitem__ = lambda a, key: index(a, key)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=requires_grad)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents: Sequence[Tensor], backward_fn, op: str) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(data, op=op)
    return Tensor(data, True, tuple(parents), backward_fn, op)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# kink bookkeeping for finite-difference checks ------------------------------

_KINK_LOG: list[np.ndarray] | None = None


@contextlib.contextmanager
def record_kinks():
    """Collect the inputs of every relu/abs evaluated inside the block."""
    global _KINK_LOG
    prev, _KINK_LOG = _KINK_LOG, []
    try:
        yield _KINK_LOG
    finally:
        _KINK_LOG = prev


def _log_kink(x: np.ndarray) -> None:
    if _KINK_LOG is not None:
        _KINK_LOG.append(x.copy())


# elementwise -----------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)), "div")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def relu(a) -> Tensor:
    a = as_tensor(a)
    _log_kink(a.data)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def abs(a) -> Tensor:  # noqa: A001 - mirrors numpy naming
    a = as_tensor(a)
    _log_kink(a.data)
    s = np.sign(a.data)
    return _make(np.abs(a.data), (a,), lambda g: (g * s,), "abs")


def square(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


# shape and reductions --------------------------------------------------------

def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.T, (a,), lambda g: (g.T,), "transpose")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)
    return _make(out, (a,), back, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    return scale(sum(a, axis, keepdims), 1.0 / n)


def var(a, axis: int = 0, ddof: int = 0, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.shape[axis]
    centered = sub(a, mean(a, axis, keepdims=True))
    return scale(sum(square(centered), axis, keepdims), 1.0 / (n - ddof))


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _make(np.concatenate([t.data for t in ts], axis=axis), ts,
                 lambda g: tuple(np.split(g, sizes, axis=axis)), "concat")


def index(a, key) -> Tensor:
    a = as_tensor(a)

    def back(g):
        out = np.zeros_like(a.data)
        np.add.at(out, key, g)
        return (out,)
    return _make(a.data[key], (a,), back, "index")


# linear algebra --------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


def spmm(S, x) -> Tensor:
    """Constant (sparse or dense) matrix times tensor."""
    x = as_tensor(x)
    if sp.issparse(S):
        S = S.tocsr()
        St = S.T.tocsr()
        out = np.asarray(S @ x.data)
        return _make(out, (x,), lambda g: (np.asarray(St @ g),), "spmm")
    S = np.asarray(S, dtype=np.float64)
    return _make(S @ x.data, (x,), lambda g: (S.T @ g,), "spmm")


def segment_sum(x, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Sum rows of ``x`` into ``num_segments`` buckets, in row order."""
    x = as_tensor(x)
    ids = np.asarray(segment_ids, dtype=np.int64)
    out = np.zeros((num_segments,) + x.shape[1:])
    np.add.at(out, ids, x.data)
    return _make(out, (x,), lambda g: (g[ids],), "segment_sum")


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)
    return _make(out, (a,), lambda g: (g - soft * g.sum(axis=axis, keepdims=True),), "log_softmax")


def masked_logsumexp(a, mask: np.ndarray) -> Tensor:
    """Row-wise log-sum-exp over entries where ``mask`` is True."""
    a = as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    x = np.where(mask, a.data, -np.inf)
    mx = x.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(x - mx), 0.0)
    s = e.sum(axis=1, keepdims=True)
    out = (mx + np.log(s)).ravel()
    w = e / s
    return _make(out, (a,), lambda g: (w * g[:, None],), "masked_logsumexp")


def l2_normalize_rows(a, min_norm: float = 0.0) -> Tensor:
    a = as_tensor(a)
    norms = np.sqrt((a.data * a.data).sum(axis=1))
    if np.any(norms <= min_norm):
        raise ValueError("cannot normalise a zero-norm row")
    return div(a, sqrt(sum(square(a), axis=1, keepdims=True)))


def cosine_similarity_matrix(a, b) -> Tensor:
    return matmul(l2_normalize_rows(a), transpose(l2_normalize_rows(b)))


def batch_norm(x, gamma, beta, eps: float = 1e-5) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Normalise over rows with batch statistics; returns (y, mean, biased var)."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    n = x.shape[0]
    mu = x.data.mean(axis=0)
    v = x.data.var(axis=0)
    inv = 1.0 / np.sqrt(v + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gamma.data + beta.data

    def back(g):
        gx_hat = g * gamma.data
        gx = inv / n * (n * gx_hat - gx_hat.sum(axis=0) - xhat * (gx_hat * xhat).sum(axis=0))
        return gx, (g * xhat).sum(axis=0), g.sum(axis=0)
    return _make(out, (x, gamma, beta), back, "batch_norm"), mu, v


def affine_norm(x, mean_: np.ndarray, var_: np.ndarray, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Batch norm with fixed (running) statistics."""
    inv = 1.0 / np.sqrt(var_ + eps)
    return add(mul(mul(sub(x, mean_), inv), gamma), beta)


# backward pass ---------------------------------------------------------------

def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def grad(output: Tensor, wrt: Sequence[Tensor], allow_unused: bool = False) -> list[np.ndarray]:
    """Gradients of a scalar ``output`` with respect to each tensor in ``wrt``."""
    if output.data.size != 1:
        raise ValueError(f"gradient needs a scalar output, got shape {output.shape}")
    grads: dict[int, np.ndarray] = {}
    if output.requires_grad:
        grads[id(output)] = np.ones_like(output.data)
        for node in reversed(_topo_order(output)):
            g = grads.pop(id(node), None) if node.parents else grads.get(id(node))
            if g is None or not node.parents:
                continue
            for p, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                grads[key] = grads[key] + pg if key in grads else pg
    out = []
    for t in wrt:
        g = grads.get(id(t))
        if g is None:
            if not allow_unused:
                raise ValueError(f"{t!r} is not part of the computation")
            g = np.zeros_like(t.data)
        out.append(g.reshape(t.shape))
    return out


gradients = grad


# finite differences ----------------------------------------------------------

@dataclass
class FDResult:
    max_rel_error: float
    checked: int
    excluded: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)

    def ok(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error <= tol


def _kink_pattern(log: list[np.ndarray], tol: float) -> list[np.ndarray]:
    return [np.where(np.abs(x) <= tol, 0, np.sign(x)).astype(np.int8) for x in log]


def finite_difference_check(
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    step: float = 1e-4,
    kink_tol: float = 1e-6,
    floor: float = 1e-6,
) -> FDResult:
    """Compare reverse-mode gradients of ``fn(*inputs)`` with central differences.

    Relative error per coordinate is ``|a - n| / max(|a|, |n|, floor)``.
    Every relu/abs input is classified as negative, positive or within
    ``kink_tol`` of zero; a coordinate is excluded when nudging it by
    ``+-step`` changes that classification anywhere, i.e. when the
    difference quotient would straddle a kink.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    arrays = [np.array(x, dtype=np.float64) for x in inputs]
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    with record_kinks() as base_log:
        out = fn(*leaves)
    analytic = grad(out, leaves, allow_unused=True)
    base_pattern = _kink_pattern(base_log, kink_tol)

    def evaluate(vals):
        with record_kinks() as log:
            val = fn(*[Tensor(v) for v in vals]).item()
        return val, _kink_pattern(log, kink_tol)

    worst, checked, excluded = 0.0, 0, []
    for i, a in enumerate(arrays):
        for idx in np.ndindex(a.shape):
            plus = [x.copy() for x in arrays]
            minus = [x.copy() for x in arrays]
            plus[i][idx] += step
            minus[i][idx] -= step
            fp, pp = evaluate(plus)
            fm, pm = evaluate(minus)
            crosses = any(not np.array_equal(x, y) for x, y in zip(pp, base_pattern)) or any(
                not np.array_equal(x, y) for x, y in zip(pm, base_pattern)
            )
            if crosses:
                excluded.append((i, idx))
                continue
            numeric = (fp - fm) / (2 * step)
            an = analytic[i][idx]
            err = builtins.abs(an - numeric) / max(builtins.abs(an), builtins.abs(numeric), floor)
            worst = max(worst, err)
            checked += 1
    return FDResult(worst, checked, excluded)


def no_grad_copy(t: Tensor) -> Tensor:
    return Tensor(t.data.copy())


def parameters_to_vector(params: Iterable[Tensor]) -> np.ndarray:
    return np.concatenate([p.data.ravel() for p in params])
