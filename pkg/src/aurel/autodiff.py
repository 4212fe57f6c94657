"""Reverse-mode automatic differentiation over float64 NumPy arrays.

Every operation records an entry on the active :class:`Tape` (when one is
open and an input requires gradients); ``Tape.backward`` replays the entries
in reverse, accumulating exact analytic gradients into ``DiffArray.grad``.
With no tape open the same functions are plain forward evaluation, which is
what the finite-difference checker and all inference paths use.

Conventions:
  * everything is float64; inputs are converted on construction
  * arrays are treated as immutable once created; the only mutation is
    gradient accumulation during a single backward pass
  * norm-like denominators are floored at ``NORM_FLOOR`` so cosine similarity
    and l2 normalization are total functions
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from aurel.errors import ContractError
from aurel.kernels import conv2d_backward_input, conv2d_backward_weight, conv2d_forward

NORM_FLOOR = 1e-12


class DiffArray:
    """N-dimensional float64 array with optional gradient accumulation."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on non-scalar array of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"DiffArray(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; scalars stay raw floats, they are never wrapped
    def __add__(self, other):
        return add(self, other) if isinstance(other, DiffArray) else add_scalar(self, other)

    def __radd__(self, other):
        return add_scalar(self, other)

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, DiffArray) else add_scalar(self, -other)

    def __rsub__(self, other):
        return add_scalar(neg(self), other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, DiffArray) else mul_scalar(self, other)

    def __rmul__(self, other):
        return mul_scalar(self, other)

    def __truediv__(self, other):
        if isinstance(other, DiffArray):
            raise TypeError("elementwise array division is not a primitive; use mul + reciprocal scalars")
        return mul_scalar(self, 1.0 / other)

    def __neg__(self):
        return neg(self)


class Tape:
    """Explicitly recorded operation tape.

    Entries are appended in execution order, which is a valid topological
    order of the computation, so the backward pass is a single reversed
    sweep.  Use as a context manager around the forward computation::

        with Tape() as tape:
            loss = ...
        tape.backward(loss)
    """

    def __init__(self):
        self._entries: list[tuple[DiffArray, tuple[DiffArray, ...], Callable]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _TAPE_STACK.pop()
        assert popped is self

    def record(self, out: DiffArray, inputs: tuple, backward_fn: Callable) -> None:
        self._entries.append((out, inputs, backward_fn))

    def __len__(self) -> int:
        return len(self._entries)

    def backward(self, loss: DiffArray) -> None:
        """Accumulate d(loss)/d(x) into ``x.grad`` for every leaf input.

        Leaves are arrays that were never produced by a recorded op, i.e.
        parameters and data.  Intermediate gradients stay internal.  Stored
        gradients may alias backward outputs, so accumulation copies on the
        first write to any shared buffer.
        """
        if loss.data.size != 1:
            raise ContractError("backward() requires a scalar loss")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        owned: set[int] = {id(loss)}
        for out, inputs, backward_fn in reversed(self._entries):
            gout = grads.get(id(out))
            if gout is None:
                continue
            gins = backward_fn(gout)
            for inp, gin in zip(inputs, gins):
                if gin is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key not in grads:
                    grads[key] = gin
                elif key in owned:
                    grads[key] += gin
                else:
                    grads[key] = grads[key] + gin
                    owned.add(key)
        produced = {id(out) for out, _, _ in self._entries}
        written: set[int] = set()
        for _, inputs, _ in self._entries:
            for t in inputs:
                key = id(t)
                if key in produced or key in written or not t.requires_grad:
                    continue
                written.add(key)
                g = grads.get(key)
                if g is None:
                    continue
                if t.grad is None:
                    t.grad = g.copy()
                else:
                    t.grad += g
        if loss.requires_grad and id(loss) not in produced and id(loss) not in written:
            if loss.grad is None:
                loss.grad = np.ones_like(loss.data)
            else:
                loss.grad += np.ones_like(loss.data)


_TAPE_STACK: list[Tape] = []


def _active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _make(data: np.ndarray, inputs: tuple, backward_fn: Callable) -> DiffArray:
    tape = _active_tape()
    needs = tape is not None and any(i.requires_grad for i in inputs)
    out = DiffArray(data, requires_grad=needs)
    if needs:
        tape.record(out, inputs, backward_fn)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back down to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, (gs, ss) in enumerate(zip(g.shape, shape)):
        if ss == 1 and gs != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------- arithmetic


def add(a: DiffArray, b: DiffArray) -> DiffArray:
    y = a.data + b.data
    return _make(y, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: DiffArray, b: DiffArray) -> DiffArray:
    y = a.data - b.data
    return _make(y, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: DiffArray, b: DiffArray) -> DiffArray:
    y = a.data * b.data
    return _make(
        y,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def neg(a: DiffArray) -> DiffArray:
    return _make(-a.data, (a,), lambda g: (-g,))


def add_scalar(a: DiffArray, s: float) -> DiffArray:
    return _make(a.data + float(s), (a,), lambda g: (g,))


def mul_scalar(a: DiffArray, s: float) -> DiffArray:
    s = float(s)
    return _make(a.data * s, (a,), lambda g: (g * s,))


def relu(a: DiffArray) -> DiffArray:
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def exp(a: DiffArray) -> DiffArray:
    y = np.exp(a.data)
    return _make(y, (a,), lambda g: (g * y,))


def log(a: DiffArray) -> DiffArray:
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


# ---------------------------------------------------------------- reductions


def sum_(a: DiffArray, axis=None, keepdims: bool = False) -> DiffArray:
    y = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        gx = g
        if axis is not None and not keepdims:
            gx = np.expand_dims(gx, axis)
        return (np.broadcast_to(gx, a.shape).copy(),)

    return _make(y, (a,), backward)


def mean(a: DiffArray, axis=None, keepdims: bool = False) -> DiffArray:
    y = a.data.mean(axis=axis, keepdims=keepdims)
    scale = y.size / a.data.size if a.data.size else 1.0

    def backward(g):
        gx = g * scale
        if axis is not None and not keepdims:
            gx = np.expand_dims(gx, axis)
        return (np.broadcast_to(gx, a.shape).copy(),)

    return _make(y, (a,), backward)


# ---------------------------------------------------------------- structure


def matmul(a: DiffArray, b: DiffArray) -> DiffArray:
    if a.ndim < 2 or b.ndim < 2:
        raise ContractError("matmul requires arrays with at least 2 dimensions")
    if a.shape[-1] != b.shape[-2]:
        raise ContractError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    y = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

    return _make(y, (a, b), backward)


def reshape(a: DiffArray, shape) -> DiffArray:
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: DiffArray, axes: Sequence[int]) -> DiffArray:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _make(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def roll(a: DiffArray, shift, axis) -> DiffArray:
    y = np.roll(a.data, shift, axis=axis)

    def backward(g):
        if isinstance(shift, tuple):
            back = tuple(-s for s in shift)
        else:
            back = -shift
        return (np.roll(g, back, axis=axis),)

    return _make(y, (a,), backward)


def concat(arrays: Sequence[DiffArray], axis: int = 0) -> DiffArray:
    arrays = list(arrays)
    y = np.concatenate([a.data for a in arrays], axis=axis)
    sizes = [a.shape[axis] for a in arrays]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        pieces = []
        for a, start, stop in zip(arrays, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(start, stop)
            pieces.append(g[tuple(idx)])
        return tuple(pieces)

    return _make(y, tuple(arrays), backward)


def getitem(a: DiffArray, idx) -> DiffArray:
    """Basic (slice / integer) indexing; backward scatters into zeros."""
    y = a.data[idx]

    def backward(g):
        gx = np.zeros_like(a.data)
        gx[idx] = g
        return (gx,)

    return _make(y, (a,), backward)


def stop_gradient(a: DiffArray) -> DiffArray:
    """Identity forward; contributes exactly zero to upstream gradients."""
    return DiffArray(a.data, requires_grad=False)


# ------------------------------------------------------------- normalization


def softmax(a: DiffArray, axis: int = -1) -> DiffArray:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return _make(y, (a,), backward)


def l2_normalize(a: DiffArray, axis: int = -1) -> DiffArray:
    """x / max(||x||_2, NORM_FLOOR) along `axis`.

    Below the floor the denominator is constant, so the gradient degrades
    gracefully to g / floor instead of blowing up.
    """
    norm = np.sqrt((a.data**2).sum(axis=axis, keepdims=True))
    denom = np.maximum(norm, NORM_FLOOR)
    y = a.data / denom

    def backward(g):
        free = norm > NORM_FLOOR
        gx = g / denom
        corr = (g * a.data).sum(axis=axis, keepdims=True) * a.data / denom**3
        return (np.where(free, gx - corr, gx),)

    return _make(y, (a,), backward)


def cosine_sim(u: DiffArray, v: DiffArray) -> DiffArray:
    """Cosine similarity over the last axis; shapes broadcast like mul.

    Zero-norm inputs take the clamped-denominator path (the norm in the
    denominator is floored and treated as a constant there).
    """
    su, sv = u.data, v.data
    dot = (su * sv).sum(axis=-1)
    nu = np.sqrt((su**2).sum(axis=-1))
    nv = np.sqrt((sv**2).sum(axis=-1))
    du = np.maximum(nu, NORM_FLOOR)
    dv = np.maximum(nv, NORM_FLOOR)
    y = dot / (du * dv)

    def backward(g):
        g_ = g[..., None]
        inv_u = (1.0 / du)[..., None]
        inv_v = (1.0 / dv)[..., None]
        free_u = (nu > NORM_FLOOR)[..., None]
        free_v = (nv > NORM_FLOOR)[..., None]
        c = y[..., None]
        gu = g_ * inv_u * inv_v * sv - np.where(free_u, g_ * c * su * inv_u**2, 0.0)
        gv = g_ * inv_u * inv_v * su - np.where(free_v, g_ * c * sv * inv_v**2, 0.0)
        return (_unbroadcast(gu, u.shape), _unbroadcast(gv, v.shape))

    return _make(y, (u, v), backward)


# ----------------------------------------------------------------- layers


def conv2d(x: DiffArray, w: DiffArray, stride: int = 1, pad: int = 0) -> DiffArray:
    """2-D convolution, NCHW activations, (out,in,kh,kw) weights."""
    if x.ndim != 4 or w.ndim != 4:
        raise ContractError("conv2d expects 4-D input and weight")
    if x.shape[1] != w.shape[1]:
        raise ContractError(f"conv2d channel mismatch: {x.shape} vs {w.shape}")
    y = conv2d_forward(x.data, w.data, stride, pad)

    def backward(g):
        g = np.ascontiguousarray(g)
        gx = conv2d_backward_input(g, w.data, x.shape, stride, pad)
        gw = conv2d_backward_weight(g, x.data, w.shape, stride, pad)
        return (gx, gw)

    return _make(y, (x, w), backward)


def layer_norm(x: DiffArray, gamma: DiffArray, beta: DiffArray, eps: float = 1e-5) -> DiffArray:
    """Normalize over the last axis, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc**2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std
    y = gamma.data * xhat + beta.data

    def backward(g):
        n = x.shape[-1]
        gxhat = g * gamma.data
        gx = (
            inv_std
            / n
            * (n * gxhat - gxhat.sum(axis=-1, keepdims=True) - xhat * (gxhat * xhat).sum(axis=-1, keepdims=True))
        )
        ggamma = _unbroadcast(g * xhat, gamma.shape)
        gbeta = _unbroadcast(g, beta.shape)
        return (gx, ggamma, gbeta)

    return _make(y, (x, gamma, beta), backward)


class BatchNormState:
    """Running statistics buffer for batch_norm (plain arrays, not on tape)."""

    def __init__(self, dim: int, momentum: float = 0.1, eps: float = 1e-5):
        self.running_mean = np.zeros(dim, dtype=np.float64)
        self.running_var = np.ones(dim, dtype=np.float64)
        self.momentum = momentum
        self.eps = eps


def batch_norm(
    x: DiffArray,
    gamma: DiffArray,
    beta: DiffArray,
    state: BatchNormState,
    training: bool,
) -> DiffArray:
    """Batch normalization over axis 0 of a (batch, features) array.

    Training mode normalizes with biased batch statistics and updates the
    running buffers in place; eval mode uses the buffers.
    """
    if x.ndim != 2:
        raise ContractError("batch_norm expects a (batch, features) array")
    if training:
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        state.running_mean = (1 - state.momentum) * state.running_mean + state.momentum * mu
        state.running_var = (1 - state.momentum) * state.running_var + state.momentum * var
    else:
        mu = state.running_mean
        var = state.running_var
    inv_std = 1.0 / np.sqrt(var + state.eps)
    xhat = (x.data - mu) * inv_std
    y = gamma.data * xhat + beta.data

    def backward(g):
        gxhat = g * gamma.data
        if training:
            n = x.shape[0]
            gx = (
                inv_std
                / n
                * (n * gxhat - gxhat.sum(axis=0) - xhat * (gxhat * xhat).sum(axis=0))
            )
        else:
            gx = gxhat * inv_std
        return (gx, (g * xhat).sum(axis=0), g.sum(axis=0))

    return _make(y, (x, gamma, beta), backward)
