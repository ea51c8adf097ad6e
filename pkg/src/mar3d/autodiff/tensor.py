"""Dense f32 tensors with reverse-mode automatic differentiation.

A `Tape` records every differentiable operation executed while it is
active; `backward` replays the record in reverse, accumulating gradients
additively at fan-out points. Ops outside any tape run as plain numpy
with no recording overhead, which is how inference paths execute.

Layout is row-major f32 throughout. Broadcasting is deliberately limited
to what the networks here need: equal shapes, a trailing bias vector
`(d,)` against `(..., d)`, and Python scalars.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from ..errors import ContractError, ShapeError

_TAPE_STACK: list["Tape"] = []


def _active_tape() -> "Tape | None":
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _as_f32(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype != np.float32:
        arr = arr.astype(np.float32)
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_f32(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of size {self.data.size}")
        return float(self.data.reshape(-1)[0])

    def has_nonfinite(self) -> bool:
        return not bool(np.isfinite(self.data).all())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; scalars mean Python floats, not 0-d tensors.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Ordered record of executed ops for one forward pass.

    Single-threaded by contract: construct the graph and run backward on
    the same thread. A tape is consumed by `backward` and cannot be
    replayed.
    """

    __slots__ = ("_nodes", "consumed")

    def __init__(self):
        self._nodes: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self.consumed = False

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _TAPE_STACK.pop()
        assert popped is self

    def __len__(self) -> int:
        return len(self._nodes)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward_fn: Callable) -> None:
        self._nodes.append((out, inputs, backward_fn))


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate dLoss/dX for every requires_grad ancestor of `loss`.

    `loss` must be scalar; the tape must cover its ancestry and is
    consumed by this call.
    """
    if loss.size != 1:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.shape}")
    if tape.consumed:
        raise ContractError("tape already consumed by a previous backward call")
    tape.consumed = True
    loss.grad = np.ones_like(loss.data)
    for out, inputs, backward_fn in reversed(tape._nodes):
        g = out.grad
        if g is None:
            continue
        for tensor, grad in zip(inputs, backward_fn(g)):
            if grad is None or not tensor.requires_grad:
                continue
            if tensor.grad is None:
                tensor.grad = grad
            else:
                tensor.grad = tensor.grad + grad
    tape._nodes.clear()


def _record(out: Tensor, inputs: tuple[Tensor, ...], backward_fn: Callable) -> Tensor:
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(out, inputs, backward_fn)
    return out


def _unbroadcast_bias(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # Reduce a gradient of shape (..., d) down to a bias parameter (d,).
    if grad.shape == shape:
        return grad
    return grad.reshape(-1, shape[-1]).sum(axis=0)


def _check_pair(a_shape, b_shape, op: str) -> None:
    if a_shape == b_shape:
        return
    if len(b_shape) == 1 and len(a_shape) >= 1 and a_shape[-1] == b_shape[0]:
        return
    raise ShapeError(f"{op}: incompatible shapes {a_shape} and {b_shape}")


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        out = Tensor(a.data + np.float32(b))
        return _record(out, (a,), lambda g: (g,))
    _check_pair(a.shape, b.shape, "add")
    out = Tensor(a.data + b.data)
    return _record(out, (a, b), lambda g: (g, _unbroadcast_bias(g, b.shape)))


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        out = Tensor(a.data - np.float32(b))
        return _record(out, (a,), lambda g: (g,))
    _check_pair(a.shape, b.shape, "sub")
    out = Tensor(a.data - b.data)
    return _record(out, (a, b), lambda g: (g, -_unbroadcast_bias(g, b.shape)))


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        s = np.float32(b)
        out = Tensor(a.data * s)
        return _record(out, (a,), lambda g: (g * s,))
    _check_pair(a.shape, b.shape, "mul")
    out = Tensor(a.data * b.data)

    def backward_fn(g):
        return g * b.data, _unbroadcast_bias(g * a.data, b.shape)

    return _record(out, (a, b), backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim == 2 and b.ndim == 2:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: inner dims disagree {a.shape} x {b.shape}")
    elif a.ndim == 3 and b.ndim == 3:
        if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
            raise ShapeError(f"matmul: batched dims disagree {a.shape} x {b.shape}")
    else:
        raise ShapeError(f"matmul: unsupported ranks {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data)

    def backward_fn(g):
        at = a.data.swapaxes(-1, -2)
        bt = b.data.swapaxes(-1, -2)
        ga = g @ bt if a.requires_grad else None
        gb = at @ g if b.requires_grad else None
        return ga, gb

    return _record(out, (a, b), backward_fn)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    out = Tensor(a.data.reshape(shape))
    old = a.shape
    return _record(out, (a,), lambda g: (g.reshape(old),))


def permute(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = Tensor(a.data.transpose(axes))
    return _record(out, (a,), lambda g: (g.transpose(inv),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(out, tuple(tensors), backward_fn)


def gather_rows(a: Tensor, idx) -> Tensor:
    """Select rows along axis 0; backward scatter-adds into the source."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError(f"gather_rows: index must be 1-D, got {idx.shape}")
    out = Tensor(a.data[idx])
    src_shape = a.shape

    def backward_fn(g):
        ga = np.zeros(src_shape, dtype=np.float32)
        np.add.at(ga, idx, g)
        return (ga,)

    return _record(out, (a,), backward_fn)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(a.data[start:stop])
    src_shape = a.shape

    def backward_fn(g):
        ga = np.zeros(src_shape, dtype=np.float32)
        ga[start:stop] = g
        return (ga,)

    return _record(out, (a,), backward_fn)


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(dtype=np.float32))
    shape = a.shape
    return _record(out, (a,), lambda g: (np.broadcast_to(g, shape).astype(np.float32),))


def mean_all(a: Tensor) -> Tensor:
    n = a.size
    out = Tensor(a.data.mean(dtype=np.float32))
    shape = a.shape

    def backward_fn(g):
        return (np.broadcast_to(g / n, shape).astype(np.float32),)

    return _record(out, (a,), backward_fn)


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = Tensor(y)
    return _record(out, (a,), lambda g: (g * y,))


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient passes only through unclipped entries."""
    y = np.clip(a.data, lo, hi)
    passthrough = ((a.data > lo) & (a.data < hi)).astype(np.float32)
    out = Tensor(y)
    return _record(out, (a,), lambda g: (g * passthrough,))


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, shift-stabilized."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y)

    def backward_fn(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return ((g - dot) * y,)

    return _record(out, (a,), backward_fn)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a: Tensor) -> Tensor:
    """Tanh-approximation GELU (standard transformer recipe)."""
    x = a.data
    x2 = x * x
    inner = np.float32(_GELU_C) * (x + np.float32(0.044715) * x2 * x)
    t = np.tanh(inner)
    half_1pt = np.float32(0.5) * (np.float32(1.0) + t)
    out = Tensor(x * half_1pt)

    def backward_fn(g):
        sech2 = np.float32(1.0) - t * t
        d_inner = np.float32(_GELU_C) * (np.float32(1.0) + np.float32(3 * 0.044715) * x2)
        return (g * (half_1pt + np.float32(0.5) * x * sech2 * d_inner),)

    return _record(out, (a,), backward_fn)


def layernorm(a: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean, unit variance (no affine)."""
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv
    out = Tensor(y)
    n = x.shape[-1]

    def backward_fn(g):
        gy_sum = g.sum(axis=-1, keepdims=True)
        gyy_sum = (g * y).sum(axis=-1, keepdims=True)
        return (inv * (g - gy_sum / n - y * gyy_sum / n),)

    return _record(out, (a,), backward_fn)


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: shapes differ {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    out = Tensor(np.float32((diff * diff).mean(dtype=np.float64)))
    n = pred.size

    def backward_fn(g):
        base = (2.0 / n) * diff * g
        return base, -base

    return _record(out, (pred, target), backward_fn)


def bce_with_logits_loss(logits: Tensor, targets: Tensor) -> Tensor:
    """Mean binary cross-entropy on logits; targets in {0, 1}.

    Uses max(x,0) - x*t + log1p(exp(-|x|)), stable for large |x|.
    """
    if logits.shape != targets.shape:
        raise ShapeError(f"bce: shapes differ {logits.shape} vs {targets.shape}")
    x = logits.data
    t = targets.data
    loss = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    out = Tensor(np.float32(loss.mean(dtype=np.float64)))
    n = logits.size

    def backward_fn(g):
        sig = 1.0 / (1.0 + np.exp(-x))
        return ((sig - t) * (g / n), None)

    return _record(out, (logits, targets), backward_fn)


def attention(q: Tensor, k: Tensor, v: Tensor, heads: int) -> Tensor:
    """Scaled dot-product attention over unprojected q/k/v sequences.

    q is (n, d), k and v are (m, d); d must divide evenly into `heads`.
    Self- vs cross-attention is purely a matter of where k/v come from.
    """
    from ..errors import ConfigError

    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ShapeError(f"attention expects 2-D inputs, got {q.shape}, {k.shape}, {v.shape}")
    n, d = q.shape
    m, dk = k.shape
    if dk != d or v.shape != (m, d):
        raise ShapeError(f"attention: q {q.shape}, k {k.shape}, v {v.shape} disagree")
    if d % heads != 0:
        raise ConfigError(f"attention: dim {d} not divisible by {heads} heads")
    dh = d // heads
    qh = permute(reshape(q, (n, heads, dh)), (1, 0, 2))
    kh = permute(reshape(k, (m, heads, dh)), (1, 0, 2))
    vh = permute(reshape(v, (m, heads, dh)), (1, 0, 2))
    scores = mul(matmul(qh, permute(kh, (0, 2, 1))), 1.0 / math.sqrt(dh))
    weights = softmax(scores)
    out = matmul(weights, vh)
    return reshape(permute(out, (1, 0, 2)), (n, d))


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x @ weight + bias with weight (in, out) and bias (out,)."""
    out = matmul(x, weight)
    if bias is not None:
        out = add(out, bias)
    return out
