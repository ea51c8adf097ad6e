"""Network building blocks on top of the tensor engine.

Weight init follows the standard transformer recipe: truncated normal
(sigma 0.02) for projection weights, zeros for biases, ones for
layernorm gains.
"""

from __future__ import annotations

import numpy as np

from .rng import Rng
from .tensor import Tensor, attention, gelu, layernorm, linear


def trunc_normal(rng: Rng, shape, std: float = 0.02) -> np.ndarray:
    """Normal draws resampled into [-2 std, 2 std]."""
    out = rng.normal(shape) * std
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(int(bad.sum())) * std
        bad = np.abs(out) > 2 * std
    return out.astype(np.float32)


class Module:
    """Minimal parameter container with name-based registries."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out = [(prefix + name, p) for name, p in self._params.items()]
        for cname, child in self._children.items():
            out.extend(child.named_parameters(prefix + cname + "."))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray], prefix: str = "") -> None:
        from ..errors import CheckpointError

        for name, p in self.named_parameters():
            key = prefix + name
            if key not in arrays:
                raise CheckpointError(f"missing parameter {key!r} in checkpoint")
            if arrays[key].shape != p.data.shape:
                raise CheckpointError(
                    f"shape mismatch for {key!r}: checkpoint {arrays[key].shape}, model {p.data.shape}"
                )
            p.data = arrays[key].astype(np.float32)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: Rng, bias: bool = True):
        super().__init__()
        self.weight = parameter(trunc_normal(rng, (in_dim, out_dim)))
        self.bias = parameter(np.zeros(out_dim, np.float32)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-6):
        super().__init__()
        self.gain = parameter(np.ones(dim, np.float32))
        self.bias = parameter(np.zeros(dim, np.float32))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layernorm(x, self.eps) * self.gain + self.bias


class MultiheadAttention(Module):
    """q/k/v/out projections around scaled dot-product attention."""

    def __init__(self, dim: int, heads: int, rng: Rng, kv_dim: int | None = None):
        super().__init__()
        kv_dim = dim if kv_dim is None else kv_dim
        self.heads = heads
        self.q_proj = Linear(dim, dim, rng.spawn(0))
        self.k_proj = Linear(kv_dim, dim, rng.spawn(1))
        self.v_proj = Linear(kv_dim, dim, rng.spawn(2))
        self.out_proj = Linear(dim, dim, rng.spawn(3))

    def __call__(self, query: Tensor, kv: Tensor) -> Tensor:
        q = self.q_proj(query)
        k = self.k_proj(kv)
        v = self.v_proj(kv)
        return self.out_proj(attention(q, k, v, self.heads))


class FeedForward(Module):
    def __init__(self, dim: int, rng: Rng, expansion: int = 4):
        super().__init__()
        self.fc1 = Linear(dim, dim * expansion, rng.spawn(0))
        self.fc2 = Linear(dim * expansion, dim, rng.spawn(1))

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(gelu(self.fc1(x)))


class SelfAttentionBlock(Module):
    """Pre-LN transformer block: x + attn(ln(x)), then x + ffn(ln(x))."""

    def __init__(self, dim: int, heads: int, rng: Rng):
        super().__init__()
        self.ln1 = LayerNorm(dim)
        self.attn = MultiheadAttention(dim, heads, rng.spawn(0))
        self.ln2 = LayerNorm(dim)
        self.ffn = FeedForward(dim, rng.spawn(1))

    def __call__(self, x: Tensor) -> Tensor:
        h = self.ln1(x)
        x = x + self.attn(h, h)
        return x + self.ffn(self.ln2(x))


class CrossAttentionBlock(Module):
    """Pre-LN cross-attention: queries read a key/value sequence, then FFN."""

    def __init__(self, dim: int, heads: int, rng: Rng, kv_dim: int | None = None):
        super().__init__()
        self.ln_q = LayerNorm(dim)
        self.ln_kv = LayerNorm(dim if kv_dim is None else kv_dim)
        self.attn = MultiheadAttention(dim, heads, rng.spawn(0), kv_dim=kv_dim)
        self.ln2 = LayerNorm(dim)
        self.ffn = FeedForward(dim, rng.spawn(1))

    def __call__(self, query: Tensor, kv: Tensor) -> Tensor:
        x = query + self.attn(self.ln_q(query), self.ln_kv(kv))
        return x + self.ffn(self.ln2(x))
