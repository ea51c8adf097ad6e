"""AdamW with bias correction and decoupled weight decay."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ContractError
from .tensor import Tensor


def clip_grad_norm(params: list[Tensor], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = math.sqrt(total)
    if max_norm > 0 and norm > max_norm:
        scale = np.float32(max_norm / (norm + 1e-12))
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


class AdamW:
    """Moments live in flat buffers so the update is a handful of fused
    passes instead of per-parameter numpy calls."""

    def __init__(
        self,
        named_params: list[tuple[str, Tensor]],
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.99,
        eps: float = 1e-6,
        weight_decay: float = 0.0,
    ):
        self.named_params = list(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._slices: dict[str, slice] = {}
        offset = 0
        for name, p in self.named_params:
            self._slices[name] = slice(offset, offset + p.size)
            offset += p.size
        self._total = offset
        self._m = np.zeros(offset, np.float32)
        self._v = np.zeros(offset, np.float32)
        self._g = np.zeros(offset, np.float32)

    def step(self, lr: float | None = None) -> None:
        """Apply one update and clear gradients.

        Parameters whose grad is None are skipped (an untouched branch in
        this step); calling step when no gradient at all is populated is a
        contract violation.
        """
        if all(p.grad is None for _, p in self.named_params):
            raise ContractError("adamw step with no populated gradients; run backward first")
        lr = self.lr if lr is None else lr
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        # m_hat/(sqrt(v_hat)+eps) == scale * m/(sqrt(v)+eps*sqrt(bc2))
        scale = np.float32(lr * math.sqrt(bc2) / bc1)
        denom_eps = np.float32(self.eps * math.sqrt(bc2))
        g = self._g
        touched = np.zeros(self._total, bool)
        for name, p in self.named_params:
            if p.grad is None:
                continue
            sl = self._slices[name]
            g[sl] = p.grad.reshape(-1)
            touched[sl] = True
            p.grad = None
        # touched entries get the usual moment update; skipped entries keep
        # their state exactly (m += (1-b)(g-m) == b*m + (1-b)*g where touched)
        m, v = self._m, self._v
        m += np.float32(1.0 - self.beta1) * np.where(touched, g - m, 0.0)
        v += np.float32(1.0 - self.beta2) * np.where(touched, g * g - v, 0.0)
        update = np.sqrt(v)
        update += denom_eps
        np.divide(m, update, out=update)
        update *= scale
        update[~touched] = 0.0
        for name, p in self.named_params:
            sl = self._slices[name]
            if not touched[sl.start]:
                continue
            step_arr = update[sl].reshape(p.data.shape)
            if self.weight_decay:
                step_arr = step_arr + np.float32(lr * self.weight_decay) * p.data
            p.data -= step_arr

    def state_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {"opt.step": np.array([self.step_count], np.float32)}
        for name, p in self.named_params:
            sl = self._slices[name]
            out[f"opt.m.{name}"] = self._m[sl].reshape(p.data.shape).copy()
            out[f"opt.v.{name}"] = self._v[sl].reshape(p.data.shape).copy()
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        from ..errors import CheckpointError

        if "opt.step" not in arrays:
            raise CheckpointError("checkpoint lacks optimizer state")
        self.step_count = int(arrays["opt.step"][0])
        for name, p in self.named_params:
            sl = self._slices[name]
            for prefix, store in (("opt.m.", self._m), ("opt.v.", self._v)):
                key = prefix + name
                if key not in arrays:
                    raise CheckpointError(f"missing optimizer buffer {key!r}")
                if arrays[key].shape != p.data.shape:
                    raise CheckpointError(f"optimizer buffer shape mismatch for {key!r}")
                store[sl] = arrays[key].reshape(-1).astype(np.float32)


def lr_at_step(step: int, base_lr: float, warmup: int, total: int, cosine: bool) -> float:
    """Warmup then optional cosine anneal; constant after warmup otherwise."""
    if warmup > 0 and step < warmup:
        return base_lr * (step + 1) / warmup
    if not cosine or total <= warmup:
        return base_lr
    progress = (step - warmup) / max(1, total - warmup)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * min(1.0, progress)))
