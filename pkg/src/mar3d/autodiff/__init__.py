from .checkpoint import FORMAT_VERSION, load_checkpoint, save_checkpoint
from .nn import (
    CrossAttentionBlock,
    FeedForward,
    LayerNorm,
    Linear,
    Module,
    MultiheadAttention,
    SelfAttentionBlock,
    parameter,
    trunc_normal,
)
from .optim import AdamW, clip_grad_norm, lr_at_step
from .rng import Rng
from .tensor import (
    Tape,
    Tensor,
    add,
    attention,
    backward,
    bce_with_logits_loss,
    clamp,
    concat,
    exp,
    gather_rows,
    gelu,
    layernorm,
    linear,
    matmul,
    mean_all,
    mse_loss,
    mul,
    permute,
    reshape,
    slice_rows,
    softmax,
    sub,
    sum_all,
)

__all__ = [
    "AdamW",
    "CrossAttentionBlock",
    "FORMAT_VERSION",
    "FeedForward",
    "LayerNorm",
    "Linear",
    "Module",
    "MultiheadAttention",
    "Rng",
    "SelfAttentionBlock",
    "Tape",
    "Tensor",
    "add",
    "attention",
    "backward",
    "bce_with_logits_loss",
    "clamp",
    "clip_grad_norm",
    "concat",
    "exp",
    "gather_rows",
    "gelu",
    "layernorm",
    "linear",
    "load_checkpoint",
    "lr_at_step",
    "matmul",
    "mean_all",
    "mse_loss",
    "mul",
    "parameter",
    "permute",
    "reshape",
    "save_checkpoint",
    "slice_rows",
    "softmax",
    "sub",
    "sum_all",
    "trunc_normal",
]
