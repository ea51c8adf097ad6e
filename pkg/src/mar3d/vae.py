"""Pyramid VAE: point-cloud pyramid in, occupancy field out.

A shared learnable query set cross-attends to each pyramid level through
its own attention layer; the per-level outputs are summed, refined by a
self-attention stack, and projected to a Gaussian posterior over latent
tokens. The decoder self-attends over tokens once per shape, then query
points cross-attend to the processed tokens for occupancy logits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import (
    AdamW,
    CrossAttentionBlock,
    LayerNorm,
    Linear,
    Module,
    MultiheadAttention,
    Rng,
    SelfAttentionBlock,
    Tape,
    Tensor,
    backward,
    bce_with_logits_loss,
    clamp,
    clip_grad_norm,
    exp,
    load_checkpoint,
    lr_at_step,
    mean_all,
    mul,
    parameter,
    save_checkpoint,
    sub,
    trunc_normal,
)
from .errors import CheckpointError, ConfigError, TrainingFault
from .geometry.mesh import TriangleMesh
from .geometry.occupancy import occupancy
from .geometry.sampling import (
    PointCloudPyramid,
    build_pyramid,
    embed_points_with_normals,
    fourier_embed,
    point_embed_dim,
)


@dataclass
class VAEConfig:
    token_count: int = 64  # paper: 256 low / 1024 high; desk: 64 / 256
    latent_channels: int = 16  # paper: 64
    width: int = 128  # paper: 768
    heads: int = 4
    encoder_layers: int = 4  # paper: 16
    decoder_layers: int = 4  # paper: 32
    levels: int = 3
    fourier_freqs: int = 6
    kl_weight: float = 1e-3
    level_sizes: tuple[int, ...] = (2048, 512, 128)  # paper: (16384, 4096, 1024)
    resolution_tag: str = "low"

    def __post_init__(self):
        if self.token_count < 1:
            raise ConfigError("token_count must be >= 1")
        if self.width % self.heads != 0:
            raise ConfigError(f"width {self.width} not divisible by heads {self.heads}")
        if len(self.level_sizes) != self.levels:
            raise ConfigError(
                f"level_sizes {self.level_sizes} does not match levels={self.levels}"
            )


@dataclass
class LatentDistribution:
    mean: Tensor  # (N, C)
    logvar: Tensor  # (N, C), clamped to [-10, 10]


@dataclass
class LatentTokenSet:
    tokens: np.ndarray  # (N, C) f32
    resolution_tag: str = "low"

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.float32)


LOGVAR_RANGE = 10.0


class PyramidVAE(Module):
    def __init__(self, config: VAEConfig, rng: Rng):
        super().__init__()
        self.config = config
        width = config.width
        in_dim = point_embed_dim(config.fourier_freqs)
        self.queries = parameter(trunc_normal(rng.spawn(0), (config.token_count, width)))
        self.level_proj = [Linear(in_dim, width, rng.spawn(1, k)) for k in range(config.levels)]
        self.level_attn = [
            MultiheadAttention(width, config.heads, rng.spawn(2, k)) for k in range(config.levels)
        ]
        self.ln_queries = LayerNorm(width)
        self.level_ln = [LayerNorm(width) for _ in range(config.levels)]
        self.encoder_blocks = [
            SelfAttentionBlock(width, config.heads, rng.spawn(3, i))
            for i in range(config.encoder_layers)
        ]
        self.encoder_norm = LayerNorm(width)
        self.to_mean = Linear(width, config.latent_channels, rng.spawn(4))
        self.to_logvar = Linear(width, config.latent_channels, rng.spawn(5))
        # start near-deterministic (std ~ 0.05): posterior means must carry
        # the shape signal from the first step or the decoder learns to
        # ignore them on small corpora
        self.to_logvar.bias.data = np.full(config.latent_channels, -6.0, np.float32)

        self.token_in = Linear(config.latent_channels, width, rng.spawn(6))
        self.decoder_blocks = [
            SelfAttentionBlock(width, config.heads, rng.spawn(7, i))
            for i in range(config.decoder_layers)
        ]
        self.decoder_norm = LayerNorm(width)
        self.query_proj = Linear(3 + 6 * config.fourier_freqs, width, rng.spawn(8))
        self.dec_cross = CrossAttentionBlock(width, config.heads, rng.spawn(9))
        self.occ_head = Linear(width, 1, rng.spawn(10))

        # register list members (Module tracks attribute assignment only)
        for k, m in enumerate(self.level_proj):
            setattr(self, f"level_proj_{k}", m)
        for k, m in enumerate(self.level_attn):
            setattr(self, f"level_attn_{k}", m)
        for k, m in enumerate(self.level_ln):
            setattr(self, f"level_ln_{k}", m)
        for i, m in enumerate(self.encoder_blocks):
            setattr(self, f"encoder_block_{i}", m)
        for i, m in enumerate(self.decoder_blocks):
            setattr(self, f"decoder_block_{i}", m)

    # -- encoder ----------------------------------------------------------

    def embed_pyramid(self, pyramid: PointCloudPyramid) -> list[np.ndarray]:
        """Per-level point embeddings; cacheable since pyramids are data."""
        if pyramid.levels != self.config.levels:
            raise ConfigError(
                f"pyramid has {pyramid.levels} levels, config expects {self.config.levels}"
            )
        return [
            embed_points_with_normals(
                pyramid.points[k], pyramid.normals[k], self.config.fourier_freqs
            )
            for k in range(self.config.levels)
        ]

    def encode(self, pyramid: PointCloudPyramid | list[np.ndarray]) -> LatentDistribution:
        embeds = self.embed_pyramid(pyramid) if isinstance(pyramid, PointCloudPyramid) else pyramid
        if len(embeds) != self.config.levels:
            raise ConfigError(
                f"got {len(embeds)} embedded levels, config expects {self.config.levels}"
            )
        q = self.ln_queries(self.queries)
        summed = None
        for k in range(self.config.levels):
            kv = self.level_ln[k](self.level_proj[k](Tensor(embeds[k])))
            out = self.level_attn[k](q, kv)
            summed = out if summed is None else summed + out
        x = self.queries + summed
        for block in self.encoder_blocks:
            x = block(x)
        x = self.encoder_norm(x)
        mean = self.to_mean(x)
        logvar = clamp(self.to_logvar(x), -LOGVAR_RANGE, LOGVAR_RANGE)
        return LatentDistribution(mean, logvar)

    def reparameterize(self, dist: LatentDistribution, rng: Rng) -> Tensor:
        eps = Tensor(rng.normal_f32(dist.mean.shape))
        std = exp(mul(dist.logvar, 0.5))
        return dist.mean + mul(std, eps)

    # -- decoder ----------------------------------------------------------

    def process_tokens(self, tokens: Tensor | np.ndarray) -> Tensor:
        """Decoder self-attention over tokens, run once per shape/batch."""
        if not isinstance(tokens, Tensor):
            tokens = Tensor(tokens)
        h = self.token_in(tokens)
        for block in self.decoder_blocks:
            h = block(h)
        return self.decoder_norm(h)

    def decode_queries(self, processed: Tensor, points: np.ndarray) -> Tensor:
        """Occupancy logits (M, 1) for query points given processed tokens."""
        emb = Tensor(fourier_embed(points, self.config.fourier_freqs).astype(np.float32))
        q = self.query_proj(emb)
        h = self.dec_cross(q, processed)
        return self.occ_head(h)

    def decode_occupancy(self, tokens: Tensor | np.ndarray, points: np.ndarray) -> Tensor:
        return self.decode_queries(self.process_tokens(tokens), points)

    def decode_grid(self, tokens: np.ndarray, resolution: int, half_extent: float = 0.55, chunk: int = 8192) -> "np.ndarray":
        """Occupancy probabilities on an R^3 lattice (inference path)."""
        processed = self.process_tokens(tokens)
        axes = [np.linspace(-half_extent, half_extent, resolution)] * 3
        xs, ys, zs = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=-1)
        out = np.empty(len(pts), dtype=np.float64)
        for start in range(0, len(pts), chunk):
            logits = self.decode_queries(processed, pts[start : start + chunk]).data[:, 0]
            out[start : start + chunk] = 1.0 / (1.0 + np.exp(-logits.astype(np.float64)))
        return out.reshape(resolution, resolution, resolution)


def vae_loss(
    logits: Tensor, labels: np.ndarray, dist: LatentDistribution, kl_weight: float
) -> tuple[Tensor, float, float]:
    """Mean BCE on occupancy logits + weighted mean KL to the unit Gaussian.

    Returns (total, bce_value, kl_value); the scalars are for curves.
    """
    targets = Tensor(np.asarray(labels, np.float32).reshape(logits.shape))
    bce = bce_with_logits_loss(logits, targets)
    # KL(N(mu, sigma^2) || N(0,1)) per element = 0.5 (mu^2 + sigma^2 - 1 - logvar)
    mu2 = mul(dist.mean, dist.mean)
    kl_elem = mul(sub(mu2 + exp(dist.logvar), dist.logvar + 1.0), 0.5)
    kl = mean_all(kl_elem)
    total = bce + mul(kl, kl_weight)
    if total.has_nonfinite():
        raise TrainingFault("NaN/Inf in VAE loss")
    return total, bce.item(), kl.item()


# ---------------------------------------------------------------------------
# training


@dataclass
class VAETrainConfig:
    steps: int = 3000
    lr: float = 1e-4  # paper trains at 1e-5; desk default is hotter
    warmup: int = 100
    cosine: bool = True
    weight_decay: float = 0.0
    clip_norm: float = 1.0
    query_batch: int = 512
    occupancy_pool: int = 20480  # fixed per-shape label pool size
    log_every: int = 25
    checkpoint_every: int = 500


@dataclass
class ShapeData:
    """Per-shape buffers precomputed before the step loop."""

    embeds: list  # cached per-level point embeddings
    points: np.ndarray
    labels: np.ndarray


def prepare_shape_data(
    mesh: TriangleMesh, config: VAEConfig, train: VAETrainConfig, rng: Rng, contains=None
) -> ShapeData:
    from .geometry.occupancy import sample_occupancy_batch

    pyramid = build_pyramid(mesh, config.level_sizes, rng.spawn(0))
    embeds = [
        embed_points_with_normals(pyramid.points[k], pyramid.normals[k], config.fourier_freqs)
        for k in range(config.levels)
    ]
    batch = sample_occupancy_batch(mesh, train.occupancy_pool, rng.spawn(1), contains=contains)
    return ShapeData(embeds, batch.points, batch.labels)


@dataclass
class CurveRow:
    step: int
    bce: float
    kl: float
    total: float


def train_vae(
    shapes: list,
    config: VAEConfig,
    train: VAETrainConfig,
    seed: int,
    checkpoint_path=None,
    resume: bool = False,
    progress=None,
) -> tuple[PyramidVAE, list[CurveRow]]:
    """Train on a list of ShapeData (or ShapeEntry, converted here).

    One shape per step: encode pyramid, reparameterize, decode a label
    minibatch, BCE+KL, AdamW. All randomness is derived from (seed, step),
    so an interrupted run resumed from a checkpoint replays identically.
    """
    from .geometry.corpus import ShapeEntry

    if not shapes:
        raise ConfigError("train_vae needs a non-empty corpus")
    rng = Rng(seed)
    data: list[ShapeData] = []
    for i, shape in enumerate(shapes):
        if isinstance(shape, ShapeEntry):
            data.append(prepare_shape_data(shape.mesh, config, train, rng.spawn(100, i), shape.contains))
        elif isinstance(shape, TriangleMesh):
            data.append(prepare_shape_data(shape, config, train, rng.spawn(100, i)))
        else:
            data.append(shape)

    model = PyramidVAE(config, rng.spawn(0))
    opt = AdamW(
        model.named_parameters(), lr=train.lr, weight_decay=train.weight_decay
    )
    start_step = 0
    curve: list[CurveRow] = []
    if resume and checkpoint_path is not None:
        import os

        if os.path.exists(checkpoint_path):
            arrays = load_checkpoint(checkpoint_path)
            model.load_state_arrays(arrays, prefix="param.")
            opt.load_state_arrays(arrays)
            start_step = int(arrays["meta.step"][0])

    def save(step: int) -> None:
        if checkpoint_path is None:
            return
        arrays = {f"param.{k}": v for k, v in model.state_arrays().items()}
        arrays.update(opt.state_arrays())
        arrays.update(vae_meta_arrays(config))
        arrays["meta.step"] = np.array([step], np.float32)
        stats = latent_statistics(model, data)
        arrays["latent.mean"] = stats[0]
        arrays["latent.std"] = stats[1]
        save_checkpoint(checkpoint_path, arrays)

    for step in range(start_step, train.steps):
        step_rng = rng.spawn(1, step)
        shape = data[int(step_rng.integers(0, len(data)))]
        sel = step_rng.spawn(0).choice(len(shape.points), train.query_batch, replace=False)
        pts = shape.points[sel]
        labels = shape.labels[sel]
        tape = Tape()
        with tape:
            dist = model.encode(shape.embeds)
            tokens = model.reparameterize(dist, step_rng.spawn(1))
            logits = model.decode_occupancy(tokens, pts)
            total, bce_val, kl_val = vae_loss(logits, labels, dist, config.kl_weight)
        backward(total, tape)
        clip_grad_norm(model.parameters(), train.clip_norm)
        opt.step(lr=lr_at_step(step, train.lr, train.warmup, train.steps, train.cosine))
        if step % train.log_every == 0 or step == train.steps - 1:
            curve.append(CurveRow(step, bce_val, kl_val, total.item()))
            if progress is not None:
                progress(step, total.item())
        if train.checkpoint_every and (step + 1) % train.checkpoint_every == 0:
            save(step + 1)
    save(train.steps)
    return model, curve


def latent_statistics(model: PyramidVAE, data: list[ShapeData]) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean/std of posterior means over the corpus."""
    all_tokens = []
    for shape in data:
        dist = model.encode(shape.embeds)
        all_tokens.append(dist.mean.data)
    stacked = np.concatenate(all_tokens, axis=0)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std = np.maximum(std, 1e-4)
    return mean.astype(np.float32), std.astype(np.float32)


def vae_meta_arrays(config: VAEConfig) -> dict[str, np.ndarray]:
    return {
        "meta.token_count": np.array([config.token_count], np.float32),
        "meta.latent_channels": np.array([config.latent_channels], np.float32),
        "meta.width": np.array([config.width], np.float32),
        "meta.heads": np.array([config.heads], np.float32),
        "meta.encoder_layers": np.array([config.encoder_layers], np.float32),
        "meta.decoder_layers": np.array([config.decoder_layers], np.float32),
        "meta.levels": np.array([config.levels], np.float32),
        "meta.fourier_freqs": np.array([config.fourier_freqs], np.float32),
        "meta.is_high": np.array([1.0 if config.resolution_tag == "high" else 0.0], np.float32),
    }


def load_vae(path, level_sizes: tuple[int, ...] | None = None) -> tuple[PyramidVAE, np.ndarray, np.ndarray]:
    """Rebuild a VAE from a checkpoint; returns (model, latent_mean, latent_std)."""
    arrays = load_checkpoint(path)
    required = ("meta.token_count", "meta.width", "latent.mean", "latent.std")
    for key in required:
        if key not in arrays:
            raise CheckpointError(f"{path}: not a VAE checkpoint (missing {key})")
    levels = int(arrays["meta.levels"][0])
    config = VAEConfig(
        token_count=int(arrays["meta.token_count"][0]),
        latent_channels=int(arrays["meta.latent_channels"][0]),
        width=int(arrays["meta.width"][0]),
        heads=int(arrays["meta.heads"][0]),
        encoder_layers=int(arrays["meta.encoder_layers"][0]),
        decoder_layers=int(arrays["meta.decoder_layers"][0]),
        levels=levels,
        fourier_freqs=int(arrays["meta.fourier_freqs"][0]),
        level_sizes=tuple(level_sizes) if level_sizes else default_level_sizes(levels),
        resolution_tag="high" if arrays["meta.is_high"][0] > 0.5 else "low",
    )
    model = PyramidVAE(config, Rng(0))
    model.load_state_arrays(arrays, prefix="param.")
    return model, arrays["latent.mean"], arrays["latent.std"]


def default_level_sizes(levels: int, finest: int = 2048) -> tuple[int, ...]:
    return tuple(finest // (4**k) for k in range(levels))


# ---------------------------------------------------------------------------
# reconstruction


def encode_tokens(model: PyramidVAE, mesh: TriangleMesh, rng: Rng) -> LatentTokenSet:
    """Posterior mean tokens for a mesh (no sampling)."""
    pyramid = build_pyramid(mesh, model.config.level_sizes, rng)
    dist = model.encode(pyramid)
    return LatentTokenSet(dist.mean.data, model.config.resolution_tag)


def reconstruct_mesh(
    mesh: TriangleMesh,
    model: PyramidVAE,
    rng: Rng,
    grid_resolution: int = 64,
    iou_points: int = 100_000,
    contains=None,
) -> tuple[TriangleMesh, float]:
    """Encode (mean), decode a grid, extract the surface; IoU vs the oracle.

    IoU is measured at uniform points: decoder probability > 0.5 against
    the mesh's occupancy oracle (analytic `contains` when available).
    """
    from .geometry.marching import ScalarGrid, marching_cubes

    tokens = encode_tokens(model, mesh, rng.spawn(0))
    probs = model.decode_grid(tokens.tokens, grid_resolution)
    grid = ScalarGrid(probs, np.full(3, -0.55), np.full(3, 0.55))
    recon = marching_cubes(grid, 0.5)

    pts = rng.spawn(1).uniform((iou_points, 3), -0.55, 0.55)
    processed = model.process_tokens(tokens.tokens)
    pred = np.empty(iou_points, dtype=bool)
    chunk = 8192
    for start in range(0, iou_points, chunk):
        logits = model.decode_queries(processed, pts[start : start + chunk]).data[:, 0]
        pred[start : start + chunk] = logits > 0.0
    truth = contains(pts).astype(bool) if contains is not None else occupancy(mesh, pts).astype(bool)
    union = (pred | truth).sum()
    iou = float((pred & truth).sum() / union) if union else 1.0
    return recon, iou
