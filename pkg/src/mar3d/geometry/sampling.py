"""Surface sampling, the multi-resolution point pyramid, and positional embedding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff.rng import Rng
from ..errors import ValidationError
from .mesh import TriangleMesh


@dataclass
class PointCloudPyramid:
    """K levels of surface samples with normals, finest level first."""

    points: list[np.ndarray]  # each (N_k, 3)
    normals: list[np.ndarray]  # each (N_k, 3), unit length

    @property
    def levels(self) -> int:
        return len(self.points)

    def level_sizes(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.points)


def sample_surface(mesh: TriangleMesh, n: int, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    """Area-weighted uniform surface samples with per-sample face normals."""
    if n < 1:
        raise ValidationError(f"sample_surface needs n >= 1, got {n}")
    areas = mesh.face_areas()
    total = areas.sum()
    if total <= 0:
        raise ValidationError("mesh has zero surface area")
    probs = areas / total
    face_idx = rng.choice(len(areas), size=n, p=probs)
    a, b, c = mesh.face_corners()
    a, b, c = a[face_idx], b[face_idx], c[face_idx]
    # uniform barycentric coordinates via the sqrt trick
    u1 = rng.uniform(n)
    u2 = rng.uniform(n)
    s = np.sqrt(u1)[:, None]
    points = (1 - s) * a + s * (1 - u2[:, None]) * b + s * u2[:, None] * c
    normals = mesh.face_normals()[face_idx]
    return points, normals


def build_pyramid(mesh: TriangleMesh, level_sizes: tuple[int, ...], rng: Rng) -> PointCloudPyramid:
    """Independent fresh samples per level; sizes must strictly decrease."""
    sizes = tuple(int(s) for s in level_sizes)
    if any(b >= a for a, b in zip(sizes, sizes[1:])):
        raise ValidationError(f"pyramid level sizes must strictly decrease, got {sizes}")
    points, normals = [], []
    for k, size in enumerate(sizes):
        p, nrm = sample_surface(mesh, size, rng.spawn(k))
        points.append(p)
        normals.append(nrm)
    return PointCloudPyramid(points, normals)


def fourier_embed(x: np.ndarray, freqs: int) -> np.ndarray:
    """NeRF-style embedding: [x, sin(2^j pi x), cos(2^j pi x)] per coordinate.

    Input (..., 3) maps to (..., 3 + 6*freqs); per coordinate the sin/cos
    pairs are interleaved frequency by frequency.
    """
    x = np.asarray(x, dtype=np.float64)
    parts = [x]
    for axis in range(x.shape[-1]):
        coord = x[..., axis : axis + 1]
        for j in range(freqs):
            arg = (2.0**j) * np.pi * coord
            parts.append(np.sin(arg))
            parts.append(np.cos(arg))
    return np.concatenate(parts, axis=-1)


def embed_points_with_normals(points: np.ndarray, normals: np.ndarray, freqs: int) -> np.ndarray:
    """Per-level point embedding: positional features concatenated with normals."""
    return np.concatenate([fourier_embed(points, freqs), normals], axis=-1).astype(np.float32)


def point_embed_dim(freqs: int) -> int:
    return 3 + 6 * freqs + 3
