"""Orthographic silhouette + depth condition images.

Views are realized by rotating the mesh into a canonical camera frame
(camera on +x looking at the origin, up = +z) and rasterizing, so a view
at azimuth theta and the same mesh pre-rotated by -theta go through
bit-identical arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff.rng import Rng
from .mesh import TriangleMesh, random_rotation, rotation_y, rotation_z

# world units covered by the image frame; a normalized mesh spans at most 1.0
FRAME_EXTENT = 1.1
# depth window along the view axis, wide enough for the frame's diagonal
DEPTH_HALF_RANGE = 0.96


@dataclass
class View:
    azimuth: float = 0.0  # radians about +z
    elevation: float = 0.0  # radians above the xy-plane

    def rotation(self) -> np.ndarray:
        """World-to-camera rotation for this view."""
        return rotation_y(self.elevation) @ rotation_z(-self.azimuth)


@dataclass
class ConditionImage:
    silhouette: np.ndarray  # (H, W) in {0, 1}
    depth: np.ndarray  # (H, W) in [0, 1], 0 outside the silhouette
    view: View = field(default_factory=View)

    @property
    def resolution(self) -> tuple[int, int]:
        return self.silhouette.shape

    def channels(self) -> np.ndarray:
        """(H, W, 2) f32 stack used by the condition encoder."""
        return np.stack([self.silhouette, self.depth], axis=-1).astype(np.float32)


def render_condition(mesh: TriangleMesh, view: View, resolution: int = 64) -> ConditionImage:
    """Rasterize silhouette and nearest-hit depth for an orthographic view."""
    cam = mesh.transformed(rotation=view.rotation())
    sil, depth = _rasterize_canonical(cam, resolution)
    return ConditionImage(sil, depth, view)


def _rasterize_canonical(mesh: TriangleMesh, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    # Canonical camera: orthographic rays along -x. Image u axis = +y
    # (right), v axis = +z (up); row 0 is the top of the image.
    w = h = resolution
    sil = np.zeros((h, w), dtype=np.float32)
    # x-coordinate of the nearest hit per pixel (camera side = large x)
    xbuf = np.full((h, w), -np.inf, dtype=np.float64)
    if mesh.is_empty:
        return sil, np.zeros((h, w), dtype=np.float32)

    px = FRAME_EXTENT / w
    us = (np.arange(w) + 0.5) * px - FRAME_EXTENT / 2.0  # left -> right
    vs = FRAME_EXTENT / 2.0 - (np.arange(h) + 0.5) * px  # top -> bottom

    a, b, c = mesh.face_corners()
    # projected 2D coordinates (u = y, v = z); depth attribute is x
    for k in range(len(mesh.faces)):
        tri2 = np.array([[a[k][1], a[k][2]], [b[k][1], b[k][2]], [c[k][1], c[k][2]]])
        trix = np.array([a[k][0], b[k][0], c[k][0]])
        d = (tri2[1][0] - tri2[0][0]) * (tri2[2][1] - tri2[0][1]) - (
            tri2[2][0] - tri2[0][0]
        ) * (tri2[1][1] - tri2[0][1])
        if d == 0.0:
            continue  # edge-on triangle, zero coverage
        lo_u = max(0, int(np.floor((tri2[:, 0].min() + FRAME_EXTENT / 2) / px - 0.5)))
        hi_u = min(w - 1, int(np.ceil((tri2[:, 0].max() + FRAME_EXTENT / 2) / px - 0.5)))
        lo_v = max(0, int(np.floor((FRAME_EXTENT / 2 - tri2[:, 1].max()) / px - 0.5)))
        hi_v = min(h - 1, int(np.ceil((FRAME_EXTENT / 2 - tri2[:, 1].min()) / px - 0.5)))
        if lo_u > hi_u or lo_v > hi_v:
            continue
        uu = us[lo_u : hi_u + 1][None, :]
        vv = vs[lo_v : hi_v + 1][:, None]
        w0 = ((tri2[1][0] - uu) * (tri2[2][1] - vv) - (tri2[2][0] - uu) * (tri2[1][1] - vv)) / d
        w1 = ((tri2[2][0] - uu) * (tri2[0][1] - vv) - (tri2[0][0] - uu) * (tri2[2][1] - vv)) / d
        w2 = 1.0 - w0 - w1
        cover = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not cover.any():
            continue
        x_hit = w0 * trix[0] + w1 * trix[1] + w2 * trix[2]
        block = xbuf[lo_v : hi_v + 1, lo_u : hi_u + 1]
        better = cover & (x_hit > block)
        block[better] = x_hit[better]
        sil[lo_v : hi_v + 1, lo_u : hi_u + 1][better] = 1.0

    hit = np.isfinite(xbuf)
    depth = np.zeros((h, w), dtype=np.float32)
    # nearest surface has the largest x; map to [0, 1] with 0 = closest
    depth[hit] = np.clip((DEPTH_HALF_RANGE - xbuf[hit]) / (2 * DEPTH_HALF_RANGE), 0.0, 1.0)
    return sil, depth


def base_views(count: int = 8, elevation: float = 0.0) -> list[View]:
    """Azimuths uniformly covering the full circle."""
    return [View(azimuth=2 * math.pi * i / count, elevation=elevation) for i in range(count)]


def rotation_augment(
    mesh: TriangleMesh,
    rng: Rng,
    n_base: int = 8,
    rots_per_view: int = 6,
    resolution: int = 64,
) -> list[tuple[TriangleMesh, ConditionImage]]:
    """Base views plus random rotations, each paired with the mesh pose
    that reproduces its image from the canonical camera."""
    pairs: list[tuple[TriangleMesh, ConditionImage]] = []
    for i, view in enumerate(base_views(n_base)):
        rotated = mesh.transformed(rotation=view.rotation())
        pairs.append((rotated, render_condition(rotated, View(), resolution)))
        for j in range(rots_per_view):
            rot = random_rotation(rng.spawn(i, j)) @ view.rotation()
            rotated = mesh.transformed(rotation=rot)
            pairs.append((rotated, render_condition(rotated, View(), resolution)))
    return pairs


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Dump a [0, 1] image as an 8-bit binary PGM for quick inspection."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    data = (arr * 255).round().astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())
