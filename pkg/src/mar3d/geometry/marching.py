"""Table-driven marching cubes over an occupancy grid."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ValidationError
from .mc_tables import CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE
from .mesh import TriangleMesh


@dataclass
class ScalarGrid:
    """R^3 occupancy probabilities on a regular lattice over world bounds."""

    values: np.ndarray  # (R, R, R), axis order (x, y, z)
    lower: np.ndarray  # (3,)
    upper: np.ndarray  # (3,)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        if self.values.ndim != 3 or len(set(self.values.shape)) != 1:
            raise ValidationError(f"grid must be cubical, got shape {self.values.shape}")

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    def lattice(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        r = self.resolution
        return tuple(np.linspace(self.lower[i], self.upper[i], r) for i in range(3))

    def voxel_size(self) -> float:
        return float((self.upper - self.lower).max() / (self.resolution - 1))

    @classmethod
    def from_function(
        cls, fn: Callable[[np.ndarray], np.ndarray], resolution: int, half_extent: float = 0.55
    ) -> "ScalarGrid":
        """Evaluate fn on the lattice; fn maps (M, 3) points to (M,) values."""
        lower = np.full(3, -half_extent)
        upper = np.full(3, half_extent)
        axes = [np.linspace(-half_extent, half_extent, resolution)] * 3
        xs, ys, zs = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=-1)
        vals = np.asarray(fn(pts), dtype=np.float64).reshape(resolution, resolution, resolution)
        return cls(vals, lower, upper)


def marching_cubes(grid: ScalarGrid, iso: float = 0.5) -> TriangleMesh:
    """Extract the iso-surface with shared vertices on lattice edges.

    Linear interpolation along crossing edges; triangles are wound so face
    normals point outward, i.e. from the high-occupancy side toward the
    low side. A constant grid yields an empty mesh.
    """
    r = grid.resolution
    if r < 2:
        raise ValidationError(f"marching cubes needs resolution >= 2, got {r}")
    vals = grid.values
    # nudge exact-iso samples off the level set so no zero-area faces appear
    eps = 1e-9 * max(1.0, float(np.abs(vals).max()))
    vals = np.where(vals == iso, iso + eps, vals)

    below = vals < iso
    n = r - 1
    case = np.zeros((n, n, n), dtype=np.int32)
    for bit, (dx, dy, dz) in enumerate(CORNER_OFFSETS):
        case |= below[dx : dx + n, dy : dy + n, dz : dz + n].astype(np.int32) << bit

    active = np.argwhere((case > 0) & (case < 255))
    if len(active) == 0:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int32))

    axes = grid.lattice()
    vert_index: dict[tuple[int, int, int, int], int] = {}
    vertices: list[np.ndarray] = []
    faces: list[tuple[int, int, int]] = []

    def edge_vertex(cx: int, cy: int, cz: int, edge: int) -> int:
        c1, c2 = EDGE_CORNERS[edge]
        o1, o2 = CORNER_OFFSETS[c1], CORNER_OFFSETS[c2]
        p1 = (cx + o1[0], cy + o1[1], cz + o1[2])
        p2 = (cx + o2[0], cy + o2[1], cz + o2[2])
        axis = 0 if p1[0] != p2[0] else (1 if p1[1] != p2[1] else 2)
        lo = p1 if p1 <= p2 else p2
        key = (lo[0], lo[1], lo[2], axis)
        idx = vert_index.get(key)
        if idx is not None:
            return idx
        v1 = vals[p1]
        v2 = vals[p2]
        t = (iso - v1) / (v2 - v1)
        pos = np.array(
            [
                axes[0][p1[0]] + t * (axes[0][p2[0]] - axes[0][p1[0]]),
                axes[1][p1[1]] + t * (axes[1][p2[1]] - axes[1][p1[1]]),
                axes[2][p1[2]] + t * (axes[2][p2[2]] - axes[2][p1[2]]),
            ]
        )
        idx = len(vertices)
        vert_index[key] = idx
        vertices.append(pos)
        return idx

    for cx, cy, cz in active:
        tri_edges = TRI_TABLE[case[cx, cy, cz]]
        for k in range(0, len(tri_edges), 3):
            i0 = edge_vertex(cx, cy, cz, tri_edges[k])
            i1 = edge_vertex(cx, cy, cz, tri_edges[k + 1])
            i2 = edge_vertex(cx, cy, cz, tri_edges[k + 2])
            faces.append((i0, i1, i2))

    return TriangleMesh(np.array(vertices), np.array(faces, np.int32))
