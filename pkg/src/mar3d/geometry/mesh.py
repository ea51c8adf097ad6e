"""Triangle meshes: OBJ I/O, normalization, rotations, manifold checks.

Geometry is kept in f64; only network-facing buffers are f32. Meshes live
in a normalized space where the longest bounding-box axis spans 1.0, so
everything fits in [-0.5, 0.5]^3.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ParseError, ValidationError


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) f64
    faces: np.ndarray  # (F, 3) int32, CCW for outward normals

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int32).reshape(-1, 3)
        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ValidationError("face index out of range")

    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0

    def face_corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v = self.vertices
        f = self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    def face_normals(self) -> np.ndarray:
        """Unit per-face normals; zero for degenerate faces."""
        a, b, c = self.face_corners()
        n = np.cross(b - a, c - a)
        lens = np.linalg.norm(n, axis=1, keepdims=True)
        return np.divide(n, lens, out=np.zeros_like(n), where=lens > 0)

    def face_areas(self) -> np.ndarray:
        a, b, c = self.face_corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self.vertices) == 0:
            raise ValidationError("bounds of empty mesh")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def transformed(self, rotation: np.ndarray | None = None, translation=None, scale: float = 1.0) -> "TriangleMesh":
        v = self.vertices
        if rotation is not None:
            v = v @ rotation.T
        v = v * scale
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        return TriangleMesh(v, self.faces.copy())

    def drop_degenerate_faces(self, min_area: float = 1e-14) -> "TriangleMesh":
        if self.is_empty:
            return self
        keep = self.face_areas() > min_area
        return TriangleMesh(self.vertices, self.faces[keep])


def load_obj(path: str | Path) -> TriangleMesh:
    """Parse ASCII OBJ v/f records; polygonal faces are fan-triangulated."""
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ParseError("vertex needs 3 coordinates", lineno)
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError as exc:
                    raise ParseError(f"bad vertex coordinate: {exc}", lineno) from None
            elif tag == "f":
                if len(parts) < 4:
                    raise ParseError("face needs at least 3 indices", lineno)
                idx = []
                for tok in parts[1:]:
                    head = tok.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise ParseError(f"bad face index {tok!r}", lineno) from None
                    if i == 0:
                        raise ValidationError(f"line {lineno}: OBJ face indices are 1-based, got 0")
                    idx.append(i - 1 if i > 0 else len(vertices) + i)
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
            # other records (vn, vt, o, g, usemtl, ...) are ignored
    mesh = TriangleMesh(np.array(vertices, np.float64).reshape(-1, 3), np.array(faces, np.int32).reshape(-1, 3))
    return mesh


def save_obj(mesh: TriangleMesh, path: str | Path) -> None:
    lines = [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def normalize_mesh(mesh: TriangleMesh) -> TriangleMesh:
    """Center on the bounding box and scale the longest axis to 1.0."""
    if len(mesh.vertices) == 0:
        raise ValidationError("cannot normalize an empty mesh")
    lo, hi = mesh.bounds()
    center = 0.5 * (lo + hi)
    extent = float((hi - lo).max())
    if extent <= 0:
        raise ValidationError("mesh has zero extent")
    return TriangleMesh((mesh.vertices - center) / extent, mesh.faces.copy())


def normalize_transform(mesh: TriangleMesh) -> tuple[np.ndarray, float]:
    """(center, scale) such that normalized = (v - center) * scale."""
    lo, hi = mesh.bounds()
    return 0.5 * (lo + hi), 1.0 / float((hi - lo).max())


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def random_rotation(rng) -> np.ndarray:
    """Uniform random rotation via Shoemake's quaternion method."""
    u1, u2, u3 = rng.uniform(3)
    q = np.array(
        [
            np.sqrt(1 - u1) * np.sin(2 * np.pi * u2),
            np.sqrt(1 - u1) * np.cos(2 * np.pi * u2),
            np.sqrt(u1) * np.sin(2 * np.pi * u3),
            np.sqrt(u1) * np.cos(2 * np.pi * u3),
        ]
    )
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def edge_use_counts(mesh: TriangleMesh) -> dict[tuple[int, int], int]:
    counts: dict[tuple[int, int], int] = {}
    for a, b, c in mesh.faces:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            counts[key] = counts.get(key, 0) + 1
    return counts


def is_watertight(mesh: TriangleMesh) -> bool:
    """Every undirected edge is shared by exactly two faces."""
    if mesh.is_empty:
        return False
    return all(n == 2 for n in edge_use_counts(mesh).values())
