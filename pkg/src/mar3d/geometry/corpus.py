"""Procedural watertight training corpus.

Families: sphere, box, torus, capsule, plus CSG union/difference pairs.
Primitives are built as exact parametric meshes in normalized pose; CSG
shapes are extracted from an analytic SDF grid with marching cubes. Every
entry carries an analytic containment oracle in its final frame, which
the winding-number oracle must agree with away from the surface band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..autodiff.rng import Rng
from ..errors import ConfigError
from .marching import ScalarGrid, marching_cubes
from .mesh import TriangleMesh, normalize_transform

FAMILIES = ("sphere", "box", "torus", "capsule", "union", "difference")


@dataclass
class ShapeEntry:
    name: str
    family: str
    mesh: TriangleMesh
    contains: Callable[[np.ndarray], np.ndarray]  # (M, 3) -> bool (M,)
    # lower bound of each point's distance to the ideal surface, used to
    # exclude the discretization band in oracle-agreement checks
    surface_distance: Callable[[np.ndarray], np.ndarray] | None = None


# ---------------------------------------------------------------------------
# signed distance fields


def sdf_sphere(center, r):
    center = np.asarray(center, np.float64)
    return lambda p: np.linalg.norm(p - center, axis=-1) - r


def sdf_box(center, half):
    center = np.asarray(center, np.float64)
    half = np.asarray(half, np.float64)

    def f(p):
        q = np.abs(p - center) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    return f


def sdf_torus(center, major, minor):
    center = np.asarray(center, np.float64)

    def f(p):
        q = p - center
        ring = np.sqrt(q[..., 0] ** 2 + q[..., 1] ** 2) - major
        return np.sqrt(ring**2 + q[..., 2] ** 2) - minor

    return f


def sdf_capsule(center, r, half_len):
    center = np.asarray(center, np.float64)

    def f(p):
        q = p - center
        z = np.clip(q[..., 2], -half_len, half_len)
        seg = q.copy()
        seg[..., 2] -= z
        return np.linalg.norm(seg, axis=-1) - r

    return f


def sdf_union(a, b):
    return lambda p: np.minimum(a(p), b(p))


def sdf_difference(a, b):
    return lambda p: np.maximum(a(p), -b(p))


def contains_from_sdf(sdf):
    return lambda p: sdf(np.asarray(p, np.float64)) <= 0.0


def distance_from_sdfs(*sdfs):
    """min |sdf_i|: a valid lower bound on distance to any CSG of the parts."""

    def f(p):
        p = np.asarray(p, np.float64)
        return np.minimum.reduce([np.abs(s(p)) for s in sdfs])

    return f


# ---------------------------------------------------------------------------
# parametric primitive meshes


def orient_outward(mesh: TriangleMesh) -> TriangleMesh:
    """Flip all faces if the signed volume is negative."""
    a, b, c = mesh.face_corners()
    volume = np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0
    if volume < 0:
        return TriangleMesh(mesh.vertices, mesh.faces[:, ::-1])
    return mesh


def icosphere(radius: float = 0.5, subdivisions: int = 3) -> TriangleMesh:
    phi = (1 + math.sqrt(5)) / 2
    verts = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = list(verts)
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key in cache:
                return cache[key]
            m = verts[i] + verts[j]
            m /= np.linalg.norm(m)
            verts.append(m)
            cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    mesh = TriangleMesh(np.array(verts) * radius, np.array(faces, np.int32))
    return orient_outward(mesh)


def box_mesh(half) -> TriangleMesh:
    hx, hy, hz = (float(v) for v in half)
    v = np.array(
        [
            (-hx, -hy, -hz), (hx, -hy, -hz), (hx, hy, -hz), (-hx, hy, -hz),
            (-hx, -hy, hz), (hx, -hy, hz), (hx, hy, hz), (-hx, hy, hz),
        ]
    )
    quads = [
        (0, 3, 2, 1),  # -z
        (4, 5, 6, 7),  # +z
        (0, 1, 5, 4),  # -y
        (2, 3, 7, 6),  # +y
        (1, 2, 6, 5),  # +x
        (3, 0, 4, 7),  # -x
    ]
    faces = []
    for a, b, c, d in quads:
        faces += [(a, b, c), (a, c, d)]
    return orient_outward(TriangleMesh(v, np.array(faces, np.int32)))


def torus_mesh(major: float, minor: float, n_major: int = 48, n_minor: int = 24) -> TriangleMesh:
    verts = []
    for i in range(n_major):
        theta = 2 * math.pi * i / n_major
        for j in range(n_minor):
            phi = 2 * math.pi * j / n_minor
            ring = major + minor * math.cos(phi)
            verts.append((ring * math.cos(theta), ring * math.sin(theta), minor * math.sin(phi)))
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            faces += [(a, b, c), (a, c, d)]
    return orient_outward(TriangleMesh(np.array(verts), np.array(faces, np.int32)))


def capsule_mesh(r: float, half_len: float, n_seg: int = 32, n_rings: int = 8) -> TriangleMesh:
    """Cylinder of half-length `half_len` with hemispherical caps."""
    verts = [np.array([0.0, 0.0, half_len + r])]
    rings: list[list[int]] = []
    # top cap rings (from near pole down to equator), then bottom cap
    lats = [math.pi / 2 * (1 - (k + 1) / n_rings) for k in range(n_rings)]
    for lat in lats:
        ring = []
        for i in range(n_seg):
            theta = 2 * math.pi * i / n_seg
            rho = r * math.cos(lat)
            ring.append(len(verts))
            verts.append(np.array([rho * math.cos(theta), rho * math.sin(theta), half_len + r * math.sin(lat)]))
        rings.append(ring)
    for lat in reversed(lats):
        ring = []
        for i in range(n_seg):
            theta = 2 * math.pi * i / n_seg
            rho = r * math.cos(lat)
            ring.append(len(verts))
            verts.append(np.array([rho * math.cos(theta), rho * math.sin(theta), -half_len - r * math.sin(lat)]))
        rings.append(ring)
    south = len(verts)
    verts.append(np.array([0.0, 0.0, -half_len - r]))

    faces = []
    for i in range(n_seg):
        faces.append((0, rings[0][i], rings[0][(i + 1) % n_seg]))
    for ra, rb in zip(rings, rings[1:]):
        for i in range(n_seg):
            j = (i + 1) % n_seg
            faces += [(ra[i], rb[i], rb[j]), (ra[i], rb[j], ra[j])]
    last = rings[-1]
    for i in range(n_seg):
        faces.append((south, last[(i + 1) % n_seg], last[i]))
    return orient_outward(TriangleMesh(np.array(verts), np.array(faces, np.int32)))


# ---------------------------------------------------------------------------
# corpus assembly


def _csg_primitive(kind: str, rng: Rng, big: bool):
    scale = rng.uniform(None, 0.18, 0.3) if big else rng.uniform(None, 0.12, 0.22)
    offset = rng.uniform(3, -0.12, 0.12) if not big else np.zeros(3)
    if kind == "sphere":
        return sdf_sphere(offset, scale)
    if kind == "box":
        aspect = rng.uniform(3, 0.5, 1.0)
        return sdf_box(offset, scale * aspect)
    if kind == "torus":
        return sdf_torus(offset, scale, scale * rng.uniform(None, 0.3, 0.5))
    return sdf_capsule(offset, scale * 0.6, scale * rng.uniform(None, 0.6, 1.0))


def _mesh_from_sdf(sdf, bound, grid_res: int) -> tuple[TriangleMesh, Callable, Callable]:
    # smooth pseudo-occupancy keeps linear interpolation accurate
    half = 0.55
    sharp = 2.0 * (grid_res - 1) / (2 * half)  # ~2 voxels of transition

    def occ(p):
        return 1.0 / (1.0 + np.exp(np.clip(sdf(p) * sharp, -30, 30)))

    grid = ScalarGrid.from_function(occ, grid_res, half)
    mesh = marching_cubes(grid, 0.5).drop_degenerate_faces()
    center, scale = normalize_transform(mesh)
    mesh = TriangleMesh((mesh.vertices - center) * scale, mesh.faces)

    def contains(p):
        return sdf(np.asarray(p, np.float64) / scale + center) <= 0.0

    def distance(p):
        return bound(np.asarray(p, np.float64) / scale + center) * scale

    return mesh, contains, distance


def _primitive_entry(family: str, mesh: TriangleMesh, sdf) -> ShapeEntry:
    return ShapeEntry("", family, mesh, contains_from_sdf(sdf), distance_from_sdfs(sdf))


def make_shape(family: str, rng: Rng, grid_res: int = 96) -> ShapeEntry:
    if family == "sphere":
        return _primitive_entry(family, icosphere(0.5, 3), sdf_sphere((0, 0, 0), 0.5))
    if family == "box":
        hy = rng.uniform(None, 0.2, 0.5)
        hz = rng.uniform(None, 0.12, 0.4)
        half = (0.5, hy, hz)
        return _primitive_entry(family, box_mesh(half), sdf_box((0, 0, 0), half))
    if family == "torus":
        q = rng.uniform(None, 0.25, 0.45)
        minor = 0.5 * q
        major = 0.5 - minor
        return _primitive_entry(family, torus_mesh(major, minor), sdf_torus((0, 0, 0), major, minor))
    if family == "capsule":
        r = rng.uniform(None, 0.15, 0.3)
        half_len = 0.5 - r
        return _primitive_entry(family, capsule_mesh(r, half_len), sdf_capsule((0, 0, 0), r, half_len))
    if family in ("union", "difference"):
        kinds = ("sphere", "box", "capsule")
        a = _csg_primitive(kinds[int(rng.integers(0, len(kinds)))], rng.spawn(0), big=True)
        b = _csg_primitive(kinds[int(rng.integers(0, len(kinds)))], rng.spawn(1), big=False)
        sdf = sdf_union(a, b) if family == "union" else sdf_difference(a, b)
        mesh, contains, distance = _mesh_from_sdf(sdf, distance_from_sdfs(a, b), grid_res)
        return ShapeEntry("", family, mesh, contains, distance)
    raise ConfigError(f"unknown shape family {family!r}; expected one of {FAMILIES}")


def make_corpus(spec: dict[str, int], seed: int, grid_res: int = 96) -> list[ShapeEntry]:
    """Deterministic corpus; spec maps family name to instance count."""
    for family in spec:
        if family not in FAMILIES:
            raise ConfigError(f"unknown shape family {family!r}; expected one of {FAMILIES}")
    rng = Rng(seed)
    entries: list[ShapeEntry] = []
    for family in sorted(spec):
        for i in range(int(spec[family])):
            entry = make_shape(family, rng.spawn(FAMILIES.index(family), i), grid_res)
            entry.name = f"{family}_{i:03d}"
            entries.append(entry)
    return entries


def canonical_prototype(family: str) -> ShapeEntry:
    """Fixed-parameter representative used for family classification."""
    if family == "sphere":
        entry = _primitive_entry(family, icosphere(0.5, 3), sdf_sphere((0, 0, 0), 0.5))
    elif family == "box":
        half = (0.5, 0.33, 0.22)
        entry = _primitive_entry(family, box_mesh(half), sdf_box((0, 0, 0), half))
    elif family == "torus":
        entry = _primitive_entry(family, torus_mesh(0.33, 0.17), sdf_torus((0, 0, 0), 0.33, 0.17))
    elif family == "capsule":
        r = 0.22
        entry = _primitive_entry(family, capsule_mesh(r, 0.5 - r), sdf_capsule((0, 0, 0), r, 0.5 - r))
    else:
        raise ConfigError(f"no canonical prototype for family {family!r}")
    entry.name = f"proto_{family}"
    return entry
