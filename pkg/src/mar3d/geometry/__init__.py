from .corpus import FAMILIES, ShapeEntry, canonical_prototype, make_corpus, make_shape
from .marching import ScalarGrid, marching_cubes
from .mesh import (
    TriangleMesh,
    edge_use_counts,
    is_watertight,
    load_obj,
    normalize_mesh,
    random_rotation,
    rotation_y,
    rotation_z,
    save_obj,
)
from .occupancy import OccupancyBatch, occupancy, sample_occupancy_batch, winding_number
from .render import (
    ConditionImage,
    View,
    base_views,
    render_condition,
    rotation_augment,
    write_pgm,
)
from .sampling import (
    PointCloudPyramid,
    build_pyramid,
    embed_points_with_normals,
    fourier_embed,
    point_embed_dim,
    sample_surface,
)

__all__ = [
    "ConditionImage",
    "FAMILIES",
    "OccupancyBatch",
    "PointCloudPyramid",
    "ScalarGrid",
    "ShapeEntry",
    "TriangleMesh",
    "View",
    "base_views",
    "build_pyramid",
    "canonical_prototype",
    "edge_use_counts",
    "embed_points_with_normals",
    "fourier_embed",
    "is_watertight",
    "load_obj",
    "make_corpus",
    "make_shape",
    "marching_cubes",
    "normalize_mesh",
    "occupancy",
    "point_embed_dim",
    "random_rotation",
    "render_condition",
    "rotation_augment",
    "rotation_y",
    "rotation_z",
    "sample_occupancy_batch",
    "sample_surface",
    "save_obj",
    "winding_number",
    "write_pgm",
]
