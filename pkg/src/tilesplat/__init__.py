"""Tile-based 3D gaussian splatting renderer with grouped-tile sorting.

Two pipelines over one deterministic total order: the conventional per-tile
pipeline and a grouped pipeline that sorts once per aligned tile group and
restricts each tile's pass with a 16-bit mask, producing bit-identical images
with far fewer sort entries. Work counters and an analytical cost model
quantify the trade-off.
"""

from .backends import active_backend, set_backend
from .bounds import (ScreenEllipse, aabb_of, bitmask_for, identify_groups,
                     identify_tiles, intersects, obb_of)
from .costmodel import CostParams, CostReport, estimate
from .model import (Boundary, Camera, ConfigError, Gaussian3D, Pipeline,
                    ProjectedGaussian, RenderConfig, TileBitmask, TileLayout,
                    group_rect, tile_rect)
from .pipeline import (WorkCounters, brute_force_reference, collect_stats,
                       render, render_baseline, render_grouped)
from .preprocess import ProjectedBatch, cull, project, project_scene, sh_to_rgb
from .raster import ImageBuffer, alpha_at, blend_pixel, rasterize_tile
from .scene_io import (SceneSource, SynthSpec, load_camera, load_ply,
                       load_scene, save_camera, save_ply, synth_scene)
from .sorting import SortedList, sort_per_group, sort_per_tile

__version__ = "0.1.0"

__all__ = [
    "Boundary", "Camera", "ConfigError", "CostParams", "CostReport",
    "Gaussian3D", "ImageBuffer", "Pipeline", "ProjectedBatch",
    "ProjectedGaussian", "RenderConfig", "SceneSource", "ScreenEllipse",
    "SortedList", "SynthSpec", "TileBitmask", "TileLayout", "WorkCounters",
    "aabb_of", "active_backend", "alpha_at", "bitmask_for", "blend_pixel",
    "brute_force_reference", "collect_stats", "cull", "estimate",
    "group_rect", "identify_groups", "identify_tiles", "intersects",
    "load_camera", "load_ply", "load_scene", "obb_of", "project",
    "project_scene", "rasterize_tile", "render", "render_baseline",
    "render_grouped", "save_camera", "save_ply", "set_backend", "sh_to_rgb",
    "sort_per_group", "sort_per_tile", "synth_scene", "tile_rect",
]
