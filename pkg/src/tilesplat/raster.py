"""Per-pixel alpha evaluation, front-to-back blending, tile rasterization.

Alpha (the quadratic-form falloff) is evaluated in float32; the running
transmittance and color accumulate in float64 and the stored image is
float32. The early exit tests transmittance *before* consuming an entry
(stop-before), so a pixel whose transmittance just crossed the threshold
never evaluates another alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backends
from .model import ALPHA_CLAMP, ProjectedGaussian, RenderConfig, TileLayout
from .preprocess import ProjectedBatch
from .sorting import SortedList


@dataclass
class ImageBuffer:
    pixels: np.ndarray              # (H, W, 3) float32 in [0, 1]
    final_transmittance: np.ndarray  # (H, W) float32

    @classmethod
    def new(cls, width: int, height: int) -> "ImageBuffer":
        return cls(pixels=np.zeros((height, width, 3), dtype=np.float32),
                   final_transmittance=np.ones((height, width), dtype=np.float32))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def alpha_at(pg: ProjectedGaussian, p) -> float:
    """Opacity-scaled gaussian falloff at pixel center p, clamped to 0.99."""
    px = np.float32(p[0])
    py = np.float32(p[1])
    dx = px - pg.center2d[0]
    dy = py - pg.center2d[1]
    ca = np.float32(pg.conic[0, 0])
    cb = np.float32(pg.conic[0, 1])
    cc = np.float32(pg.conic[1, 1])
    q = ca * dx * dx + np.float32(2.0) * cb * dx * dy + cc * dy * dy
    alpha = np.float32(pg.opacity) * np.exp(np.float32(-0.5) * q)
    return float(min(alpha, np.float32(ALPHA_CLAMP)))


def blend_pixel(contributions, background, t_min: float = 1e-4):
    """Front-to-back composite of a depth-ordered (alpha, rgb) sequence.

    Stops before the first entry whose incoming transmittance is below
    t_min. Returns (rgb including the background term, final transmittance,
    number of entries consumed). Alpha-threshold skipping happens upstream.
    """
    bg = np.asarray(background, dtype=np.float64).reshape(3)
    t = 1.0
    c = np.zeros(3, dtype=np.float64)
    processed = 0
    for alpha, rgb in contributions:
        if t < t_min:
            break
        a = float(alpha)
        c += np.asarray(rgb, dtype=np.float64) * (a * t)
        t *= 1.0 - a
        processed += 1
    return c + t * bg, t, processed


def rasterize_tile(tile_index: int, slist: SortedList, tile_location,
                   batch: ProjectedBatch, layout: TileLayout,
                   cfg: RenderConfig, out: ImageBuffer) -> dict:
    """Rasterize one tile from its sorted list into the output buffer.

    Baseline mode: tile_location is None and the list is the tile's own.
    Grouped mode: the list belongs to the enclosing group, carries masks, and
    tile_location is the tile's one-hot 16-bit position; entries are
    AND-filtered before blending. Returns the per-tile work counters.
    """
    k = backends.kernels()
    bg = np.asarray(cfg.background, dtype=np.float64).reshape(3)
    alpha_min = np.float32(cfg.alpha_min)
    t_min = float(cfg.transmittance_min)
    rows = np.searchsorted(batch.ids, slist.ids).astype(np.int32)
    counters = np.zeros((layout.n_tiles, 5), dtype=np.int64)

    if tile_location is None:
        if slist.owner != tile_index:
            raise ValueError(f"sorted list owned by tile {slist.owner}, "
                             f"asked to rasterize tile {tile_index}")
        offsets = np.zeros(layout.n_tiles + 1, dtype=np.int64)
        offsets[tile_index + 1:] = len(slist)
        k.raster_baseline(tile_index, tile_index + 1, offsets, rows,
                          batch.center, batch.conic, batch.opacity, batch.color,
                          layout.tiles_x, layout.tile_size,
                          layout.width, layout.height, alpha_min, t_min, bg,
                          out.pixels, out.final_transmittance, counters)
    else:
        if slist.owner != layout.group_of_tile(tile_index):
            raise ValueError(f"sorted list owned by group {slist.owner}, but tile "
                             f"{tile_index} lies in group {layout.group_of_tile(tile_index)}")
        if slist.masks is None:
            raise ValueError("grouped rasterization needs a masked sorted list")
        expected = 1 << layout.tile_bit(tile_index)
        if int(tile_location) != expected:
            raise ValueError(f"tile_location {int(tile_location):#06x} does not match "
                             f"tile {tile_index} (expected {expected:#06x})")
        g_offsets = np.zeros(layout.n_groups + 1, dtype=np.int64)
        g_offsets[slist.owner + 1:] = len(slist)
        k.raster_grouped(tile_index, tile_index + 1, g_offsets, rows,
                         slist.masks.astype(np.uint16), layout.groups_x,
                         layout.tiles_per_group_side, layout.tiles_x,
                         layout.tile_size, layout.width, layout.height,
                         batch.center, batch.conic, batch.opacity, batch.color,
                         alpha_min, t_min, bg,
                         out.pixels, out.final_transmittance, counters)

    row = counters[tile_index]
    return {"alpha_computations": int(row[0]), "blends": int(row[1]),
            "early_exits": int(row[2]), "mask_filter_checks": int(row[3]),
            "filtered_out": int(row[4])}
