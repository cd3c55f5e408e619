"""End-to-end rendering pipelines and work-counter instrumentation.

Both pipelines share preprocessing, the (depth, id) total order, and the
per-pixel blend kernels; the grouped pipeline sorts once per group and lets a
16-bit mask restrict each tile's pass over the group list. With matching
boundary methods the restricted sequences equal the baseline per-tile lists
element for element, so the two pipelines produce bit-identical images.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from . import backends
from .model import Boundary, Camera, ConfigError, Pipeline, RenderConfig, TileLayout
from .preprocess import ProjectedBatch, project_scene
from .raster import ImageBuffer
from .scene_io import SceneSource
from .sorting import CellLists


@dataclass
class WorkCounters:
    """Instrumentation record for one render (all totals, means derived)."""

    pipeline: str = "baseline"
    tile_size: int = 0
    group_size: int = 0
    tiles_per_group: int = 0
    width: int = 0
    height: int = 0
    pixels: int = 0
    gaussians_in: int = 0
    gaussians_after_cull: int = 0
    degenerate_dropped: int = 0
    identification_tests: int = 0
    tile_entries: int = 0
    group_entries: int = 0
    group_pairs_identified: int = 0
    sort_ops: float = 0.0
    alpha_computations: int = 0
    blends: int = 0
    early_exits: int = 0
    mask_filter_checks: int = 0
    filtered_out_entries: int = 0
    per_pixel_processed_mean: float = 0.0
    per_pixel_alpha_mean: float = 0.0
    tiles_per_gaussian_mean: float = 0.0
    shared_gaussian_pct: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _tile_pixel_counts(layout: TileLayout) -> np.ndarray:
    tx = np.arange(layout.tiles_x)
    ty = np.arange(layout.tiles_y)
    w = np.minimum((tx + 1) * layout.tile_size, layout.width) - tx * layout.tile_size
    h = np.minimum((ty + 1) * layout.tile_size, layout.height) - ty * layout.tile_size
    return (h[:, None] * w[None, :]).ravel()


def _sharing_stats(per_gaussian_tiles: np.ndarray):
    assigned = per_gaussian_tiles[per_gaussian_tiles > 0]
    if assigned.size == 0:
        return 0.0, 0.0
    mean = float(assigned.sum() / assigned.size)
    shared = float(100.0 * (assigned >= 2).sum() / assigned.size)
    return mean, shared


def _raster_tiles(kernel, args, n_tiles: int, threads: int):
    """Run a tile-range kernel over [0, n_tiles) on one or more threads.

    Tiles write disjoint buffer regions and per-tile counter rows, so any
    partition produces identical results.
    """
    if threads <= 1 or n_tiles == 1:
        kernel(0, n_tiles, *args)
        return
    bounds_ = np.linspace(0, n_tiles, min(threads, n_tiles) + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(kernel, int(lo), int(hi), *args)
                for lo, hi in zip(bounds_[:-1], bounds_[1:]) if hi > lo]
        for f in futs:
            f.result()


def _common_counters(cfg: RenderConfig, layout: TileLayout,
                     batch: ProjectedBatch) -> WorkCounters:
    return WorkCounters(
        pipeline=cfg.pipeline.value,
        tile_size=cfg.tile_size,
        group_size=cfg.group_size if cfg.pipeline is Pipeline.GROUPED else 0,
        tiles_per_group=(layout.tiles_per_group_side ** 2
                         if cfg.pipeline is Pipeline.GROUPED else 0),
        width=layout.width, height=layout.height,
        pixels=layout.width * layout.height,
        gaussians_in=batch.n_input,
        gaussians_after_cull=len(batch),
        degenerate_dropped=batch.n_degenerate,
    )


def render_baseline(scene: SceneSource, cam: Camera, cfg: RenderConfig,
                    threads: int = 1):
    """Conventional per-tile pipeline: identify, sort, rasterize per tile."""
    cfg.validate()
    if cfg.pipeline is not Pipeline.BASELINE:
        raise ConfigError("render_baseline requires cfg.pipeline = BASELINE")
    layout = TileLayout(width=cam.width, height=cam.height,
                        tile_size=cfg.tile_size, group_size=cfg.tile_size)
    k = backends.kernels()
    batch = project_scene(scene, cam)

    rows, cells, n_tests = k.assign_cells(
        batch.center, batch.radius, batch.cov, batch.conic,
        layout.tiles_x, layout.tiles_y, cfg.tile_size,
        cam.width, cam.height, int(cfg.tile_bounds))
    lists = _sorted_cells(rows, cells, batch, layout.n_tiles)

    img = ImageBuffer.new(cam.width, cam.height)
    counters_arr = np.zeros((layout.n_tiles, 5), dtype=np.int64)
    _raster_tiles(
        k.raster_baseline,
        (lists.offsets, lists.rows, batch.center, batch.conic, batch.opacity,
         batch.color, layout.tiles_x, cfg.tile_size, cam.width, cam.height,
         np.float32(cfg.alpha_min), float(cfg.transmittance_min),
         np.asarray(cfg.background, dtype=np.float64),
         img.pixels, img.final_transmittance, counters_arr),
        layout.n_tiles, threads)

    wc = _common_counters(cfg, layout, batch)
    wc.identification_tests = int(n_tests)
    wc.tile_entries = lists.total_entries
    wc.sort_ops = lists.sort_ops()
    wc.alpha_computations = int(counters_arr[:, 0].sum())
    wc.blends = int(counters_arr[:, 1].sum())
    wc.early_exits = int(counters_arr[:, 2].sum())
    per_gaussian = np.bincount(rows, minlength=len(batch)) if len(batch) else \
        np.zeros(0, dtype=np.int64)
    wc.tiles_per_gaussian_mean, wc.shared_gaussian_pct = _sharing_stats(per_gaussian)
    npix = _tile_pixel_counts(layout)
    lens = np.diff(lists.offsets)
    wc.per_pixel_processed_mean = float((lens * npix).sum() / wc.pixels)
    wc.per_pixel_alpha_mean = wc.alpha_computations / wc.pixels
    return img, wc


def _sorted_cells(rows, cells, batch: ProjectedBatch, n_cells: int,
                  masks=None) -> CellLists:
    from .sorting import sort_cells
    return sort_cells(rows, cells, batch.depth, n_cells, masks)


def render_grouped(scene: SceneSource, cam: Camera, cfg: RenderConfig,
                   threads: int = 1):
    """Tile-grouping pipeline: group-level sort shared by tiles via bitmasks."""
    cfg.validate()
    if cfg.pipeline is not Pipeline.GROUPED:
        raise ConfigError("render_grouped requires cfg.pipeline = GROUPED")
    layout = TileLayout(width=cam.width, height=cam.height,
                        tile_size=cfg.tile_size, group_size=cfg.group_size)
    k = backends.kernels()
    batch = project_scene(scene, cam)

    g_rows, g_cells, n_tests = k.assign_cells(
        batch.center, batch.radius, batch.cov, batch.conic,
        layout.groups_x, layout.groups_y, cfg.group_size,
        cam.width, cam.height, int(cfg.group_bounds))

    # Bitmask generation and the group-order sort are independent given the
    # (gaussian, group) pairs; with spare workers they run concurrently.
    # Dropping zero masks after the stable sort equals dropping before it.
    def make_masks():
        return k.bitmasks(g_rows, g_cells, batch.center, batch.radius,
                          batch.cov, batch.conic, cfg.tile_size,
                          layout.tiles_per_group_side, layout.groups_x,
                          layout.tiles_x, layout.tiles_y,
                          cam.width, cam.height, int(cfg.tile_bounds))

    def make_order():
        return np.lexsort((g_rows, batch.depth[g_rows], g_cells))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            mask_fut = pool.submit(make_masks)
            order = make_order()
            masks = mask_fut.result()
    else:
        masks = make_masks()
        order = make_order()

    rows_s = g_rows[order]
    cells_s = g_cells[order]
    masks_s = masks[order]
    keep = masks_s != 0
    rows_s, cells_s, masks_s = rows_s[keep], cells_s[keep], masks_s[keep]
    offsets = np.zeros(layout.n_groups + 1, dtype=np.int64)
    np.add.at(offsets, cells_s + 1, 1)
    np.cumsum(offsets, out=offsets)
    lists = CellLists(n_cells=layout.n_groups, offsets=offsets,
                      rows=rows_s.astype(np.int32), masks=masks_s)

    img = ImageBuffer.new(cam.width, cam.height)
    counters_arr = np.zeros((layout.n_tiles, 5), dtype=np.int64)
    _raster_tiles(
        k.raster_grouped,
        (lists.offsets, lists.rows, lists.masks, layout.groups_x,
         layout.tiles_per_group_side, layout.tiles_x, cfg.tile_size,
         cam.width, cam.height, batch.center, batch.conic, batch.opacity,
         batch.color, np.float32(cfg.alpha_min),
         float(cfg.transmittance_min),
         np.asarray(cfg.background, dtype=np.float64),
         img.pixels, img.final_transmittance, counters_arr),
        layout.n_tiles, threads)

    wc = _common_counters(cfg, layout, batch)
    wc.identification_tests = int(n_tests)
    wc.group_pairs_identified = int(g_rows.shape[0])
    wc.group_entries = lists.total_entries
    wc.sort_ops = lists.sort_ops()
    wc.alpha_computations = int(counters_arr[:, 0].sum())
    wc.blends = int(counters_arr[:, 1].sum())
    wc.early_exits = int(counters_arr[:, 2].sum())
    wc.mask_filter_checks = int(counters_arr[:, 3].sum())
    wc.filtered_out_entries = int(counters_arr[:, 4].sum())

    # derived tile-level statistics from the mask popcounts
    popcounts = np.bitwise_count(masks_s.astype(np.uint16)).astype(np.int64)
    wc.tile_entries = int(popcounts.sum())
    per_gaussian = np.zeros(len(batch), dtype=np.int64)
    np.add.at(per_gaussian, rows_s, popcounts)
    wc.tiles_per_gaussian_mean, wc.shared_gaussian_pct = _sharing_stats(per_gaussian)
    npix = _tile_pixel_counts(layout)
    tile_lens = counters_arr[:, 3] - counters_arr[:, 4]
    wc.per_pixel_processed_mean = float((tile_lens * npix).sum() / wc.pixels)
    wc.per_pixel_alpha_mean = wc.alpha_computations / wc.pixels
    return img, wc


def render(scene: SceneSource, cam: Camera, cfg: RenderConfig, threads: int = 1):
    if cfg.pipeline is Pipeline.GROUPED:
        return render_grouped(scene, cam, cfg, threads)
    return render_baseline(scene, cam, cfg, threads)


def brute_force_reference(scene: SceneSource, cam: Camera,
                          cfg: RenderConfig) -> ImageBuffer:
    """Per-pixel oracle renderer: no shared lists, no group machinery.

    Each pixel independently gathers the Gaussians whose influence region
    covers its tile, orders them by (depth, id), and blends with the same
    alpha/early-exit rules as the pipelines. Intended for small frames.
    """
    layout = TileLayout(width=cam.width, height=cam.height,
                        tile_size=cfg.tile_size, group_size=cfg.tile_size)
    k = backends.kernels()
    batch = project_scene(scene, cam)
    img = ImageBuffer.new(cam.width, cam.height)
    k.brute_force(cam.width, cam.height, cfg.tile_size,
                  layout.tiles_x, layout.tiles_y,
                  batch.center, batch.conic, batch.opacity, batch.color,
                  batch.cov, batch.radius, batch.depth, int(cfg.tile_bounds),
                  np.float32(cfg.alpha_min), float(cfg.transmittance_min),
                  np.asarray(cfg.background, dtype=np.float64),
                  img.pixels, img.final_transmittance)
    return img


def collect_stats(scene: SceneSource, cam: Camera,
                  tile_sizes: Iterable[int] = (8, 16, 32, 64),
                  methods: Iterable[Boundary] = tuple(Boundary),
                  threads: int = 1) -> list:
    """Per (tile_size, method) sharing and per-pixel load statistics."""
    out = []
    for method in methods:
        method = Boundary(method)
        for ts in tile_sizes:
            cfg = RenderConfig(tile_size=ts, group_size=ts,
                               tile_bounds=method, group_bounds=method,
                               pipeline=Pipeline.BASELINE)
            _, wc = render_baseline(scene, cam, cfg, threads)
            out.append({
                "tile_size": ts,
                "method": method.name,
                "tiles_per_gaussian_mean": wc.tiles_per_gaussian_mean,
                "shared_gaussian_pct": wc.shared_gaussian_pct,
                "per_pixel_processed_mean": wc.per_pixel_processed_mean,
                "per_pixel_alpha_mean": wc.per_pixel_alpha_mean,
                "tile_entries": wc.tile_entries,
                "alpha_computations": wc.alpha_computations,
            })
    return out
