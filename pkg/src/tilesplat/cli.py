"""Command-line front end: render, compare, sweep, stats, synth."""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from . import backends
from .costmodel import CostParams, estimate
from .images import write_image
from .model import Boundary, ConfigError, Pipeline, RenderConfig
from .pipeline import collect_stats, render
from .scene_io import (SceneParseError, SynthSpec, load_camera, load_scene,
                       save_ply, synth_scene)

CSV_VERSION = "# gs-tg-csv v1"

COUNTER_COLUMNS = [
    "pipeline", "tile_size", "group_size", "tile_bounds", "group_bounds",
    "width", "height", "alpha_min", "t_min",
    "gaussians_in", "gaussians_after_cull", "degenerate_dropped",
    "identification_tests", "tile_entries", "group_entries",
    "group_pairs_identified", "sort_ops", "alpha_computations", "blends",
    "early_exits", "mask_filter_checks", "filtered_out_entries", "pixels",
    "per_pixel_processed_mean", "per_pixel_alpha_mean",
    "tiles_per_gaussian_mean", "shared_gaussian_pct",
    "cycles_preprocess", "cycles_bitmask", "cycles_sort", "cycles_raster",
    "cycles_total", "dram_bytes", "speedup_vs_baseline",
]

STATS_COLUMNS = ["tile_size", "method", "tiles_per_gaussian_mean",
                 "shared_gaussian_pct", "per_pixel_processed_mean",
                 "per_pixel_alpha_mean", "tile_entries", "alpha_computations"]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return str(v)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as f:
        f.write(CSV_VERSION + "\n")
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])


def _parse_bg(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"--bg expects r,g,b; got {text!r}")
    return tuple(float(p) for p in parts)


def _config_from(args, suffix: str = "") -> RenderConfig:
    get = lambda name: getattr(args, name + suffix.replace("-", "_"))
    return RenderConfig(
        tile_size=get("tile_size"),
        group_size=get("group_size"),
        tile_bounds=Boundary.parse(get("tile_bounds")),
        group_bounds=Boundary.parse(get("group_bounds")),
        background=_parse_bg(args.bg),
        pipeline=Pipeline.parse(get("pipeline")),
    ).validate()


def _counter_row(cfg: RenderConfig, wc, report, speedup=None) -> dict:
    row = wc.to_dict()
    row["tile_bounds"] = cfg.tile_bounds.name.lower()
    row["group_bounds"] = (cfg.group_bounds.name.lower()
                           if cfg.pipeline is Pipeline.GROUPED else "")
    row["alpha_min"] = cfg.alpha_min
    row["t_min"] = cfg.transmittance_min
    row["cycles_preprocess"] = report.cycles_preprocess
    row["cycles_bitmask"] = report.cycles_bitmask
    row["cycles_sort"] = report.cycles_sort
    row["cycles_raster"] = report.cycles_raster
    row["cycles_total"] = report.cycles_total
    row["dram_bytes"] = report.dram_bytes
    row["speedup_vs_baseline"] = "" if speedup is None else speedup
    return row


def _add_scene_args(p):
    p.add_argument("--scene", required=True,
                   help="scene file: .ply checkpoint or .json synth spec")
    p.add_argument("--camera", required=True, help="camera JSON file")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--bg", default="0,0,0", help="background r,g,b in [0,1]")
    p.add_argument("--cost-params", default=None,
                   help="JSON file overriding accelerator cost parameters")


def _add_config_args(p, suffix: str = ""):
    # argparse maps --tile-size-a to dest tile_size_a
    p.add_argument(f"--pipeline{suffix}", default="baseline",
                   choices=["baseline", "grouped"])
    p.add_argument(f"--tile-size{suffix}", type=int, default=16)
    p.add_argument(f"--group-size{suffix}", type=int, default=64)
    p.add_argument(f"--tile-bounds{suffix}", default="ellipse",
                   choices=["aabb", "obb", "ellipse"])
    p.add_argument(f"--group-bounds{suffix}", default="ellipse",
                   choices=["aabb", "obb", "ellipse"])


def _cost_params(args) -> CostParams:
    if args.cost_params:
        return CostParams.from_json(args.cost_params)
    return CostParams()


def cmd_render(args) -> int:
    scene = load_scene(args.scene)
    cam = load_camera(args.camera)
    cfg = _config_from(args)
    t0 = time.perf_counter()
    img, wc = render(scene, cam, cfg, threads=args.threads)
    wall = time.perf_counter() - t0
    write_image(img, args.out)
    if args.counters:
        report = estimate(wc, cfg.pipeline, _cost_params(args))
        row = _counter_row(cfg, wc, report)
        columns = list(COUNTER_COLUMNS)
        if not args.no_timing:
            columns.append("wall_clock_s")
            row["wall_clock_s"] = wall
        _write_csv(args.counters, columns, [row])
    print(f"rendered {cam.width}x{cam.height} {cfg.pipeline.value} "
          f"tile={cfg.tile_size} -> {args.out} "
          f"({wc.alpha_computations} alpha computations)")
    return 0


def cmd_compare(args) -> int:
    scene = load_scene(args.scene)
    cam = load_camera(args.camera)
    cfg_a = _config_from(args, "_a")
    cfg_b = _config_from(args, "_b")
    img_a, wc_a = render(scene, cam, cfg_a, threads=args.threads)
    img_b, wc_b = render(scene, cam, cfg_b, threads=args.threads)

    diff = np.abs(img_a.pixels.astype(np.float64) - img_b.pixels.astype(np.float64))
    differing = int((diff > 0).any(axis=2).sum())
    identical = bool(np.array_equal(img_a.pixels, img_b.pixels))
    print(f"max abs channel difference: {diff.max():.9g}")
    print(f"differing pixels: {differing} of {cam.width * cam.height}")
    da, db = wc_a.to_dict(), wc_b.to_dict()
    for key in ("tile_entries", "group_entries", "sort_ops",
                "alpha_computations", "blends"):
        print(f"counter {key}: {da[key]} vs {db[key]} "
              f"(delta {db[key] - da[key]})")
    if identical:
        print("images bit-identical")
        return 0
    if args.allow_diff:
        print("images differ (allowed)")
        return 0
    print("images differ")
    return 2


def cmd_sweep(args) -> int:
    scene = load_scene(args.scene)
    cam = load_camera(args.camera)
    bounds = Boundary.parse(args.bounds)
    params = _cost_params(args)
    tile_sizes = [int(s) for s in args.tile_sizes.split(",") if s]
    combos = []
    for combo in args.combos.split(","):
        if not combo:
            continue
        try:
            tile, group = (int(v) for v in combo.split("+"))
        except ValueError:
            raise ConfigError(f"--combos entries look like 16+64; got {combo!r}")
        combos.append((tile, group))

    rows = []
    baseline_cycles = {}
    for ts in tile_sizes:
        cfg = RenderConfig(tile_size=ts, group_size=ts, tile_bounds=bounds,
                           group_bounds=bounds, background=_parse_bg(args.bg),
                           pipeline=Pipeline.BASELINE).validate()
        t0 = time.perf_counter()
        _, wc = render(scene, cam, cfg, threads=args.threads)
        wall = time.perf_counter() - t0
        report = estimate(wc, Pipeline.BASELINE, params)
        baseline_cycles[ts] = report.cycles_total
        row = _counter_row(cfg, wc, report)
        row["wall_clock_s"] = wall
        rows.append(row)
    for tile, group in combos:
        cfg = RenderConfig(tile_size=tile, group_size=group, tile_bounds=bounds,
                           group_bounds=bounds, background=_parse_bg(args.bg),
                           pipeline=Pipeline.GROUPED).validate()
        t0 = time.perf_counter()
        _, wc = render(scene, cam, cfg, threads=args.threads)
        wall = time.perf_counter() - t0
        report = estimate(wc, Pipeline.GROUPED, params)
        speedup = None
        if tile in baseline_cycles:
            speedup = baseline_cycles[tile] / report.cycles_total
        row = _counter_row(cfg, wc, report, speedup)
        row["wall_clock_s"] = wall
        rows.append(row)

    columns = list(COUNTER_COLUMNS)
    if not args.no_timing:
        columns.append("wall_clock_s")
    _write_csv(args.out, columns, rows)
    print(f"sweep wrote {len(rows)} rows -> {args.out}")
    return 0


def cmd_stats(args) -> int:
    scene = load_scene(args.scene)
    cam = load_camera(args.camera)
    tile_sizes = [int(s) for s in args.tile_sizes.split(",") if s]
    methods = [Boundary.parse(m) for m in args.methods.split(",") if m]
    rows = collect_stats(scene, cam, tile_sizes, methods, threads=args.threads)
    _write_csv(args.out, STATS_COLUMNS, rows)
    print(f"stats wrote {len(rows)} rows -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(count=args.count, extent=args.extent,
                     scale_range=(args.scale_min, args.scale_max),
                     opacity_range=(args.opacity_min, args.opacity_max),
                     seed=args.seed)
    scene = synth_scene(spec)
    save_ply(scene, args.out)
    print(f"wrote {len(scene)} gaussians -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tilesplat",
        description="Tile-based gaussian splatting renderer and work-counter "
                    "benchmark (baseline per-tile and grouped-sorting pipelines)")
    parser.add_argument("--backend", choices=["numba", "numpy"], default=None,
                        help="kernel backend (default: numba when available; "
                             "also via TILESPLAT_BACKEND)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render one image and its counters")
    _add_scene_args(p)
    _add_config_args(p)
    p.add_argument("--out", required=True, help="output image (.ppm or .png)")
    p.add_argument("--counters", default=None, help="counters CSV path")
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", help="render two configurations and diff them")
    _add_scene_args(p)
    _add_config_args(p, "-a")
    _add_config_args(p, "-b")
    p.add_argument("--allow-diff", action="store_true",
                   help="exit 0 even when images differ")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="tile-size / combo sweep to CSV")
    _add_scene_args(p)
    p.add_argument("--tile-sizes", default="8,16,32,64")
    p.add_argument("--combos", default="8+16,8+32,16+32,16+64,32+64",
                   help="grouped configs as tile+group pairs")
    p.add_argument("--bounds", default="ellipse", choices=["aabb", "obb", "ellipse"])
    p.add_argument("--out", required=True)
    p.add_argument("--no-timing", action="store_true",
                   help="omit the wall-clock column (byte-stable output)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="sharing/per-pixel statistics per tile size")
    _add_scene_args(p)
    p.add_argument("--tile-sizes", default="8,16,32,64")
    p.add_argument("--methods", default="aabb,obb,ellipse")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="generate a synthetic scene checkpoint")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--scale-min", type=float, default=0.02)
    p.add_argument("--scale-max", type=float, default=0.2)
    p.add_argument("--opacity-min", type=float, default=0.2)
    p.add_argument("--opacity-max", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.backend:
            backends.set_backend(args.backend)
        return args.func(args)
    except (ConfigError, SceneParseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
