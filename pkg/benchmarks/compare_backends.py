#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Renders the same synthetic scene through both pipelines on each backend,
reporting per-call wall time and the cross-backend pixel deviation (expected
to be a few float32 ulp from differing exp implementations).

    python3 benchmarks/compare_backends.py [--count 20000] [--repeats 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import tilesplat as ts


def time_render(fn, scene, cam, cfg, threads, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(scene, cam, cfg, threads=threads)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--size", type=int, default=256, help="image side, px")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    scene = ts.synth_scene(ts.SynthSpec(count=args.count, seed=args.seed,
                                        scale_range=(0.01, 0.08)))
    cam = ts.Camera.look_at(eye=(0, 0, -4), target=(0, 0, 0),
                            width=args.size, height=args.size,
                            fx=1.1 * args.size, fy=1.1 * args.size)
    base_cfg = ts.RenderConfig(tile_size=16, group_size=16,
                               pipeline=ts.Pipeline.BASELINE)
    grp_cfg = ts.RenderConfig(tile_size=16, group_size=64,
                              pipeline=ts.Pipeline.GROUPED)

    results = {}
    for backend in ("numba", "numpy"):
        try:
            ts.set_backend(backend)
        except ts.ConfigError as exc:
            print(f"{backend}: skipped ({exc})")
            continue
        if backend == "numba":  # warm the JIT outside the timed region
            ts.render_baseline(scene, cam, base_cfg, threads=args.threads)
            ts.render_grouped(scene, cam, grp_cfg, threads=args.threads)
        tb, (img_b, wc_b) = time_render(ts.render_baseline, scene, cam,
                                        base_cfg, args.threads, args.repeats)
        tg, (img_g, wc_g) = time_render(ts.render_grouped, scene, cam,
                                        grp_cfg, args.threads, args.repeats)
        lossless = np.array_equal(img_b.pixels, img_g.pixels)
        results[backend] = (tb, tg, img_b)
        print(f"{backend:>6}: baseline {tb * 1e3:9.1f} ms | grouped {tg * 1e3:9.1f} ms "
              f"| lossless={lossless} | alpha={wc_b.alpha_computations} "
              f"| sort entries {wc_b.tile_entries} -> {wc_g.group_entries}")

    if len(results) == 2:
        sb = results["numpy"][0] / results["numba"][0]
        sg = results["numpy"][1] / results["numba"][1]
        dev = float(np.abs(results["numba"][2].pixels.astype(np.float64)
                           - results["numpy"][2].pixels.astype(np.float64)).max())
        print(f"numba speedup: baseline {sb:.1f}x, grouped {sg:.1f}x; "
              f"max cross-backend pixel deviation {dev:.3g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
