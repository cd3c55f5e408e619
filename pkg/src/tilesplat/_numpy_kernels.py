"""Pure-numpy backend: vectorized fallbacks for the hot kernels.

Same signatures and semantics as the numba backend. Rasterization
vectorizes over a tile's pixels per list entry; alpha stays float32 and the
transmittance/color accumulators are float64, mirroring the scalar kernels
operation for operation.
"""

from __future__ import annotations

import numpy as np

from . import bounds
from .model import TileLayout


def assign_cells(center, radius, cov, conic, nx, ny, size, width, height,
                 method: int):
    return bounds.assign_cells_numpy(center, radius, cov, conic, nx, ny, size,
                                     width, height, method)


def bitmasks(rows, groups, center, radius, cov, conic, tile_size, per_side,
             groups_x, tiles_x, tiles_y, width, height, method: int):
    layout = TileLayout(width=width, height=height, tile_size=tile_size,
                        group_size=tile_size * per_side)
    return bounds.bitmasks_numpy(rows, groups, center, radius, cov, conic,
                                 layout, method)


def _composite_pixels(pxs, pys, order, centers, conics, opacities, colors,
                      alpha_min, t_min):
    """Blend many pixels over one ordered row list; returns f8 color sans bg.

    Matches the scalar compositor: a pixel consumes entries while its
    transmittance stays >= t_min; consumed entries always count one alpha
    computation; entries below alpha_min never touch the accumulators.
    """
    p = pxs.shape[0]
    t = np.ones(p, dtype=np.float64)
    c = np.zeros((p, 3), dtype=np.float64)
    consumed = np.zeros(p, dtype=np.int64)
    n_alpha = 0
    n_blend = 0
    alpha_min = np.float32(alpha_min)
    for gi in order:
        active = t >= t_min
        if not active.any():
            break
        dx = pxs - centers[gi, 0]
        dy = pys - centers[gi, 1]
        ca = conics[gi, 0]
        cb = conics[gi, 1]
        cc = conics[gi, 2]
        q = ca * dx * dx + np.float32(2.0) * cb * dx * dy + cc * dy * dy
        alpha = opacities[gi] * np.exp(np.float32(-0.5) * q)
        np.minimum(alpha, np.float32(0.99), out=alpha)
        n_alpha += int(active.sum())
        consumed += active
        blend = active & (alpha >= alpha_min)
        if blend.any():
            a8 = alpha[blend].astype(np.float64)
            w = a8 * t[blend]
            c[blend] += colors[gi].astype(np.float64)[None, :] * w[:, None]
            t[blend] = t[blend] * (1.0 - a8)
            n_blend += int(blend.sum())
    n_exit = int((consumed < order.shape[0]).sum())
    return c, t, n_alpha, n_blend, n_exit


def _tile_pixel_centers(x0, y0, x1, y1):
    xs = np.arange(x0, x1, dtype=np.float32) + np.float32(0.5)
    ys = np.arange(y0, y1, dtype=np.float32) + np.float32(0.5)
    gx, gy = np.meshgrid(xs, ys)
    return gx.ravel(), gy.ravel()


def _raster_span(order, x0, y0, x1, y1, centers, conics, opacities, colors,
                 alpha_min, t_min, bg, out_rgb, out_t):
    pxs, pys = _tile_pixel_centers(x0, y0, x1, y1)
    c, t, na, nb, ne = _composite_pixels(pxs, pys, order, centers, conics,
                                         opacities, colors, alpha_min, t_min)
    c = c + t[:, None] * bg[None, :]
    h = y1 - y0
    w = x1 - x0
    out_rgb[y0:y1, x0:x1] = c.reshape(h, w, 3).astype(np.float32)
    out_t[y0:y1, x0:x1] = t.reshape(h, w).astype(np.float32)
    return na, nb, ne


def raster_baseline(tile_lo, tile_hi, offsets, rows, centers, conics,
                    opacities, colors, tiles_x, tile_size, width, height,
                    alpha_min, t_min, bg, out_rgb, out_t, counters):
    for t in range(tile_lo, tile_hi):
        tx = t % tiles_x
        ty = t // tiles_x
        x0 = tx * tile_size
        y0 = ty * tile_size
        x1 = min(x0 + tile_size, width)
        y1 = min(y0 + tile_size, height)
        order = rows[offsets[t]:offsets[t + 1]]
        na, nb, ne = _raster_span(order, x0, y0, x1, y1, centers, conics,
                                  opacities, colors, alpha_min, t_min, bg,
                                  out_rgb, out_t)
        counters[t, 0] = na
        counters[t, 1] = nb
        counters[t, 2] = ne
        counters[t, 3] = 0
        counters[t, 4] = 0


def raster_grouped(tile_lo, tile_hi, g_offsets, g_rows, g_masks, groups_x,
                   per_side, tiles_x, tile_size, width, height, centers,
                   conics, opacities, colors, alpha_min, t_min, bg,
                   out_rgb, out_t, counters):
    for t in range(tile_lo, tile_hi):
        tx = t % tiles_x
        ty = t // tiles_x
        x0 = tx * tile_size
        y0 = ty * tile_size
        x1 = min(x0 + tile_size, width)
        y1 = min(y0 + tile_size, height)
        g = (ty // per_side) * groups_x + tx // per_side
        location = np.uint16(1 << ((ty % per_side) * per_side + tx % per_side))
        lo = int(g_offsets[g])
        hi = int(g_offsets[g + 1])
        hit = (g_masks[lo:hi] & location) != 0
        order = g_rows[lo:hi][hit]
        na, nb, ne = _raster_span(order, x0, y0, x1, y1, centers, conics,
                                  opacities, colors, alpha_min, t_min, bg,
                                  out_rgb, out_t)
        counters[t, 0] = na
        counters[t, 1] = nb
        counters[t, 2] = ne
        counters[t, 3] = hi - lo
        counters[t, 4] = (hi - lo) - int(hit.sum())


def brute_force(width, height, tile_size, tiles_x, tiles_y, centers, conics,
                opacities, colors, cov, radius, depth, method, alpha_min,
                t_min, bg, out_rgb, out_t):
    """Per-pixel reference path; membership re-derived for every pixel.

    The per-gaussian prefilter ranges and OBB parameters are loop
    invariants, so they are lifted out, but no per-tile list is shared:
    every pixel runs its own membership test, ordering, and blend.
    """
    cx = centers[:, 0].astype(np.float64)
    cy = centers[:, 1].astype(np.float64)
    r = radius.astype(np.float64)
    ix0 = np.maximum(np.floor((cx - r) / tile_size), 0).astype(np.int64)
    ix1 = np.minimum(np.floor((cx + r) / tile_size), tiles_x - 1).astype(np.int64)
    iy0 = np.maximum(np.floor((cy - r) / tile_size), 0).astype(np.int64)
    iy1 = np.minimum(np.floor((cy + r) / tile_size), tiles_y - 1).astype(np.int64)
    a = cov[:, 0].astype(np.float64)
    b = cov[:, 1].astype(np.float64)
    c = cov[:, 2].astype(np.float64)
    ux, uy, h1, h2 = bounds.obb_params_numpy(a, b, c)
    ca = conics[:, 0].astype(np.float64)
    cb = conics[:, 1].astype(np.float64)
    cc = conics[:, 2].astype(np.float64)
    rr = bounds.RADIUS_SCALE * bounds.RADIUS_SCALE

    for py in range(height):
        ty = py // tile_size
        pyc = np.full(1, py + 0.5, dtype=np.float32)
        for px in range(width):
            tx = px // tile_size
            cand = (ix0 <= tx) & (tx <= ix1) & (iy0 <= ty) & (ty <= iy1)
            idx = np.flatnonzero(cand)
            if idx.size:
                x0 = float(tx * tile_size)
                y0 = float(ty * tile_size)
                x1 = min(x0 + tile_size, float(width))
                y1 = min(y0 + tile_size, float(height))
                hit = bounds._hits_numpy(method, cx[idx], cy[idx], r[idx],
                                         ux[idx], uy[idx], h1[idx], h2[idx],
                                         ca[idx], cb[idx], cc[idx], rr,
                                         x0, y0, x1, y1)
                members = idx[hit]
                order = members[np.lexsort((members, depth[members]))]
            else:
                order = idx
            pxc = np.full(1, px + 0.5, dtype=np.float32)
            col, t, _, _, _ = _composite_pixels(pxc, pyc, order.astype(np.int32),
                                                centers, conics, opacities,
                                                colors, alpha_min, t_min)
            out_rgb[py, px] = (col[0] + t[0] * bg).astype(np.float32)
            out_t[py, px] = np.float32(t[0])
