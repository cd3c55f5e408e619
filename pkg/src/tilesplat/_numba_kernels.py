"""Numba backend: scalar-loop kernels for the hot stages.

The geometric predicates are njit-compiled from bounds.py so both the
record-level operations and these kernels run the exact same code. All
kernels release the GIL; tiles write disjoint image regions and their own
counter rows, so any tile partition across threads yields identical output.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import bounds

_F4_HALF = np.float32(0.5)
_F4_NEGHALF = np.float32(-0.5)
_F4_TWO = np.float32(2.0)
_F4_CLAMP = np.float32(0.99)
_RADIUS_SCALE = float(bounds.RADIUS_SCALE)
_RR = _RADIUS_SCALE * _RADIUS_SCALE

_eig2x2 = njit(cache=True, nogil=True)(bounds.eig2x2)
_aabb_hits = njit(cache=True, nogil=True)(bounds.aabb_hits_rect)
_obb_hits = njit(cache=True, nogil=True)(bounds.obb_hits_rect)
_ellipse_hits = njit(cache=True, nogil=True)(bounds.ellipse_hits_rect)


@njit(cache=True, nogil=True)
def _obb_params(a, b, c, radius_scale):
    l1, l2 = _eig2x2(a, b, c)
    if l2 < 0.0:
        l2 = 0.0
    h1 = radius_scale * np.sqrt(l1)
    h2 = radius_scale * np.sqrt(l2)
    if b == 0.0:
        if a >= c:
            return 1.0, 0.0, h1, h2
        return 0.0, 1.0, h1, h2
    vx = b
    vy = l1 - a
    inv = 1.0 / np.sqrt(vx * vx + vy * vy)
    return vx * inv, vy * inv, h1, h2


@njit(cache=True, nogil=True)
def _cell_hit(method, cx, cy, r, ux, uy, h1, h2, ca, cb, cc, rr,
              x0, y0, x1, y1):
    if method == 0:
        return _aabb_hits(cx, cy, r, x0, y0, x1, y1)
    if method == 1:
        return _obb_hits(cx, cy, ux, uy, h1, h2, x0, y0, x1, y1)
    return _ellipse_hits(cx, cy, ca, cb, cc, rr, x0, y0, x1, y1)


@njit(cache=True, nogil=True)
def _cell_span(c, r, size, n):
    lo = int(np.floor((c - r) / size))
    hi = int(np.floor((c + r) / size))
    if lo < 0:
        lo = 0
    if hi > n - 1:
        hi = n - 1
    return lo, hi


@njit(cache=True, nogil=True)
def _assign_cells(center, radius, cov, conic, nx, ny, size, width, height,
                  method):
    m = center.shape[0]
    cap = 4 * m + 1024
    rows = np.empty(cap, np.int32)
    cells = np.empty(cap, np.int32)
    n = 0
    n_tests = 0
    fw = float(width)
    fh = float(height)
    for i in range(m):
        cx = float(center[i, 0])
        cy = float(center[i, 1])
        r = float(radius[i])
        ix0, ix1 = _cell_span(cx, r, size, nx)
        iy0, iy1 = _cell_span(cy, r, size, ny)
        if ix0 > ix1 or iy0 > iy1:
            continue
        a = float(cov[i, 0])
        b = float(cov[i, 1])
        c = float(cov[i, 2])
        ca = float(conic[i, 0])
        cb = float(conic[i, 1])
        cc = float(conic[i, 2])
        ux, uy, h1, h2 = _obb_params(a, b, c, _RADIUS_SCALE)
        for iy in range(iy0, iy1 + 1):
            y0 = float(iy * size)
            y1 = min(y0 + size, fh)
            for ix in range(ix0, ix1 + 1):
                x0 = float(ix * size)
                x1 = min(x0 + size, fw)
                n_tests += 1
                if _cell_hit(method, cx, cy, r, ux, uy, h1, h2,
                             ca, cb, cc, _RR, x0, y0, x1, y1):
                    if n == cap:
                        cap *= 2
                        rows2 = np.empty(cap, np.int32)
                        cells2 = np.empty(cap, np.int32)
                        rows2[:n] = rows
                        cells2[:n] = cells
                        rows = rows2
                        cells = cells2
                    rows[n] = i
                    cells[n] = iy * nx + ix
                    n += 1
    return rows[:n].copy(), cells[:n].copy(), n_tests


def assign_cells(center, radius, cov, conic, nx, ny, size, width, height,
                 method: int):
    rows, cells, n_tests = _assign_cells(center, radius, cov, conic,
                                         nx, ny, size, width, height, method)
    return rows, cells, int(n_tests)


@njit(cache=True, nogil=True)
def _bitmasks(rows, groups, center, radius, cov, conic, tile_size, per_side,
              groups_x, tiles_x, tiles_y, width, height, method):
    n = rows.shape[0]
    masks = np.zeros(n, np.uint16)
    fw = float(width)
    fh = float(height)
    for k in range(n):
        i = rows[k]
        cx = float(center[i, 0])
        cy = float(center[i, 1])
        r = float(radius[i])
        a = float(cov[i, 0])
        b = float(cov[i, 1])
        c = float(cov[i, 2])
        ca = float(conic[i, 0])
        cb = float(conic[i, 1])
        cc = float(conic[i, 2])
        ux, uy, h1, h2 = _obb_params(a, b, c, _RADIUS_SCALE)
        ix0, ix1 = _cell_span(cx, r, tile_size, tiles_x)
        iy0, iy1 = _cell_span(cy, r, tile_size, tiles_y)
        gx = groups[k] % groups_x
        gy = groups[k] // groups_x
        mask = np.uint16(0)
        for bit in range(per_side * per_side):
            tx = gx * per_side + bit % per_side
            ty = gy * per_side + bit // per_side
            if tx >= tiles_x or ty >= tiles_y:
                continue
            if tx < ix0 or tx > ix1 or ty < iy0 or ty > iy1:
                continue
            x0 = float(tx * tile_size)
            y0 = float(ty * tile_size)
            x1 = min(x0 + tile_size, fw)
            y1 = min(y0 + tile_size, fh)
            if _cell_hit(method, cx, cy, r, ux, uy, h1, h2,
                         ca, cb, cc, _RR, x0, y0, x1, y1):
                mask |= np.uint16(1 << bit)
        masks[k] = mask
    return masks


def bitmasks(rows, groups, center, radius, cov, conic, tile_size, per_side,
             groups_x, tiles_x, tiles_y, width, height, method: int):
    return _bitmasks(rows, groups, center, radius, cov, conic, tile_size,
                     per_side, groups_x, tiles_x, tiles_y, width, height, method)


@njit(cache=True, nogil=True)
def _composite_px(pxc, pyc, order, centers, conics, opacities, colors,
                  alpha_min, t_min):
    """Front-to-back blend of one pixel over a (depth, id)-ordered row list.

    Alpha follows the float32 quadratic-form evaluation; transmittance and
    color accumulate in float64. Returns color without the background term.
    """
    t = 1.0
    r = 0.0
    g = 0.0
    b = 0.0
    n_alpha = 0
    n_blend = 0
    exited = False
    for k in range(order.shape[0]):
        if t < t_min:
            exited = True
            break
        gi = order[k]
        dx = pxc - centers[gi, 0]
        dy = pyc - centers[gi, 1]
        ca = conics[gi, 0]
        cb = conics[gi, 1]
        cc = conics[gi, 2]
        q = ca * dx * dx + _F4_TWO * cb * dx * dy + cc * dy * dy
        alpha = np.float32(opacities[gi] * np.exp(_F4_NEGHALF * q))
        n_alpha += 1
        if alpha > _F4_CLAMP:
            alpha = _F4_CLAMP
        if alpha < alpha_min:
            continue
        a8 = np.float64(alpha)
        w = a8 * t
        r += np.float64(colors[gi, 0]) * w
        g += np.float64(colors[gi, 1]) * w
        b += np.float64(colors[gi, 2]) * w
        t = t * (1.0 - a8)
        n_blend += 1
    return r, g, b, t, n_alpha, n_blend, exited


@njit(cache=True, nogil=True)
def _raster_span(order, x0, y0, x1, y1, centers, conics, opacities, colors,
                 alpha_min, t_min, bg, out_rgb, out_t):
    n_alpha = 0
    n_blend = 0
    n_exit = 0
    for py in range(y0, y1):
        pyc = np.float32(py) + _F4_HALF
        for px in range(x0, x1):
            pxc = np.float32(px) + _F4_HALF
            r, g, b, t, na, nb, ex = _composite_px(
                pxc, pyc, order, centers, conics, opacities, colors,
                alpha_min, t_min)
            out_rgb[py, px, 0] = r + t * bg[0]
            out_rgb[py, px, 1] = g + t * bg[1]
            out_rgb[py, px, 2] = b + t * bg[2]
            out_t[py, px] = t
            n_alpha += na
            n_blend += nb
            if ex:
                n_exit += 1
    return n_alpha, n_blend, n_exit


@njit(cache=True, nogil=True)
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


@njit(cache=True, nogil=True)
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
        lo = g_offsets[g]
        hi = g_offsets[g + 1]
        # AND-filter against the tile's one-hot location, preserving order
        order = np.empty(hi - lo, np.int32)
        m = 0
        for k in range(lo, hi):
            if g_masks[k] & location:
                order[m] = g_rows[k]
                m += 1
        na, nb, ne = _raster_span(order[:m], x0, y0, x1, y1, centers, conics,
                                  opacities, colors, alpha_min, t_min, bg,
                                  out_rgb, out_t)
        counters[t, 0] = na
        counters[t, 1] = nb
        counters[t, 2] = ne
        counters[t, 3] = hi - lo
        counters[t, 4] = (hi - lo) - m


@njit(cache=True, nogil=True)
def brute_force(width, height, tile_size, tiles_x, tiles_y, centers, conics,
                opacities, colors, cov, radius, depth, method, alpha_min,
                t_min, bg, out_rgb, out_t):
    """Per-pixel reference: rebuild each pixel's member list from scratch.

    Membership repeats the assignment predicate (prefilter + boundary test)
    per (pixel, gaussian); members collect in id order and a stable insertion
    sort by depth yields the shared (depth, id) total order.
    """
    m = centers.shape[0]
    scratch = np.empty(m, np.int32)
    fw = float(width)
    fh = float(height)
    for py in range(height):
        pyc = np.float32(py) + _F4_HALF
        ty = py // tile_size
        for px in range(width):
            pxc = np.float32(px) + _F4_HALF
            tx = px // tile_size
            x0 = float(tx * tile_size)
            y0 = float(ty * tile_size)
            x1 = min(x0 + tile_size, fw)
            y1 = min(y0 + tile_size, fh)
            n = 0
            for i in range(m):
                cx = float(centers[i, 0])
                cy = float(centers[i, 1])
                r = float(radius[i])
                ix0, ix1 = _cell_span(cx, r, tile_size, tiles_x)
                iy0, iy1 = _cell_span(cy, r, tile_size, tiles_y)
                if tx < ix0 or tx > ix1 or ty < iy0 or ty > iy1:
                    continue
                a = float(cov[i, 0])
                b = float(cov[i, 1])
                c = float(cov[i, 2])
                ux, uy, h1, h2 = _obb_params(a, b, c, _RADIUS_SCALE)
                if _cell_hit(method, cx, cy, r, ux, uy, h1, h2,
                             float(conics[i, 0]), float(conics[i, 1]),
                             float(conics[i, 2]), _RR, x0, y0, x1, y1):
                    scratch[n] = i
                    n += 1
            # stable insertion sort by depth keeps the id tie-break
            for j in range(1, n):
                v = scratch[j]
                dv = depth[v]
                k = j - 1
                while k >= 0 and depth[scratch[k]] > dv:
                    scratch[k + 1] = scratch[k]
                    k -= 1
                scratch[k + 1] = v
            r8, g8, b8, t, _, _, _ = _composite_px(
                pxc, pyc, scratch[:n], centers, conics, opacities, colors,
                alpha_min, t_min)
            out_rgb[py, px, 0] = r8 + t * bg[0]
            out_rgb[py, px, 1] = g8 + t * bg[1]
            out_rgb[py, px, 2] = b8 + t * bg[2]
            out_t[py, px] = t
