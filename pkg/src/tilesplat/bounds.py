"""Gaussian-vs-rectangle influence tests and tile/group identification.

Three boundary methods, loosest to tightest: AABB (a 3-sigma square), OBB
(separating-axis test against the 3-sigma oriented box), ELLIPSE (exact
3-sigma conic vs rectangle). Predicates take float32 features but evaluate in
float64 so both kernel backends reach identical decisions; tangency counts as
intersecting throughout.

The scalar predicates below are written numba-compatible (plain math, no
fancy numpy) so the njit kernels compile these exact functions; the
vectorized *_numpy variants are the fallback path and mirror them
expression for expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (RADIUS_SCALE, Boundary, ProjectedGaussian, TileBitmask,
                    TileLayout)


@dataclass(frozen=True)
class ScreenEllipse:
    """3-sigma influence region {p : (p-center)^T conic (p-center) <= scale^2}."""

    center: np.ndarray
    conic: np.ndarray
    radius_scale: float = RADIUS_SCALE

    @classmethod
    def from_projected(cls, pg: ProjectedGaussian,
                       radius_scale: float = RADIUS_SCALE) -> "ScreenEllipse":
        return cls(center=pg.center2d, conic=pg.conic, radius_scale=radius_scale)

    def contains(self, p) -> bool:
        d = np.asarray(p, dtype=np.float64) - self.center.astype(np.float64)
        q = d @ self.conic.astype(np.float64) @ d
        return bool(q <= self.radius_scale * self.radius_scale)


@dataclass(frozen=True)
class OrientedBox:
    center: np.ndarray       # (2,)
    axes: np.ndarray         # (2, 2), rows are unit axes
    half_extents: np.ndarray  # (2,)

    @property
    def area(self) -> float:
        return float(4.0 * self.half_extents[0] * self.half_extents[1])


# --- scalar predicates (numba-compatible) ------------------------------------

def eig2x2(a, b, c):
    """Eigenvalues of [[a, b], [b, c]], largest first (closed form)."""
    mid = 0.5 * (a + c)
    diff = 0.5 * (a - c)
    s = math.sqrt(diff * diff + b * b)
    return mid + s, mid - s


def obb_params(a, b, c, radius_scale):
    """Unit major axis and half-extents of the scaled covariance box.

    Axes come out algebraically (no atan2) so every backend computes
    bit-identical axes: v1 = (b, l1 - a) for b != 0, coordinate axes
    otherwise.
    """
    l1, l2 = eig2x2(a, b, c)
    if l2 < 0.0:
        l2 = 0.0
    h1 = radius_scale * math.sqrt(l1)
    h2 = radius_scale * math.sqrt(l2)
    if b == 0.0:
        if a >= c:
            return 1.0, 0.0, h1, h2
        return 0.0, 1.0, h1, h2
    vx = b
    vy = l1 - a
    inv = 1.0 / math.sqrt(vx * vx + vy * vy)
    return vx * inv, vy * inv, h1, h2


def aabb_hits_rect(cx, cy, r, x0, y0, x1, y1):
    """Closed 3-sigma square [cx-r, cx+r]^2 vs closed rectangle."""
    return cx - r <= x1 and cx + r >= x0 and cy - r <= y1 and cy + r >= y0


def obb_hits_rect(cx, cy, ux, uy, h1, h2, x0, y0, x1, y1):
    """Separating-axis test over the 4 face normals; touching counts as a hit."""
    rcx = 0.5 * (x0 + x1)
    rcy = 0.5 * (y0 + y1)
    hw = 0.5 * (x1 - x0)
    hh = 0.5 * (y1 - y0)
    dx = cx - rcx
    dy = cy - rcy
    # second box axis is u rotated 90 degrees: (-uy, ux)
    ax = abs(ux)
    ay = abs(uy)
    # rect x axis
    if abs(dx) > hw + h1 * ax + h2 * ay:
        return False
    # rect y axis
    if abs(dy) > hh + h1 * ay + h2 * ax:
        return False
    # box major axis
    if abs(dx * ux + dy * uy) > h1 + hw * ax + hh * ay:
        return False
    # box minor axis
    if abs(-dx * uy + dy * ux) > h2 + hw * ay + hh * ax:
        return False
    return True


def ellipse_hits_rect(cx, cy, ca, cb, cc, rr, x0, y0, x1, y1):
    """Exact conic-vs-rectangle test for {d^T conic d <= rr}.

    True iff the center lies in the rectangle, a corner lies in the ellipse,
    or the ellipse boundary crosses a rectangle edge. Per edge the fixed
    coordinate is substituted into the quadratic form and the 1D root
    interval is compared against the edge span (tangency included).
    """
    if x0 <= cx and cx <= x1 and y0 <= cy and cy <= y1:
        return True
    for px in (x0, x1):
        for py in (y0, y1):
            dx = px - cx
            dy = py - cy
            if ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy <= rr:
                return True
    # vertical edges x = x0, x1: cc t^2 + 2 cb dx t + (ca dx^2 - rr) <= 0
    for px in (x0, x1):
        dx = px - cx
        disc = cb * cb * dx * dx - cc * (ca * dx * dx - rr)
        if disc >= 0.0:
            s = math.sqrt(disc)
            lo = cy + (-cb * dx - s) / cc
            hi = cy + (-cb * dx + s) / cc
            if hi >= y0 and lo <= y1:
                return True
    # horizontal edges y = y0, y1
    for py in (y0, y1):
        dy = py - cy
        disc = cb * cb * dy * dy - ca * (cc * dy * dy - rr)
        if disc >= 0.0:
            s = math.sqrt(disc)
            lo = cx + (-cb * dy - s) / ca
            hi = cx + (-cb * dy + s) / ca
            if hi >= x0 and lo <= x1:
                return True
    return False


def cell_hit(method, cx, cy, r, ux, uy, h1, h2, ca, cb, cc, rr,
             x0, y0, x1, y1):
    """Dispatch one (gaussian, rectangle) influence test by method code."""
    if method == 0:
        return aabb_hits_rect(cx, cy, r, x0, y0, x1, y1)
    if method == 1:
        return obb_hits_rect(cx, cy, ux, uy, h1, h2, x0, y0, x1, y1)
    return ellipse_hits_rect(cx, cy, ca, cb, cc, rr, x0, y0, x1, y1)


def cell_range(c, r, size, n):
    """Inclusive index range of size-`size` cells overlapped by [c-r, c+r]."""
    lo = int(math.floor((c - r) / size))
    hi = int(math.floor((c + r) / size))
    if lo < 0:
        lo = 0
    if hi > n - 1:
        hi = n - 1
    return lo, hi


# --- record-level operations --------------------------------------------------

def _packed(pg: ProjectedGaussian):
    a = float(pg.covariance2d[0, 0])
    b = float(pg.covariance2d[0, 1])
    c = float(pg.covariance2d[1, 1])
    ca = float(pg.conic[0, 0])
    cb = float(pg.conic[0, 1])
    cc = float(pg.conic[1, 1])
    return a, b, c, ca, cb, cc


def radius_of(pg: ProjectedGaussian, radius_scale: float = RADIUS_SCALE) -> float:
    """3-sigma AABB half-extent, rounded to f4 to match the batch pipeline."""
    a, b, c, *_ = _packed(pg)
    l1, _ = eig2x2(a, b, c)
    return float(np.float32(radius_scale * math.sqrt(max(l1, 0.0))))


def aabb_of(pg: ProjectedGaussian, radius_scale: float = RADIUS_SCALE):
    """Axis-aligned square of half-side radius_scale * sqrt(lambda_max)."""
    r = radius_of(pg, radius_scale)
    cx = float(pg.center2d[0])
    cy = float(pg.center2d[1])
    return cx - r, cy - r, cx + r, cy + r


def obb_of(pg: ProjectedGaussian, radius_scale: float = RADIUS_SCALE) -> OrientedBox:
    a, b, c, *_ = _packed(pg)
    ux, uy, h1, h2 = obb_params(a, b, c, radius_scale)
    return OrientedBox(center=pg.center2d.astype(np.float64),
                       axes=np.array([[ux, uy], [-uy, ux]]),
                       half_extents=np.array([h1, h2]))


def intersects(pg: ProjectedGaussian, rect, method: Boundary,
               radius_scale: float = RADIUS_SCALE) -> bool:
    """Does the Gaussian's footprint touch rect = (x0, y0, x1, y1)?"""
    x0, y0, x1, y1 = (float(v) for v in rect)
    if x1 <= x0 or y1 <= y0:
        return False
    a, b, c, ca, cb, cc = _packed(pg)
    cx = float(pg.center2d[0])
    cy = float(pg.center2d[1])
    method = Boundary(method)
    if method is Boundary.AABB:
        return aabb_hits_rect(cx, cy, radius_of(pg, radius_scale), x0, y0, x1, y1)
    if method is Boundary.OBB:
        ux, uy, h1, h2 = obb_params(a, b, c, radius_scale)
        return obb_hits_rect(cx, cy, ux, uy, h1, h2, x0, y0, x1, y1)
    return ellipse_hits_rect(cx, cy, ca, cb, cc, radius_scale * radius_scale,
                             x0, y0, x1, y1)


def _identify_cells(pg: ProjectedGaussian, nx: int, ny: int, size: int,
                    width: int, height: int, method: Boundary) -> np.ndarray:
    a, b, c, ca, cb, cc = _packed(pg)
    cx = float(pg.center2d[0])
    cy = float(pg.center2d[1])
    r = radius_of(pg)
    ux, uy, h1, h2 = obb_params(a, b, c, RADIUS_SCALE)
    rr = RADIUS_SCALE * RADIUS_SCALE
    ix0, ix1 = cell_range(cx, r, size, nx)
    iy0, iy1 = cell_range(cy, r, size, ny)
    out = []
    m = int(method)
    for iy in range(iy0, iy1 + 1):
        y0 = iy * size
        y1 = min(y0 + size, height)
        for ix in range(ix0, ix1 + 1):
            x0 = ix * size
            x1 = min(x0 + size, width)
            if cell_hit(m, cx, cy, r, ux, uy, h1, h2, ca, cb, cc, rr,
                        float(x0), float(y0), float(x1), float(y1)):
                out.append(iy * nx + ix)
    return np.array(sorted(out), dtype=np.int32)


def identify_tiles(pg: ProjectedGaussian, layout: TileLayout,
                   tile_size: int | None = None,
                   method: Boundary = Boundary.ELLIPSE) -> np.ndarray:
    """Sorted indices of tiles whose rectangle the Gaussian influences."""
    if tile_size is not None and tile_size != layout.tile_size:
        raise ValueError("tile_size disagrees with layout.tile_size")
    return _identify_cells(pg, layout.tiles_x, layout.tiles_y, layout.tile_size,
                           layout.width, layout.height, method)


def identify_groups(pg: ProjectedGaussian, layout: TileLayout,
                    group_size: int | None = None,
                    method: Boundary = Boundary.ELLIPSE) -> np.ndarray:
    """Sorted indices of groups whose rectangle the Gaussian influences."""
    if group_size is not None and group_size != layout.group_size:
        raise ValueError("group_size disagrees with layout.group_size")
    return _identify_cells(pg, layout.groups_x, layout.groups_y, layout.group_size,
                           layout.width, layout.height, method)


def bitmask_for(pg: ProjectedGaussian, group_index: int, layout: TileLayout,
                method: Boundary = Boundary.ELLIPSE) -> TileBitmask:
    """Mask of influenced tiles inside one group (bit order row-major).

    All-zero masks are legal when the per-tile method is tighter than the
    method that selected the group; callers drop such entries.
    """
    a, b, c, ca, cb, cc = _packed(pg)
    cx = float(pg.center2d[0])
    cy = float(pg.center2d[1])
    r = radius_of(pg)
    ux, uy, h1, h2 = obb_params(a, b, c, RADIUS_SCALE)
    rr = RADIUS_SCALE * RADIUS_SCALE
    per_side = layout.tiles_per_group_side
    ts = layout.tile_size
    gx = group_index % layout.groups_x
    gy = group_index // layout.groups_x
    ix0, ix1 = cell_range(cx, r, ts, layout.tiles_x)
    iy0, iy1 = cell_range(cy, r, ts, layout.tiles_y)
    m = int(method)
    mask = 0
    for bit in range(per_side * per_side):
        tx = gx * per_side + bit % per_side
        ty = gy * per_side + bit // per_side
        if tx >= layout.tiles_x or ty >= layout.tiles_y:
            continue
        if not (ix0 <= tx <= ix1 and iy0 <= ty <= iy1):
            continue
        x0 = tx * ts
        y0 = ty * ts
        x1 = min(x0 + ts, layout.width)
        y1 = min(y0 + ts, layout.height)
        if cell_hit(m, cx, cy, r, ux, uy, h1, h2, ca, cb, cc, rr,
                    float(x0), float(y0), float(x1), float(y1)):
            mask |= 1 << bit
    return TileBitmask(gaussian_id=pg.id, group_index=group_index, mask=mask)


# --- vectorized batch operations (pure-numpy fallback path) -------------------

def obb_params_numpy(a, b, c, radius_scale=RADIUS_SCALE):
    """Vectorized obb_params over packed covariance arrays (float64)."""
    mid = 0.5 * (a + c)
    diff = 0.5 * (a - c)
    s = np.sqrt(diff * diff + b * b)
    l1 = mid + s
    l2 = np.maximum(mid - s, 0.0)
    h1 = radius_scale * np.sqrt(l1)
    h2 = radius_scale * np.sqrt(l2)
    vx = b.copy()
    vy = l1 - a
    degen = b == 0.0
    vx[degen] = np.where(a[degen] >= c[degen], 1.0, 0.0)
    vy[degen] = np.where(a[degen] >= c[degen], 0.0, 1.0)
    inv = 1.0 / np.sqrt(vx * vx + vy * vy)
    return vx * inv, vy * inv, h1, h2


def _hits_numpy(method, cx, cy, r, ux, uy, h1, h2, ca, cb, cc, rr,
                x0, y0, x1, y1):
    """Vectorized cell_hit over parallel pair arrays (all float64)."""
    if method == 0:
        return (cx - r <= x1) & (cx + r >= x0) & (cy - r <= y1) & (cy + r >= y0)
    if method == 1:
        rcx = 0.5 * (x0 + x1)
        rcy = 0.5 * (y0 + y1)
        hw = 0.5 * (x1 - x0)
        hh = 0.5 * (y1 - y0)
        dx = cx - rcx
        dy = cy - rcy
        ax = np.abs(ux)
        ay = np.abs(uy)
        hit = np.abs(dx) <= hw + h1 * ax + h2 * ay
        hit &= np.abs(dy) <= hh + h1 * ay + h2 * ax
        hit &= np.abs(dx * ux + dy * uy) <= h1 + hw * ax + hh * ay
        hit &= np.abs(-dx * uy + dy * ux) <= h2 + hw * ay + hh * ax
        return hit
    # ellipse: center-in-rect, corners, then the four edge quadratics
    hit = (x0 <= cx) & (cx <= x1) & (y0 <= cy) & (cy <= y1)
    for px, py in ((x0, y0), (x0, y1), (x1, y0), (x1, y1)):
        dx = px - cx
        dy = py - cy
        hit |= ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy <= rr
    for px in (x0, x1):
        dx = px - cx
        disc = cb * cb * dx * dx - cc * (ca * dx * dx - rr)
        ok = disc >= 0.0
        s = np.sqrt(np.where(ok, disc, 0.0))
        lo = cy + (-cb * dx - s) / cc
        hi = cy + (-cb * dx + s) / cc
        hit |= ok & (hi >= y0) & (lo <= y1)
    for py in (y0, y1):
        dy = py - cy
        disc = cb * cb * dy * dy - ca * (cc * dy * dy - rr)
        ok = disc >= 0.0
        s = np.sqrt(np.where(ok, disc, 0.0))
        lo = cx + (-cb * dy - s) / ca
        hi = cx + (-cb * dy + s) / ca
        hit |= ok & (hi >= x0) & (lo <= x1)
    return hit


def assign_cells_numpy(center, radius, cov, conic, nx, ny, size, width, height,
                       method: int):
    """Identify influenced cells for a whole batch.

    Returns (gauss_rows, cell_indices, n_tests): parallel pair arrays plus the
    number of candidate rectangles examined. Pairs come out grouped by
    gaussian row, cells row-major within each gaussian.
    """
    cx = center[:, 0].astype(np.float64)
    cy = center[:, 1].astype(np.float64)
    r = radius.astype(np.float64)

    ix0 = np.maximum(np.floor((cx - r) / size), 0).astype(np.int64)
    ix1 = np.minimum(np.floor((cx + r) / size), nx - 1).astype(np.int64)
    iy0 = np.maximum(np.floor((cy - r) / size), 0).astype(np.int64)
    iy1 = np.minimum(np.floor((cy + r) / size), ny - 1).astype(np.int64)
    w = np.maximum(ix1 - ix0 + 1, 0)
    h = np.maximum(iy1 - iy0 + 1, 0)
    counts = w * h
    total = int(counts.sum())
    if total == 0:
        return (np.empty(0, np.int32), np.empty(0, np.int32), 0)

    rows = np.repeat(np.arange(center.shape[0]), counts)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    within = np.arange(total) - np.repeat(starts, counts)
    wrep = w[rows]
    tx = ix0[rows] + within % wrep
    ty = iy0[rows] + within // wrep

    x0 = (tx * size).astype(np.float64)
    y0 = (ty * size).astype(np.float64)
    x1 = np.minimum(x0 + size, float(width))
    y1 = np.minimum(y0 + size, float(height))

    # the clipped-rect test still runs for AABB: the prefilter range can name
    # one phantom border tile when the square hangs past the image edge
    if method == 0:
        hit = _hits_numpy(0, cx[rows], cy[rows], r[rows],
                          None, None, None, None, None, None, None, None,
                          x0, y0, x1, y1)
    else:
        a = cov[:, 0].astype(np.float64)
        b = cov[:, 1].astype(np.float64)
        c = cov[:, 2].astype(np.float64)
        ux, uy, h1, h2 = obb_params_numpy(a, b, c)
        rr = RADIUS_SCALE * RADIUS_SCALE
        hit = _hits_numpy(method, cx[rows], cy[rows], r[rows],
                          ux[rows], uy[rows], h1[rows], h2[rows],
                          conic[rows, 0].astype(np.float64),
                          conic[rows, 1].astype(np.float64),
                          conic[rows, 2].astype(np.float64), rr,
                          x0, y0, x1, y1)
    cells = (ty * nx + tx).astype(np.int32)
    return rows[hit].astype(np.int32), cells[hit], total


def bitmasks_numpy(rows, groups, center, radius, cov, conic, layout: TileLayout,
                   method: int):
    """16-bit masks for (gaussian row, group) pairs, mirroring bitmask_for."""
    n = rows.shape[0]
    masks = np.zeros(n, dtype=np.uint16)
    if n == 0:
        return masks
    cx = center[rows, 0].astype(np.float64)
    cy = center[rows, 1].astype(np.float64)
    r = radius[rows].astype(np.float64)
    a = cov[rows, 0].astype(np.float64)
    b = cov[rows, 1].astype(np.float64)
    c = cov[rows, 2].astype(np.float64)
    ca = conic[rows, 0].astype(np.float64)
    cb = conic[rows, 1].astype(np.float64)
    cc = conic[rows, 2].astype(np.float64)
    ux, uy, h1, h2 = obb_params_numpy(a, b, c)
    rr = RADIUS_SCALE * RADIUS_SCALE

    ts = layout.tile_size
    per_side = layout.tiles_per_group_side
    gx = (groups % layout.groups_x).astype(np.int64)
    gy = (groups // layout.groups_x).astype(np.int64)

    ix0 = np.maximum(np.floor((cx - r) / ts), 0).astype(np.int64)
    ix1 = np.minimum(np.floor((cx + r) / ts), layout.tiles_x - 1).astype(np.int64)
    iy0 = np.maximum(np.floor((cy - r) / ts), 0).astype(np.int64)
    iy1 = np.minimum(np.floor((cy + r) / ts), layout.tiles_y - 1).astype(np.int64)

    for bit in range(per_side * per_side):
        tx = gx * per_side + bit % per_side
        ty = gy * per_side + bit // per_side
        cand = ((tx < layout.tiles_x) & (ty < layout.tiles_y)
                & (ix0 <= tx) & (tx <= ix1) & (iy0 <= ty) & (ty <= iy1))
        if not cand.any():
            continue
        x0 = (tx * ts).astype(np.float64)
        y0 = (ty * ts).astype(np.float64)
        x1 = np.minimum(x0 + ts, float(layout.width))
        y1 = np.minimum(y0 + ts, float(layout.height))
        hit = cand.copy()
        idx = np.flatnonzero(cand)
        hit[idx] = _hits_numpy(method, cx[idx], cy[idx], r[idx],
                               ux[idx], uy[idx], h1[idx], h2[idx],
                               ca[idx], cb[idx], cc[idx], rr,
                               x0[idx], y0[idx], x1[idx], y1[idx])
        masks[hit] |= np.uint16(1 << bit)
    return masks
