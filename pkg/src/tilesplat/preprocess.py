"""Per-view feature computation and culling.

All rendering features are float32; the projection chain is evaluated
vectorized over the whole scene and survivors keep their input order, so the
(depth, id) total order downstream is independent of how this stage is
scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (CULL_GUARD, LOWPASS_PX2, RADIUS_SCALE, Camera, Gaussian3D,
                    ProjectedGaussian)
from .scene_io import SceneSource

# real spherical harmonics basis constants, degrees 0-3
SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)


def sh_to_rgb(sh: np.ndarray, view_dir: np.ndarray) -> np.ndarray:
    """Evaluate SH color for unit directions and clamp to [0, 1].

    sh is (K, 3) or (N, K, 3) with K in {1, 4, 9, 16}; view_dir broadcasts
    as (3,) or (N, 3). The 0.5 offset recenters the DC term.
    """
    sh = np.asarray(sh, dtype=np.float32)
    single = sh.ndim == 2
    if single:
        sh = sh[None]
    dirs = np.asarray(view_dir, dtype=np.float32).reshape(-1, 3)
    k = sh.shape[1]
    if k not in (1, 4, 9, 16):
        raise ValueError(f"unsupported SH coefficient count {k}")

    out = SH_C0 * sh[:, 0]
    if k > 1:
        x, y, z = dirs[:, 0:1], dirs[:, 1:2], dirs[:, 2:3]
        out = out - SH_C1 * y * sh[:, 1] + SH_C1 * z * sh[:, 2] - SH_C1 * x * sh[:, 3]
    if k > 4:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        out = (out
               + SH_C2[0] * xy * sh[:, 4]
               + SH_C2[1] * yz * sh[:, 5]
               + SH_C2[2] * (2.0 * zz - xx - yy) * sh[:, 6]
               + SH_C2[3] * xz * sh[:, 7]
               + SH_C2[4] * (xx - yy) * sh[:, 8])
    if k > 9:
        out = (out
               + SH_C3[0] * y * (3.0 * xx - yy) * sh[:, 9]
               + SH_C3[1] * xy * z * sh[:, 10]
               + SH_C3[2] * y * (4.0 * zz - xx - yy) * sh[:, 11]
               + SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * sh[:, 12]
               + SH_C3[4] * x * (4.0 * zz - xx - yy) * sh[:, 13]
               + SH_C3[5] * z * (xx - yy) * sh[:, 14]
               + SH_C3[6] * x * (xx - 3.0 * yy) * sh[:, 15])
    out = np.clip(out + 0.5, 0.0, 1.0).astype(np.float32)
    return out[0] if single else out


@dataclass(frozen=True)
class ProjectedBatch:
    """Struct-of-arrays projection output; row order equals scene order."""

    ids: np.ndarray        # (M,) int32, indices into the source scene
    depth: np.ndarray      # (M,) float32 view-space z
    center: np.ndarray     # (M, 2) float32 pixels
    cov: np.ndarray        # (M, 3) float32 packed (a, b, c) of the 2x2 covariance
    conic: np.ndarray      # (M, 3) float32 packed inverse covariance
    color: np.ndarray      # (M, 3) float32
    opacity: np.ndarray    # (M,) float32
    radius: np.ndarray     # (M,) float32, 3-sigma AABB half-extent
    n_input: int
    n_degenerate: int

    def __len__(self) -> int:
        return self.ids.shape[0]

    def record(self, row: int) -> ProjectedGaussian:
        a, b, c = (float(v) for v in self.cov[row])
        ia, ib, ic = (float(v) for v in self.conic[row])
        return ProjectedGaussian(
            id=int(self.ids[row]), depth=float(self.depth[row]),
            center2d=self.center[row],
            covariance2d=np.array([[a, b], [b, c]], dtype=np.float32),
            conic=np.array([[ia, ib], [ib, ic]], dtype=np.float32),
            color=self.color[row], opacity=float(self.opacity[row]))


def _project_arrays(positions: np.ndarray, covariances: np.ndarray, cam: Camera):
    """Project world positions/covariances; returns f4 arrays plus a z mask.

    Rows failing the z-near test get garbage features and must be dropped by
    the caller via the mask.
    """
    pos = positions.astype(np.float32)
    w = cam.rotation.astype(np.float32)
    tr = cam.translation.astype(np.float32)
    fx = np.float32(cam.fx)
    fy = np.float32(cam.fy)

    t = pos @ w.T + tr
    tz = t[:, 2]
    zok = tz > np.float32(cam.z_near)
    tz_safe = np.where(zok, tz, np.float32(1.0))

    cx2d = fx * t[:, 0] / tz_safe + np.float32(cam.cx)
    cy2d = fy * t[:, 1] / tz_safe + np.float32(cam.cy)
    center = np.stack([cx2d, cy2d], axis=1)

    # J rows of the perspective map, per gaussian
    inv_z = np.float32(1.0) / tz_safe
    inv_z2 = inv_z * inv_z
    j = np.zeros((pos.shape[0], 2, 3), dtype=np.float32)
    j[:, 0, 0] = fx * inv_z
    j[:, 0, 2] = -fx * t[:, 0] * inv_z2
    j[:, 1, 1] = fy * inv_z
    j[:, 1, 2] = -fy * t[:, 1] * inv_z2

    jw = np.einsum("nij,jk->nik", j, w)
    cov2d = np.einsum("nij,njk,nlk->nil", jw, covariances.astype(np.float32), jw)
    cov2d[:, 0, 0] += np.float32(LOWPASS_PX2)
    cov2d[:, 1, 1] += np.float32(LOWPASS_PX2)
    return t, center, cov2d, zok


def project_scene(scene: SceneSource, cam: Camera) -> ProjectedBatch:
    """Cull and project a whole scene, preserving input order.

    Culling drops Gaussians behind z_near and those whose projected center
    falls outside the image grown by CULL_GUARD times the 3-sigma AABB
    half-extent. Degenerate 2D covariances (det <= 0 after the low-pass) are
    dropped and counted separately.
    """
    n = len(scene)
    t, center, cov2d, zok = _project_arrays(scene.positions, scene.covariances, cam)

    a = cov2d[:, 0, 0].astype(np.float64)
    b = cov2d[:, 0, 1].astype(np.float64)
    c = cov2d[:, 1, 1].astype(np.float64)
    det = a * c - b * b

    mid = 0.5 * (a + c)
    lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    radius = RADIUS_SCALE * np.sqrt(np.maximum(lam_max, 0.0))

    # det > 0 written negated so NaN from float32 overflow lands here too
    degenerate = zok & ~((det > 0.0)
                         & np.isfinite(radius)
                         & np.isfinite(center).all(axis=1))

    guard = CULL_GUARD * radius
    cxp = center[:, 0].astype(np.float64)
    cyp = center[:, 1].astype(np.float64)
    inside = ((cxp >= -guard) & (cxp <= cam.width + guard)
              & (cyp >= -guard) & (cyp <= cam.height + guard))

    keep = zok & inside & ~degenerate
    idx = np.flatnonzero(keep)

    inv_det = 1.0 / det[idx]
    conic = np.stack([c[idx] * inv_det, -b[idx] * inv_det, a[idx] * inv_det],
                     axis=1).astype(np.float32)

    view_dir = scene.positions[idx].astype(np.float64) - cam.center_world
    norms = np.linalg.norm(view_dir, axis=1, keepdims=True)
    view_dir = np.divide(view_dir, norms, out=np.zeros_like(view_dir),
                         where=norms > 0)
    color = sh_to_rgb(scene.sh[idx], view_dir.astype(np.float32))
    if color.ndim == 1:
        color = color[None]

    return ProjectedBatch(
        ids=idx.astype(np.int32),
        depth=t[idx, 2].astype(np.float32),
        center=center[idx],
        cov=np.stack([cov2d[idx, 0, 0], cov2d[idx, 0, 1], cov2d[idx, 1, 1]],
                     axis=1),
        conic=conic,
        color=color.reshape(-1, 3),
        opacity=scene.opacities[idx].astype(np.float32),
        radius=radius[idx].astype(np.float32),
        n_input=n,
        n_degenerate=int(degenerate.sum()),
    )


def _batch_of_one(g: Gaussian3D, cam: Camera) -> ProjectedBatch:
    scene = SceneSource(name="one",
                        positions=g.position[None],
                        covariances=g.covariance3d[None],
                        opacities=np.array([g.opacity], dtype=np.float32),
                        sh=g.sh[None])
    return project_scene(scene, cam)


def cull(g: Gaussian3D, cam: Camera) -> bool:
    """True when the Gaussian is visible (survives z and guard-band culling)."""
    t, center, cov2d, zok = _project_arrays(g.position[None], g.covariance3d[None], cam)
    if not bool(zok[0]):
        return False
    a, b, c = (float(cov2d[0, 0, 0]), float(cov2d[0, 0, 1]), float(cov2d[0, 1, 1]))
    det = a * c - b * b
    mid = 0.5 * (a + c)
    lam_max = mid + np.sqrt(max(mid * mid - det, 0.0))
    guard = CULL_GUARD * RADIUS_SCALE * np.sqrt(max(lam_max, 0.0))
    cxp, cyp = float(center[0, 0]), float(center[0, 1])
    return (-guard <= cxp <= cam.width + guard
            and -guard <= cyp <= cam.height + guard)


def project(g: Gaussian3D, cam: Camera) -> ProjectedGaussian:
    """Project one visible Gaussian (callers check cull() first)."""
    batch = _batch_of_one(g, cam)
    if batch.n_degenerate:
        raise ValueError(f"gaussian {g.id}: degenerate 2D covariance")
    if len(batch) == 0:
        raise ValueError(f"gaussian {g.id}: culled for this viewpoint")
    rec = batch.record(0)
    return ProjectedGaussian(id=g.id, depth=rec.depth, center2d=rec.center2d,
                             covariance2d=rec.covariance2d, conic=rec.conic,
                             color=rec.color, opacity=rec.opacity)
