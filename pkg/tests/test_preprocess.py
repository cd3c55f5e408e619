import numpy as np
import pytest

import tilesplat as ts
from tilesplat.model import LOWPASS_PX2
from tilesplat.preprocess import SH_C0, SH_C1, project_scene, sh_to_rgb

from conftest import make_camera


def identity_camera(width=64, height=64, fx=100.0, fy=100.0, cx=32.0, cy=32.0):
    return ts.Camera(width=width, height=height, fx=fx, fy=fy, cx=cx, cy=cy,
                     world_to_camera=np.eye(4), z_near=0.1)


def gaussian_at(pos, cov=None, opacity=0.5, sh=None):
    return ts.Gaussian3D(id=0, position=pos,
                         covariance3d=np.eye(3) if cov is None else cov,
                         opacity=opacity,
                         sh=np.zeros((1, 3)) if sh is None else sh)


def test_on_axis_projection():
    cam = identity_camera()
    pg = ts.project(gaussian_at((0, 0, 2), cov=0.001 * np.eye(3)), cam)
    np.testing.assert_allclose(pg.center2d, [32, 32], atol=1e-5)
    assert pg.depth == pytest.approx(2.0)


def test_identity_covariance_projection():
    # J at (0,0,2) is [[50,0,0],[0,50,0]], so cov2d = 2500 I + lowpass
    cam = identity_camera()
    pg = ts.project(gaussian_at((0, 0, 2)), cam)
    np.testing.assert_allclose(pg.covariance2d,
                               (2500.0 + LOWPASS_PX2) * np.eye(2), rtol=1e-5)


def _fd_jacobian(cam, pos, eps=1e-4):
    """Central differences of the world-to-pixel projection map."""
    def proj(p):
        t = cam.world_to_camera[:3, :3] @ p + cam.world_to_camera[:3, 3]
        return np.array([cam.fx * t[0] / t[2] + cam.cx,
                         cam.fy * t[1] / t[2] + cam.cy])
    j = np.zeros((2, 3))
    for k in range(3):
        d = np.zeros(3)
        d[k] = eps
        j[:, k] = (proj(pos + d) - proj(pos - d)) / (2 * eps)
    return j


def test_covariance_matches_finite_difference_jacobian():
    rng = np.random.default_rng(0)
    cam = make_camera(width=128, height=128, fx=140, fy=150)
    for _ in range(20):
        pos = rng.uniform(-1, 1, 3)
        scales = rng.uniform(0.05, 0.3, 3)
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        w, x, y, z = q
        # rotation from quaternion, then cov = R diag(s^2) R^T
        r = np.array([[1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                      [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                      [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)]])
        cov3 = r @ np.diag(scales ** 2) @ r.T
        g = gaussian_at(pos, cov=cov3)
        if not ts.cull(g, cam):
            continue
        pg = ts.project(g, cam)
        j = _fd_jacobian(cam, pos)
        expected = j @ cov3 @ j.T + LOWPASS_PX2 * np.eye(2)
        np.testing.assert_allclose(pg.covariance2d, expected, rtol=2e-3, atol=2e-3)


def test_conic_is_inverse(small_scene, camera):
    batch = project_scene(small_scene, camera)
    a, b, c = batch.cov[:, 0], batch.cov[:, 1], batch.cov[:, 2]
    ia, ib, ic = batch.conic[:, 0], batch.conic[:, 1], batch.conic[:, 2]
    cov = np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2).astype(np.float64)
    con = np.stack([np.stack([ia, ib], -1), np.stack([ib, ic], -1)], -2).astype(np.float64)
    prod = np.einsum("nij,njk->nik", con, cov)
    np.testing.assert_allclose(prod, np.broadcast_to(np.eye(2), prod.shape),
                               atol=1e-4, rtol=1e-4)


def test_cull_behind_camera():
    cam = identity_camera()
    assert not ts.cull(gaussian_at((0, 0, -1)), cam)


def test_cull_center_visible():
    cam = identity_camera()
    assert ts.cull(gaussian_at((0, 0, 5)), cam)


def test_cull_guard_band():
    cam = identity_camera()
    # center projects off-image; a large footprint keeps it within the guard
    # band while a tiny one gets culled
    pos = (1.0, 0.0, 2.0)  # projects to x = 32 + 50 = 82 > width 64
    big = gaussian_at(pos, cov=0.09 * np.eye(3))   # radius ~ 3*15 = 45 px
    tiny = gaussian_at(pos, cov=1e-6 * np.eye(3))  # radius ~ lowpass only
    assert ts.cull(big, cam)
    assert not ts.cull(tiny, cam)


def test_depth_positive_for_survivors(camera):
    scene = ts.synth_scene(ts.SynthSpec(count=500, seed=2, extent=3.0))
    batch = project_scene(scene, camera)
    assert (batch.depth > camera.z_near).all()
    # survivors keep scene order
    assert (np.diff(batch.ids) > 0).all()


def test_covariance_eigenvalues_floored_by_lowpass(small_scene, camera):
    batch = project_scene(small_scene, camera)
    a, b, c = (batch.cov[:, k].astype(np.float64) for k in range(3))
    lam_min = 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + b * b)
    assert lam_min.min() >= LOWPASS_PX2 * (1 - 1e-4)


def test_projection_linearity_in_covariance():
    cam = make_camera()
    rng = np.random.default_rng(3)
    pos = rng.uniform(-0.5, 0.5, 3)
    cov3 = np.diag(rng.uniform(0.05, 0.2, 3) ** 2)
    k = 0.5
    pg1 = ts.project(gaussian_at(pos, cov=cov3), cam)
    pg2 = ts.project(gaussian_at(pos, cov=k * k * cov3), cam)
    lhs = pg2.covariance2d - LOWPASS_PX2 * np.eye(2)
    rhs = k * k * (pg1.covariance2d - LOWPASS_PX2 * np.eye(2))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-5, atol=1e-5)


def test_degenerate_covariance_is_counted_not_crashed(camera):
    scene = ts.SceneSource(
        name="huge", positions=np.zeros((1, 3), dtype=np.float32),
        covariances=(np.eye(3, dtype=np.float32) * 1e38)[None],
        opacities=np.array([0.5], dtype=np.float32),
        sh=np.zeros((1, 1, 3), dtype=np.float32))
    batch = project_scene(scene, camera)
    assert batch.n_degenerate == 1
    assert len(batch) == 0


# --- spherical harmonics ------------------------------------------------------

def test_sh_degree0_zero_is_mid_gray():
    rgb = sh_to_rgb(np.zeros((1, 3)), np.array([0, 0, 1.0]))
    np.testing.assert_allclose(rgb, [0.5, 0.5, 0.5])


def test_sh_constant_verified_by_quadrature():
    # the DC basis is 1/(2 sqrt(pi)); check it integrates to unit L2 norm
    # over the sphere with a theta-phi product rule
    theta = np.linspace(0, np.pi, 400)
    phi = np.linspace(0, 2 * np.pi, 800, endpoint=False)
    dt = theta[1] - theta[0]
    dp = phi[1] - phi[0]
    norm = np.sum(SH_C0 ** 2 * np.sin(theta)) * len(phi) * dt * dp
    assert norm == pytest.approx(1.0, abs=2e-4)
    assert SH_C0 == pytest.approx(1.0 / (2.0 * np.sqrt(np.pi)), abs=1e-12)


def test_sh_degree1_bases_are_l2_normalized():
    # each degree-1 basis C1 * {y, z, x} must integrate to 1 over the sphere
    theta = np.linspace(0, np.pi, 800)
    phi = np.linspace(0, 2 * np.pi, 1600, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    x = np.sin(tt) * np.cos(pp)
    y = np.sin(tt) * np.sin(pp)
    z = np.cos(tt)
    w = np.sin(tt) * (theta[1] - theta[0]) * (phi[1] - phi[0])
    for axis in (x, y, z):
        norm = np.sum((SH_C1 * axis) ** 2 * w)
        assert norm == pytest.approx(1.0, abs=1e-4)


def test_sh_degree0_affine_in_dc():
    d = np.array([0.4, -0.9, 1.3])
    rgb = sh_to_rgb(np.array([d]).reshape(1, 3), np.array([0, 0, 1.0]))
    np.testing.assert_allclose(rgb, np.clip(0.28209479 * d + 0.5, 0, 1),
                               atol=1e-6)


def test_sh_degree1_view_dependent():
    rng = np.random.default_rng(8)
    sh = rng.normal(size=(4, 3)).astype(np.float32) * 0.2
    d = np.array([0.3, -0.5, 0.8])
    d /= np.linalg.norm(d)
    a = sh_to_rgb(sh, d)
    b = sh_to_rgb(sh, -d)
    assert np.abs(a - b).max() > 1e-4

    # reference: independent polynomial evaluation of the degree-1 expansion
    def ref(dirs):
        x, y, z = dirs
        val = SH_C0 * sh[0] - SH_C1 * y * sh[1] + SH_C1 * z * sh[2] - SH_C1 * x * sh[3]
        return np.clip(val + 0.5, 0, 1)

    np.testing.assert_allclose(a, ref(d), atol=1e-6)
    np.testing.assert_allclose(b, ref(-d), atol=1e-6)
    # zeroed degree-1 terms remove the view dependence
    sh0 = sh.copy()
    sh0[1:] = 0
    np.testing.assert_allclose(sh_to_rgb(sh0, d), sh_to_rgb(sh0, -d))


def test_sh_rejects_bad_length():
    with pytest.raises(ValueError):
        sh_to_rgb(np.zeros((5, 3)), np.array([0, 0, 1.0]))
