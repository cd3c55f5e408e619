import numpy as np
import pytest

import tilesplat as ts


@pytest.fixture(params=["numba", "numpy"])
def both_backends(request):
    """Run a test under each kernel backend, restoring the previous one."""
    previous = ts.active_backend()
    try:
        ts.set_backend(request.param)
    except ts.ConfigError:
        pytest.skip(f"backend {request.param} unavailable")
    yield request.param
    ts.set_backend(previous)


def make_camera(width=96, height=96, fx=110.0, fy=110.0, eye=(0.0, 0.0, -4.0),
                target=(0.0, 0.0, 0.0), **kw):
    return ts.Camera.look_at(eye=eye, target=target, width=width, height=height,
                             fx=fx, fy=fy, **kw)


def pg_from_cov(cx, cy, cov, opacity=0.9, depth=1.0, color=(1.0, 0.0, 0.0), gid=0):
    """ProjectedGaussian with an explicit 2x2 covariance (f4, like the pipeline)."""
    cov = np.asarray(cov, dtype=np.float32)
    conic = np.linalg.inv(cov.astype(np.float64)).astype(np.float32)
    return ts.ProjectedGaussian(id=gid, depth=depth, center2d=(cx, cy),
                                covariance2d=cov, conic=conic,
                                color=color, opacity=opacity)


def rotated_cov(l1, l2, theta):
    ct, st = np.cos(theta), np.sin(theta)
    r = np.array([[ct, -st], [st, ct]])
    return r @ np.diag([l1, l2]) @ r.T


def random_projected(rng, n, width=128, height=128, max_sigma=8.0,
                     anisotropy=10.0):
    """A batch of random anisotropic screen-space gaussians as records."""
    out = []
    for i in range(n):
        l1 = rng.uniform(1.0, max_sigma) ** 2
        l2 = l1 / rng.uniform(1.0, anisotropy) ** 2
        cov = rotated_cov(l1, l2, rng.uniform(0, np.pi))
        cx = rng.uniform(-10, width + 10)
        cy = rng.uniform(-10, height + 10)
        out.append(pg_from_cov(cx, cy, cov, gid=i,
                               depth=float(rng.uniform(0.5, 10.0))))
    return out


@pytest.fixture
def camera():
    return make_camera()


@pytest.fixture
def small_scene():
    return ts.synth_scene(ts.SynthSpec(count=300, seed=3))
