"""Scene loading: splat checkpoints (binary PLY), synthetic scenes, cameras."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import Camera, Gaussian3D, VALID_SH_LENGTHS

SH_C0 = 0.28209479177387814  # Y00 normalization, 1 / (2 sqrt(pi))


class SceneParseError(ValueError):
    """Malformed scene or camera file."""


@dataclass(frozen=True)
class SceneSource:
    """A loaded scene as struct-of-arrays (activations already applied)."""

    name: str
    positions: np.ndarray    # (N, 3) float32
    covariances: np.ndarray  # (N, 3, 3) float32
    opacities: np.ndarray    # (N,) float32
    sh: np.ndarray           # (N, K, 3) float32

    def __post_init__(self):
        n = self.positions.shape[0]
        if self.covariances.shape != (n, 3, 3) or self.opacities.shape != (n,) \
                or self.sh.shape[0] != n or self.sh.shape[2] != 3:
            raise ValueError("scene arrays have inconsistent shapes")
        if self.sh.shape[1] not in VALID_SH_LENGTHS:
            raise ValueError(f"sh coefficient count {self.sh.shape[1]} "
                             f"not in {VALID_SH_LENGTHS}")

    def __len__(self) -> int:
        return self.positions.shape[0]

    def gaussian(self, i: int) -> Gaussian3D:
        return Gaussian3D(id=i, position=self.positions[i],
                          covariance3d=self.covariances[i],
                          opacity=float(self.opacities[i]), sh=self.sh[i])

    @property
    def gaussians(self) -> list:
        return [self.gaussian(i) for i in range(len(self))]

    @classmethod
    def from_gaussians(cls, gaussians, name: str = "adhoc") -> "SceneSource":
        gs = list(gaussians)
        k = gs[0].sh.shape[0]
        return cls(
            name=name,
            positions=np.stack([g.position for g in gs]).astype(np.float32),
            covariances=np.stack([g.covariance3d for g in gs]).astype(np.float32),
            opacities=np.array([g.opacity for g in gs], dtype=np.float32),
            sh=np.stack([g.sh for g in gs]).astype(np.float32).reshape(len(gs), k, 3),
        )


def _quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """(N, 4) quaternions in (w, x, y, z) order -> (N, 3, 3) rotations."""
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    r = np.empty((q.shape[0], 3, 3), dtype=np.float64)
    r[:, 0, 0] = 1 - 2 * (y * y + z * z)
    r[:, 0, 1] = 2 * (x * y - w * z)
    r[:, 0, 2] = 2 * (x * z + w * y)
    r[:, 1, 0] = 2 * (x * y + w * z)
    r[:, 1, 1] = 1 - 2 * (x * x + z * z)
    r[:, 1, 2] = 2 * (y * z - w * x)
    r[:, 2, 0] = 2 * (x * z - w * y)
    r[:, 2, 1] = 2 * (y * z + w * x)
    r[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return r


def _rotation_to_quat(r: np.ndarray) -> np.ndarray:
    """(N, 3, 3) rotations -> (N, 4) quaternions in (w, x, y, z) order."""
    n = r.shape[0]
    q = np.empty((n, 4), dtype=np.float64)
    tr = r[:, 0, 0] + r[:, 1, 1] + r[:, 2, 2]
    for i in range(n):
        m = r[i]
        if tr[i] > 0:
            s = np.sqrt(tr[i] + 1.0) * 2
            q[i] = [0.25 * s, (m[2, 1] - m[1, 2]) / s,
                    (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
            s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
            q[i] = [(m[2, 1] - m[1, 2]) / s, 0.25 * s,
                    (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        elif m[1, 1] >= m[2, 2]:
            s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
            q[i] = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s,
                    0.25 * s, (m[1, 2] + m[2, 1]) / s]
        else:
            s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
            q[i] = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s,
                    (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    return q


def _covariance_from_scale_rot(scales: np.ndarray, rot: np.ndarray) -> np.ndarray:
    """R diag(s)^2 R^T for (N, 3) scales and (N, 3, 3) rotations."""
    rs = rot * (scales ** 2)[:, None, :]
    return np.einsum("nij,nkj->nik", rs, rot)


# --- binary PLY checkpoint format -------------------------------------------

_REST_COUNTS = {k: 3 * (k - 1) for k in VALID_SH_LENGTHS}


def _expected_properties(n_rest: int) -> list:
    props = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    props += [f"f_rest_{i}" for i in range(n_rest)]
    props += ["opacity", "scale_0", "scale_1", "scale_2",
              "rot_0", "rot_1", "rot_2", "rot_3"]
    return props


def load_ply(path) -> SceneSource:
    """Load a splat checkpoint PLY (binary little-endian).

    Raw fields are activated: opacity through a sigmoid, scales through exp,
    rotation quaternions (w, x, y, z) normalized; per-Gaussian covariance is
    R diag(s)^2 R^T. SH coefficients come out as (K, 3) with the DC term
    first and rest coefficients gathered per channel.
    """
    path = Path(path)
    data = path.read_bytes()
    header_end = data.find(b"end_header\n")
    if header_end < 0:
        raise SceneParseError(f"{path}: no end_header in PLY")
    header = data[:header_end].decode("ascii", errors="replace").splitlines()
    if not header or header[0].strip() != "ply":
        raise SceneParseError(f"{path}: missing 'ply' magic")

    fmt = None
    count = None
    names = []
    in_vertex = False
    for line in header[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                count = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            if parts[1] != "float":
                raise SceneParseError(
                    f"{path}: property {parts[-1]!r} has type {parts[1]!r}, expected float")
            names.append(parts[2])
    if fmt != "binary_little_endian":
        raise SceneParseError(f"{path}: format {fmt!r}, expected binary_little_endian")
    if count is None:
        raise SceneParseError(f"{path}: no vertex element")

    n_rest = sum(1 for n in names if n.startswith("f_rest_"))
    if n_rest not in _REST_COUNTS.values():
        raise SceneParseError(f"{path}: {n_rest} f_rest properties do not match "
                              f"any SH degree 0-3")
    for want in _expected_properties(n_rest):
        if want not in names:
            raise SceneParseError(f"{path}: missing property {want!r}")

    dtype = np.dtype([(n, "<f4") for n in names])
    payload = data[header_end + len(b"end_header\n"):]
    if len(payload) < count * dtype.itemsize:
        raise SceneParseError(f"{path}: truncated payload, expected "
                              f"{count * dtype.itemsize} bytes for {count} vertices, "
                              f"got {len(payload)}")
    rec = np.frombuffer(payload, dtype=dtype, count=count)

    positions = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
    raw_opacity = rec["opacity"].astype(np.float64)
    opacities = 1.0 / (1.0 + np.exp(-raw_opacity))
    scales = np.exp(np.stack([rec["scale_0"], rec["scale_1"], rec["scale_2"]],
                             axis=1).astype(np.float64))
    quats = np.stack([rec["rot_0"], rec["rot_1"], rec["rot_2"], rec["rot_3"]],
                     axis=1).astype(np.float64)
    cov = _covariance_from_scale_rot(scales, _quat_to_rotation(quats))

    k = n_rest // 3 + 1
    sh = np.zeros((count, k, 3), dtype=np.float64)
    for c in range(3):
        sh[:, 0, c] = rec[f"f_dc_{c}"]
        for j in range(1, k):
            sh[:, j, c] = rec[f"f_rest_{c * (k - 1) + (j - 1)}"]

    return SceneSource(name=path.stem,
                       positions=positions.astype(np.float32),
                       covariances=cov.astype(np.float32),
                       opacities=np.clip(opacities, 0.0, 1.0).astype(np.float32),
                       sh=sh.astype(np.float32))


def save_ply(scene: SceneSource, path) -> None:
    """Write a scene back to checkpoint PLY (inverse activations applied).

    Covariances are re-factored into scales and a rotation via an eigen
    decomposition, so the quaternion differs from any original one but the
    covariance round-trips.
    """
    n = len(scene)
    cov = scene.covariances.astype(np.float64)
    evals, evecs = np.linalg.eigh(cov)
    evals = np.maximum(evals, 1e-12)
    # eigh can return an improper rotation; flip one axis to get det +1
    det = np.linalg.det(evecs)
    evecs[det < 0, :, 0] *= -1.0
    scales = np.sqrt(evals)
    quats = _rotation_to_quat(evecs)

    op = np.clip(scene.opacities.astype(np.float64), 1e-7, 1 - 1e-7)
    raw_opacity = np.log(op / (1.0 - op))

    k = scene.sh.shape[1]
    n_rest = 3 * (k - 1)
    names = _expected_properties(n_rest)
    dtype = np.dtype([(nm, "<f4") for nm in names])
    rec = np.zeros(n, dtype=dtype)
    rec["x"], rec["y"], rec["z"] = scene.positions.T
    for c in range(3):
        rec[f"f_dc_{c}"] = scene.sh[:, 0, c]
        for j in range(1, k):
            rec[f"f_rest_{c * (k - 1) + (j - 1)}"] = scene.sh[:, j, c]
    rec["opacity"] = raw_opacity
    rec["scale_0"], rec["scale_1"], rec["scale_2"] = np.log(scales).T
    rec["rot_0"], rec["rot_1"], rec["rot_2"], rec["rot_3"] = quats.T

    header = ["ply", "format binary_little_endian 1.0",
              f"element vertex {n}"]
    header += [f"property float {nm}" for nm in names]
    header += ["end_header", ""]
    Path(path).write_bytes("\n".join(header).encode("ascii") + rec.tobytes())


# --- synthetic scenes --------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    """Parameters for a deterministic random scene."""

    count: int
    extent: float = 1.0                      # half-size of the position cube
    scale_range: tuple = (0.02, 0.2)         # per-axis gaussian scales, world units
    opacity_range: tuple = (0.2, 0.95)
    seed: int = 0

    def validate(self) -> "SynthSpec":
        if self.count <= 0:
            raise ValueError(f"count must be positive, got {self.count}")
        if self.extent <= 0:
            raise ValueError("extent must be positive")
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ValueError(f"degenerate scale_range {self.scale_range}")
        lo, hi = self.opacity_range
        if not 0 <= lo <= hi <= 1:
            raise ValueError(f"degenerate opacity_range {self.opacity_range}")
        return self

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        with open(path) as f:
            raw = json.load(f)
        known = {"count", "extent", "scale_range", "opacity_range", "seed"}
        unknown = set(raw) - known
        if unknown:
            raise SceneParseError(f"{path}: unknown synth spec fields {sorted(unknown)}")
        if "count" not in raw:
            raise SceneParseError(f"{path}: synth spec missing 'count'")
        for tup in ("scale_range", "opacity_range"):
            if tup in raw:
                raw[tup] = tuple(raw[tup])
        return cls(**raw)


def synth_scene(spec: SynthSpec) -> SceneSource:
    """Deterministic random scene; the same spec always yields the same arrays."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.count
    positions = rng.uniform(-spec.extent, spec.extent, size=(n, 3))
    scales = rng.uniform(spec.scale_range[0], spec.scale_range[1], size=(n, 3))
    # uniform random rotations (Shoemake)
    u1, u2, u3 = rng.uniform(size=(3, n))
    quats = np.stack([
        np.sqrt(u1) * np.cos(2 * np.pi * u3),
        np.sqrt(1 - u1) * np.sin(2 * np.pi * u2),
        np.sqrt(1 - u1) * np.cos(2 * np.pi * u2),
        np.sqrt(u1) * np.sin(2 * np.pi * u3),
    ], axis=1)
    cov = _covariance_from_scale_rot(scales, _quat_to_rotation(quats))
    opacities = rng.uniform(spec.opacity_range[0], spec.opacity_range[1], size=n)
    rgb = rng.uniform(size=(n, 3))
    sh = ((rgb - 0.5) / SH_C0)[:, None, :]  # degree 0 only
    return SceneSource(name=f"synth-{spec.count}-{spec.seed}",
                       positions=positions.astype(np.float32),
                       covariances=cov.astype(np.float32),
                       opacities=opacities.astype(np.float32),
                       sh=sh.astype(np.float32))


# --- cameras ------------------------------------------------------------------

_CAMERA_FIELDS = ("width", "height", "fx", "fy", "cx", "cy",
                  "world_to_camera", "z_near")


def load_camera(path) -> Camera:
    """Read a camera description JSON (world_to_camera: 16 numbers, row-major)."""
    with open(path) as f:
        raw = json.load(f)
    for name in _CAMERA_FIELDS:
        if name not in raw:
            raise SceneParseError(f"{path}: camera JSON missing field {name!r}")
    w2c = np.asarray(raw["world_to_camera"], dtype=np.float64)
    if w2c.size != 16:
        raise SceneParseError(f"{path}: world_to_camera must hold 16 numbers, "
                              f"got {w2c.size}")
    w2c = w2c.reshape(4, 4)
    if not np.isfinite(w2c).all() or abs(np.linalg.det(w2c)) < 1e-12:
        raise SceneParseError(f"{path}: world_to_camera is not invertible")
    try:
        return Camera(width=int(raw["width"]), height=int(raw["height"]),
                      fx=float(raw["fx"]), fy=float(raw["fy"]),
                      cx=float(raw["cx"]), cy=float(raw["cy"]),
                      world_to_camera=w2c, z_near=float(raw["z_near"]))
    except ValueError as exc:
        raise SceneParseError(f"{path}: {exc}") from exc


def save_camera(cam: Camera, path) -> None:
    with open(path, "w") as f:
        json.dump({"width": cam.width, "height": cam.height,
                   "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
                   "world_to_camera": [float(v) for v in cam.world_to_camera.ravel()],
                   "z_near": cam.z_near}, f, indent=2)


def load_scene(path) -> SceneSource:
    """Dispatch on extension: .ply checkpoint or .json synth spec."""
    p = Path(path)
    if p.suffix.lower() == ".ply":
        return load_ply(p)
    if p.suffix.lower() == ".json":
        return synth_scene(SynthSpec.from_json(p))
    raise SceneParseError(f"{p}: unsupported scene file type {p.suffix!r} "
                          f"(expected .ply or .json)")
