"""Core domain types shared by both rendering pipelines."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

ALPHA_MIN_DEFAULT = 1.0 / 255.0
T_MIN_DEFAULT = 1e-4
ALPHA_CLAMP = 0.99
LOWPASS_PX2 = 0.3
CULL_GUARD = 1.3
RADIUS_SCALE = 3.0  # 3-sigma footprint truncation

VALID_SH_LENGTHS = (1, 4, 9, 16)


class ConfigError(ValueError):
    """Invalid render configuration (violated invariant)."""


class Boundary(enum.IntEnum):
    """Gaussian-vs-rectangle influence test, ordered loosest to tightest.

    The integer value doubles as the tightness rank: a higher value never
    admits a rectangle that a lower value rejects.
    """

    AABB = 0
    OBB = 1
    ELLIPSE = 2

    @classmethod
    def parse(cls, name: str) -> "Boundary":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ConfigError(f"unknown boundary method {name!r}; "
                              f"expected one of aabb, obb, ellipse") from None


class Pipeline(enum.Enum):
    BASELINE = "baseline"
    GROUPED = "grouped"

    @classmethod
    def parse(cls, name: str) -> "Pipeline":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown pipeline {name!r}; "
                              f"expected baseline or grouped") from None


@dataclass(frozen=True)
class Gaussian3D:
    """One scene primitive: position, 3D covariance, opacity, SH color."""

    id: int
    position: np.ndarray        # (3,) world units
    covariance3d: np.ndarray    # (3, 3) symmetric PSD
    opacity: float              # in [0, 1]
    sh: np.ndarray              # (K, 3), K in {1, 4, 9, 16}

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float32).reshape(3)
        cov = np.asarray(self.covariance3d, dtype=np.float32).reshape(3, 3)
        sh = np.asarray(self.sh, dtype=np.float32).reshape(-1, 3)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "covariance3d", cov)
        object.__setattr__(self, "sh", sh)
        if not np.allclose(cov, cov.T, atol=1e-5):
            raise ValueError(f"gaussian {self.id}: covariance3d not symmetric")
        if np.linalg.eigvalsh(cov.astype(np.float64)).min() < -1e-5:
            raise ValueError(f"gaussian {self.id}: covariance3d not PSD")
        if not 0.0 <= self.opacity <= 1.0:
            raise ValueError(f"gaussian {self.id}: opacity {self.opacity} outside [0, 1]")
        if sh.shape[0] not in VALID_SH_LENGTHS:
            raise ValueError(f"gaussian {self.id}: sh length {sh.shape[0]} "
                             f"not in {VALID_SH_LENGTHS}")


@dataclass(frozen=True)
class ProjectedGaussian:
    """Per-view features of one surviving Gaussian."""

    id: int
    depth: float                # view-space z
    center2d: np.ndarray        # (2,) pixels
    covariance2d: np.ndarray    # (2, 2) pixels^2, low-pass included
    conic: np.ndarray           # (2, 2) inverse of covariance2d
    color: np.ndarray           # (3,) RGB in [0, 1]
    opacity: float

    def __post_init__(self):
        object.__setattr__(self, "center2d",
                           np.asarray(self.center2d, dtype=np.float32).reshape(2))
        object.__setattr__(self, "covariance2d",
                           np.asarray(self.covariance2d, dtype=np.float32).reshape(2, 2))
        object.__setattr__(self, "conic",
                           np.asarray(self.conic, dtype=np.float32).reshape(2, 2))
        object.__setattr__(self, "color",
                           np.asarray(self.color, dtype=np.float32).reshape(3))


@dataclass(frozen=True)
class Camera:
    """Pinhole camera; +z forward in view space, y down in pixel space."""

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    world_to_camera: np.ndarray  # (4, 4) rigid transform
    z_near: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "world_to_camera",
                           np.asarray(self.world_to_camera, dtype=np.float64).reshape(4, 4))
        if self.width <= 0 or self.height <= 0:
            raise ValueError("camera width/height must be positive")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("camera focal lengths must be positive")
        if self.z_near <= 0:
            raise ValueError("camera z_near must be positive")

    @property
    def rotation(self) -> np.ndarray:
        return self.world_to_camera[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_to_camera[:3, 3]

    @property
    def center_world(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    @classmethod
    def look_at(cls, eye, target, up=(0.0, -1.0, 0.0), *, width: int, height: int,
                fx: float, fy: float, cx: float | None = None, cy: float | None = None,
                z_near: float = 0.01) -> "Camera":
        """Build a camera at `eye` looking toward `target`.

        The default up vector (0, -1, 0) keeps world +y pointing down in the
        image, matching the y-down pixel convention.
        """
        eye = np.asarray(eye, dtype=np.float64)
        fwd = np.asarray(target, dtype=np.float64) - eye
        n = np.linalg.norm(fwd)
        if n == 0:
            raise ValueError("look_at: eye and target coincide")
        fwd = fwd / n
        upv = np.asarray(up, dtype=np.float64)
        right = np.cross(upv, fwd)
        rn = np.linalg.norm(right)
        if rn < 1e-12:
            raise ValueError("look_at: up vector parallel to view direction")
        right /= rn
        down = np.cross(fwd, right)
        rot = np.stack([right, down, fwd])  # world -> camera rows
        w2c = np.eye(4)
        w2c[:3, :3] = rot
        w2c[:3, 3] = -rot @ eye
        return cls(width=width, height=height, fx=fx, fy=fy,
                   cx=width / 2.0 if cx is None else cx,
                   cy=height / 2.0 if cy is None else cy,
                   world_to_camera=w2c, z_near=z_near)


@dataclass(frozen=True)
class RenderConfig:
    tile_size: int = 16
    group_size: int = 64
    tile_bounds: Boundary = Boundary.ELLIPSE
    group_bounds: Boundary = Boundary.ELLIPSE
    alpha_min: float = ALPHA_MIN_DEFAULT
    transmittance_min: float = T_MIN_DEFAULT
    background: tuple = (0.0, 0.0, 0.0)
    pipeline: Pipeline = Pipeline.BASELINE

    def validate(self) -> "RenderConfig":
        if self.tile_size <= 0:
            raise ConfigError(f"tile_size must be positive, got {self.tile_size}")
        if self.pipeline is Pipeline.GROUPED:
            if self.group_size % self.tile_size != 0:
                raise ConfigError(
                    f"group_size mod tile_size must be 0 "
                    f"(got group_size={self.group_size}, tile_size={self.tile_size})")
            per_side = self.group_size // self.tile_size
            if per_side * per_side > 16:
                raise ConfigError(
                    f"(group_size / tile_size)^2 = {per_side * per_side} exceeds "
                    f"the 16-bit bitmask width")
            # The per-tile mask test must be no looser than the group test,
            # otherwise masked tiles could name Gaussians absent from the
            # group list.
            if int(self.tile_bounds) < int(self.group_bounds):
                raise ConfigError(
                    f"tile_bounds ({self.tile_bounds.name}) is looser than "
                    f"group_bounds ({self.group_bounds.name}); the bitmask method "
                    f"must be at least as tight as the group method")
        return self


@dataclass(frozen=True)
class TileLayout:
    """Partition of a width x height image into tiles and aligned groups."""

    width: int
    height: int
    tile_size: int
    group_size: int
    tiles_x: int = field(init=False)
    tiles_y: int = field(init=False)
    groups_x: int = field(init=False)
    groups_y: int = field(init=False)
    tiles_per_group_side: int = field(init=False)

    def __post_init__(self):
        if self.group_size % self.tile_size != 0:
            raise ConfigError("group_size must be a multiple of tile_size")
        per_side = self.group_size // self.tile_size
        object.__setattr__(self, "tiles_x", -(-self.width // self.tile_size))
        object.__setattr__(self, "tiles_y", -(-self.height // self.tile_size))
        object.__setattr__(self, "groups_x", -(-self.tiles_x // per_side))
        object.__setattr__(self, "groups_y", -(-self.tiles_y // per_side))
        object.__setattr__(self, "tiles_per_group_side", per_side)

    @property
    def n_tiles(self) -> int:
        return self.tiles_x * self.tiles_y

    @property
    def n_groups(self) -> int:
        return self.groups_x * self.groups_y

    def group_of_tile(self, tile_index: int) -> int:
        tx = tile_index % self.tiles_x
        ty = tile_index // self.tiles_x
        return (ty // self.tiles_per_group_side) * self.groups_x + tx // self.tiles_per_group_side

    def tile_bit(self, tile_index: int) -> int:
        """Bit position of a tile within its group's 16-bit mask (row-major)."""
        tx = tile_index % self.tiles_x
        ty = tile_index // self.tiles_x
        return (ty % self.tiles_per_group_side) * self.tiles_per_group_side \
            + (tx % self.tiles_per_group_side)


@dataclass(frozen=True)
class TileBitmask:
    """Which tiles of one group a Gaussian influences (bit t = tile t, row-major)."""

    gaussian_id: int
    group_index: int
    mask: int

    def __post_init__(self):
        if not 0 <= self.mask <= 0xFFFF:
            raise ValueError(f"mask {self.mask:#x} does not fit in 16 bits")

    def tiles(self, layout: TileLayout) -> list:
        """Global tile indices named by the set bits."""
        per_side = layout.tiles_per_group_side
        gx = self.group_index % layout.groups_x
        gy = self.group_index // layout.groups_x
        out = []
        for bit in range(per_side * per_side):
            if self.mask >> bit & 1:
                tx = gx * per_side + bit % per_side
                ty = gy * per_side + bit // per_side
                out.append(ty * layout.tiles_x + tx)
        return out


def tile_rect(layout: TileLayout, tile_index: int, tile_size: int | None = None):
    """Pixel bounds [x0, x1) x [y0, y1) of a tile, clipped to the image."""
    ts = layout.tile_size if tile_size is None else tile_size
    if not 0 <= tile_index < layout.n_tiles:
        raise IndexError(f"tile_index {tile_index} out of range "
                         f"[0, {layout.n_tiles})")
    tx = tile_index % layout.tiles_x
    ty = tile_index // layout.tiles_x
    x0 = tx * ts
    y0 = ty * ts
    return x0, y0, min(x0 + ts, layout.width), min(y0 + ts, layout.height)


def group_rect(layout: TileLayout, group_index: int):
    """Pixel bounds of a group, clipped to the image."""
    if not 0 <= group_index < layout.n_groups:
        raise IndexError(f"group_index {group_index} out of range "
                         f"[0, {layout.n_groups})")
    gx = group_index % layout.groups_x
    gy = group_index // layout.groups_x
    gs = layout.group_size
    x0 = gx * gs
    y0 = gy * gs
    return x0, y0, min(x0 + gs, layout.width), min(y0 + gs, layout.height)
