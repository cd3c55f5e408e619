import numpy as np
import pytest

import tilesplat as ts
from tilesplat.model import TileLayout, group_rect, tile_rect


def test_tile_rect_origin():
    layout = TileLayout(width=128, height=128, tile_size=16, group_size=64)
    assert tile_rect(layout, 0) == (0, 0, 16, 16)


def test_tile_rect_clipped_last_column():
    layout = TileLayout(width=100, height=100, tile_size=16, group_size=16)
    # column 6 is the last; its rect clips to the image edge
    idx = 0 * layout.tiles_x + 6
    x0, y0, x1, y1 = tile_rect(layout, idx)
    assert (x0, x1) == (96, 100)
    assert (y0, y1) == (0, 16)


def test_tile_rect_out_of_range():
    layout = TileLayout(width=128, height=128, tile_size=16, group_size=64)
    with pytest.raises(IndexError):
        tile_rect(layout, layout.n_tiles)


@pytest.mark.parametrize("width,height,ts_", [(128, 128, 16), (100, 70, 16),
                                              (96, 96, 32), (33, 17, 8)])
def test_tiles_partition_image(width, height, ts_):
    layout = TileLayout(width=width, height=height, tile_size=ts_, group_size=ts_)
    cover = np.zeros((height, width), dtype=np.int32)
    for t in range(layout.n_tiles):
        x0, y0, x1, y1 = tile_rect(layout, t)
        cover[y0:y1, x0:x1] += 1
    assert (cover == 1).all()


def test_every_tile_lies_in_exactly_one_group():
    layout = TileLayout(width=100, height=100, tile_size=16, group_size=64)
    for t in range(layout.n_tiles):
        g = layout.group_of_tile(t)
        assert 0 <= g < layout.n_groups
        tx0, ty0, tx1, ty1 = tile_rect(layout, t)
        gx0, gy0, gx1, gy1 = group_rect(layout, g)
        assert gx0 <= tx0 and tx1 <= gx1 and gy0 <= ty0 and ty1 <= gy1


def test_group_counts_cover_all_tiles():
    layout = TileLayout(width=100, height=100, tile_size=16, group_size=64)
    assert layout.tiles_x == 7 and layout.groups_x == 2
    seen = {layout.group_of_tile(t) for t in range(layout.n_tiles)}
    assert seen == set(range(layout.n_groups))


def test_tile_bit_row_major():
    layout = TileLayout(width=128, height=128, tile_size=16, group_size=64)
    # tile (tx=5, ty=6) -> group (1, 1), local (1, 2) -> bit 9
    t = 6 * layout.tiles_x + 5
    assert layout.group_of_tile(t) == 1 * layout.groups_x + 1
    assert layout.tile_bit(t) == 2 * 4 + 1


def test_config_group_size_must_divide():
    cfg = ts.RenderConfig(tile_size=16, group_size=40, pipeline=ts.Pipeline.GROUPED)
    with pytest.raises(ts.ConfigError, match="group_size mod tile_size"):
        cfg.validate()


def test_config_bitmask_width_limit():
    cfg = ts.RenderConfig(tile_size=8, group_size=40, pipeline=ts.Pipeline.GROUPED)
    with pytest.raises(ts.ConfigError, match="16-bit"):
        cfg.validate()


def test_config_tightness_ordering():
    bad = ts.RenderConfig(tile_size=16, group_size=64,
                          tile_bounds=ts.Boundary.AABB,
                          group_bounds=ts.Boundary.ELLIPSE,
                          pipeline=ts.Pipeline.GROUPED)
    with pytest.raises(ts.ConfigError, match="looser"):
        bad.validate()
    ok = ts.RenderConfig(tile_size=16, group_size=64,
                         tile_bounds=ts.Boundary.ELLIPSE,
                         group_bounds=ts.Boundary.AABB,
                         pipeline=ts.Pipeline.GROUPED)
    ok.validate()


def test_config_baseline_ignores_group_fields():
    ts.RenderConfig(tile_size=16, group_size=40,
                    pipeline=ts.Pipeline.BASELINE).validate()


def test_bitmask_tiles_mapping():
    layout = TileLayout(width=128, height=128, tile_size=16, group_size=64)
    bm = ts.TileBitmask(gaussian_id=0, group_index=1, mask=0b1000000000000101)
    # group 1 starts at tile column 4; bits 0, 2, 15 map row-major
    assert bm.tiles(layout) == [4, 6, 3 * 8 + 7]


def test_bitmask_rejects_wide_mask():
    with pytest.raises(ValueError):
        ts.TileBitmask(gaussian_id=0, group_index=0, mask=1 << 16)


def test_gaussian_invariants_enforced():
    good = ts.Gaussian3D(id=0, position=(0, 0, 0), covariance3d=np.eye(3),
                         opacity=0.5, sh=np.zeros((1, 3)))
    assert good.opacity == 0.5
    with pytest.raises(ValueError, match="opacity"):
        ts.Gaussian3D(id=0, position=(0, 0, 0), covariance3d=np.eye(3),
                      opacity=1.5, sh=np.zeros((1, 3)))
    with pytest.raises(ValueError, match="PSD"):
        ts.Gaussian3D(id=0, position=(0, 0, 0), covariance3d=-np.eye(3),
                      opacity=0.5, sh=np.zeros((1, 3)))
    with pytest.raises(ValueError, match="sh length"):
        ts.Gaussian3D(id=0, position=(0, 0, 0), covariance3d=np.eye(3),
                      opacity=0.5, sh=np.zeros((2, 3)))


def test_camera_invariants():
    with pytest.raises(ValueError):
        ts.Camera(width=0, height=10, fx=1, fy=1, cx=0, cy=0,
                  world_to_camera=np.eye(4))
    with pytest.raises(ValueError):
        ts.Camera(width=10, height=10, fx=1, fy=1, cx=0, cy=0,
                  world_to_camera=np.eye(4), z_near=0.0)


def test_boundary_parse_and_rank():
    assert ts.Boundary.parse("ellipse") is ts.Boundary.ELLIPSE
    assert int(ts.Boundary.AABB) < int(ts.Boundary.OBB) < int(ts.Boundary.ELLIPSE)
    with pytest.raises(ts.ConfigError):
        ts.Boundary.parse("circle")
