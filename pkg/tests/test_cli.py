import csv
import json
import subprocess
import sys

import numpy as np
import pytest

import tilesplat as ts
from tilesplat.cli import CSV_VERSION, main

from conftest import make_camera


@pytest.fixture
def workdir(tmp_path):
    cam = make_camera(width=96, height=96, fx=110, fy=110)
    ts.save_camera(cam, tmp_path / "cam.json")
    json.dump({"count": 400, "seed": 5, "scale_range": [0.02, 0.1]},
              (tmp_path / "scene.json").open("w"))
    return tmp_path


def read_rows(path):
    with open(path) as f:
        assert f.readline().strip() == CSV_VERSION
        return list(csv.DictReader(f))


def test_render_writes_ppm_and_counters(workdir):
    out = workdir / "img.ppm"
    counters = workdir / "c.csv"
    rc = main(["render", "--scene", str(workdir / "scene.json"),
               "--camera", str(workdir / "cam.json"),
               "--pipeline", "grouped", "--tile-size", "16", "--group-size", "64",
               "--out", str(out), "--counters", str(counters)])
    assert rc == 0
    data = out.read_bytes()
    assert data.startswith(b"P6\n96 96\n255\n")
    assert len(data) == len(b"P6\n96 96\n255\n") + 96 * 96 * 3
    rows = read_rows(counters)
    assert len(rows) == 1
    # thresholds echoed in the metadata columns
    assert float(rows[0]["alpha_min"]) == pytest.approx(1 / 255)
    assert float(rows[0]["t_min"]) == pytest.approx(1e-4)
    assert rows[0]["pipeline"] == "grouped"
    assert "wall_clock_s" in rows[0]


def test_render_png(workdir):
    out = workdir / "img.png"
    rc = main(["render", "--scene", str(workdir / "scene.json"),
               "--camera", str(workdir / "cam.json"), "--out", str(out)])
    assert rc == 0
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_render_rejects_indivisible_group(workdir, capsys):
    rc = main(["render", "--scene", str(workdir / "scene.json"),
               "--camera", str(workdir / "cam.json"), "--pipeline", "grouped",
               "--tile-size", "16", "--group-size", "40",
               "--out", str(workdir / "x.ppm")])
    assert rc == 1
    assert "group_size mod tile_size" in capsys.readouterr().err


def test_compare_lossless_exit_zero(workdir):
    rc = main(["compare", "--scene", str(workdir / "scene.json"),
               "--camera", str(workdir / "cam.json"),
               "--pipeline-a", "baseline", "--tile-size-a", "16",
               "--pipeline-b", "grouped", "--tile-size-b", "16",
               "--group-size-b", "64"])
    assert rc == 0


def test_compare_identical_configs_exit_zero(workdir):
    args = ["compare", "--scene", str(workdir / "scene.json"),
            "--camera", str(workdir / "cam.json")]
    assert main(args) == 0


@pytest.fixture
def boundary_grazing_scene(tmp_path):
    """Opaque gaussians whose square boundaries admit tiles their 3-sigma
    ellipses miss, so aabb and ellipse rasterization genuinely differ."""
    cam = make_camera(width=96, height=96, fx=90, fy=90, eye=(0, 0, -3.5))
    ts.save_camera(cam, tmp_path / "cam.json")
    json.dump({"count": 300, "seed": 9, "scale_range": [0.03, 0.25],
               "opacity_range": [0.7, 0.95]},
              (tmp_path / "graze.json").open("w"))
    return tmp_path


def test_compare_boundary_methods_differ(boundary_grazing_scene, capsys):
    args = ["compare", "--scene", str(boundary_grazing_scene / "graze.json"),
            "--camera", str(boundary_grazing_scene / "cam.json"),
            "--pipeline-a", "baseline", "--tile-size-a", "16",
            "--tile-bounds-a", "aabb",
            "--pipeline-b", "baseline", "--tile-size-b", "16",
            "--tile-bounds-b", "ellipse"]
    rc = main(args)
    out = capsys.readouterr().out
    assert rc == 2
    assert "differing pixels: 0" not in out
    rc = main(args + ["--allow-diff"])
    assert rc == 0


def test_sweep_default_rows_and_equivalences(workdir):
    out = workdir / "sweep.csv"
    rc = main(["sweep", "--scene", str(workdir / "scene.json"),
               "--camera", str(workdir / "cam.json"), "--out", str(out),
               "--no-timing"])
    assert rc == 0
    rows = read_rows(out)
    assert len(rows) >= 9
    assert all("wall_clock_s" not in r for r in rows)

    by_tile = {int(r["tile_size"]): r for r in rows if r["pipeline"] == "baseline"}
    grouped = [r for r in rows if r["pipeline"] == "grouped"]
    row_1664 = next(r for r in grouped
                    if int(r["tile_size"]) == 16 and int(r["group_size"]) == 64)
    assert int(row_1664["group_entries"]) == int(by_tile[64]["tile_entries"])
    assert (int(row_1664["alpha_computations"])
            == int(by_tile[16]["alpha_computations"]))
    # per-gaussian tile counts fall monotonically with tile size
    means = [float(by_tile[t]["tiles_per_gaussian_mean"]) for t in (8, 16, 32, 64)]
    assert all(a > b for a, b in zip(means, means[1:]))
    assert float(row_1664["speedup_vs_baseline"]) > 0


def test_sweep_deterministic_across_threads(workdir):
    out1 = workdir / "t1.csv"
    out8 = workdir / "t8.csv"
    base = ["sweep", "--scene", str(workdir / "scene.json"),
            "--camera", str(workdir / "cam.json"), "--no-timing"]
    assert main(base + ["--threads", "1", "--out", str(out1)]) == 0
    assert main(base + ["--threads", "8", "--out", str(out8)]) == 0
    assert out1.read_bytes() == out8.read_bytes()


def test_stats_reports_sharing_per_tile_size(workdir):
    out = workdir / "stats.csv"
    rc = main(["stats", "--scene", str(workdir / "scene.json"),
               "--camera", str(workdir / "cam.json"), "--out", str(out),
               "--methods", "ellipse"])
    assert rc == 0
    rows = read_rows(out)
    assert [int(r["tile_size"]) for r in rows] == [8, 16, 32, 64]
    for r in rows:
        assert 0.0 <= float(r["shared_gaussian_pct"]) <= 100.0


def test_synth_round_trips_through_ply(workdir):
    ply = workdir / "synth.ply"
    rc = main(["synth", "--count", "50", "--seed", "3", "--out", str(ply)])
    assert rc == 0
    loaded = ts.load_ply(ply)
    direct = ts.synth_scene(ts.SynthSpec(count=50, seed=3))
    np.testing.assert_allclose(loaded.positions, direct.positions, atol=1e-6)
    np.testing.assert_allclose(loaded.covariances, direct.covariances, atol=1e-6)
    np.testing.assert_allclose(loaded.opacities, direct.opacities, atol=1e-6)


def test_render_background_and_cost_params(workdir):
    json.dump({"raster_units": 32}, (workdir / "hw.json").open("w"))
    out = workdir / "bg.ppm"
    counters = workdir / "bg.csv"
    rc = main(["render", "--scene", str(workdir / "scene.json"),
               "--camera", str(workdir / "cam.json"), "--bg", "1,0,0",
               "--cost-params", str(workdir / "hw.json"),
               "--out", str(out), "--counters", str(counters), "--no-timing"])
    assert rc == 0
    # empty corners show the red background
    pixels = np.frombuffer(out.read_bytes().split(b"255\n", 1)[1],
                           dtype=np.uint8).reshape(96, 96, 3)
    corners = pixels[[0, 0, -1, -1], [0, -1, 0, -1]]
    assert (corners[:, 0] > 200).any()
    row = read_rows(counters)[0]
    assert "wall_clock_s" not in row
    json.dump({"raster_units": 0}, (workdir / "hw.json").open("w"))
    rc = main(["render", "--scene", str(workdir / "scene.json"),
               "--camera", str(workdir / "cam.json"),
               "--cost-params", str(workdir / "hw.json"),
               "--out", str(out), "--counters", str(counters)])
    assert rc == 1


def test_console_entry_point(workdir):
    # the installed script must resolve and return a usage error cleanly
    proc = subprocess.run([sys.executable, "-m", "tilesplat.cli", "render",
                           "--scene", "missing.ply", "--camera", "nope.json",
                           "--out", "x.ppm"],
                          capture_output=True, text=True, cwd=workdir)
    assert proc.returncode == 1
    assert "error:" in proc.stderr
