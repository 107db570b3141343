import json
import subprocess
import sys

import numpy as np
import pytest

from spherestereo import io
from spherestereo.cli import main

SMALL = ["--focal", "300", "--width", "160", "--height", "128"]


@pytest.fixture(scope="module")
def rendered(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--scene", "plane", "--texture-scale", "0.04", *SMALL, "--out", str(out)]) == 0
    return out


def test_synth_outputs(rendered, capsys):
    for name in ("left.png", "right.png", "cameras.json", "depth_left.pfm", "depth_right.pfm", "truth.ply"):
        assert (rendered / name).is_file()
    depth = io.read_pfm(rendered / "depth_left.pfm")
    assert np.allclose(depth, 10.0)


@pytest.mark.parametrize("mode", ["frame", "spherical"])
def test_stage_chain(rendered, tmp_path, mode, capsys):
    rect = tmp_path / "rect"
    assert main(["rectify", "--left", str(rendered / "left.png"), "--right", str(rendered / "right.png"),
                 "--cameras", str(rendered / "cameras.json"), "--mode", mode, "--out", str(rect)]) == 0
    geom = json.loads((rect / "geom.json").read_text())
    assert len(geom["H_l"]) == 9 and geom["baseline"] == 1.0
    assert (rect / "grid.json").is_file() == (mode == "spherical")

    disp = tmp_path / "disp.pfm"
    assert main(["match", "--left", str(rect / "left.png"), "--right", str(rect / "right.png"),
                 "--mask-left", str(rect / "mask_left.png"), "--mask-right", str(rect / "mask_right.png"),
                 "--geom", str(rect / "geom.json"), "--z-min", "8", "--z-max", "12",
                 "--out", str(disp), "--preview", str(tmp_path / "disp.png")]) == 0
    assert (tmp_path / "disp.png").is_file()

    cloud = tmp_path / "cloud.ply"
    assert main(["triangulate", "--disp", str(disp), "--geom", str(rect / "geom.json"),
                 "--colors", str(rect / "left.png"), "--out", str(cloud)]) == 0
    pts = io.read_ply(cloud)
    assert pts.count > 1000 and pts.colors is not None
    assert np.median(np.abs(pts.points[:, 2] - 10.0)) < 0.1

    capsys.readouterr()
    report = tmp_path / "report.json"
    assert main(["eval", "--test", str(cloud), "--ref", str(rendered / "truth.ply"), "--out", str(report)]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed == json.loads(report.read_text())
    assert printed["count"] == pts.count and printed["points_used"] == pts.count


def test_match_explicit_range(rendered, tmp_path):
    # canonical pair: the raw images are already rectified
    out = tmp_path / "d.pfm"
    assert main(["match", "--left", str(rendered / "left.png"), "--right", str(rendered / "right.png"),
                 "--range", "20:40", "--out", str(out)]) == 0
    d = io.read_pfm(out)
    assert np.median(d[np.isfinite(d)]) == pytest.approx(30.0, abs=0.2)


def test_eval_compare(rendered, tmp_path, capsys):
    truth = str(rendered / "truth.ply")
    assert main(["eval", "--test", truth, "--compare", truth, "--ref", truth]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["completeness_gain_pct"] == 0.0 and rep["mean_abs_dist"] == 0.0


def test_experiment_and_pipeline(tmp_path, capsys):
    exp = tmp_path / "exp"
    assert main(["synth", "--experiment", "--pairs", "2", "--convergence", "30", "--focal", "150",
                 "--width", "160", "--height", "128", "--out", str(exp)]) == 0
    cfg = exp / "pipeline.cfg"
    assert capsys.readouterr().out.strip() == str(cfg)
    assert main(["pipeline", str(cfg), "--mode", "frame", "--out", str(tmp_path / "res")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["modes"]["frame"]["count"] > 0 and len(report["pairs"]) == 2
    assert (tmp_path / "res" / "frame.ply").is_file()


def test_print_defaults(capsys):
    assert main(["pipeline", "--print-defaults"]) == 0
    text = capsys.readouterr().out
    assert "p1 = 10" in text and "p2 = 120" in text and "mode = both" in text


@pytest.mark.parametrize("argv", [
    ["rectify", "--left", "nope.png", "--right", "nope.png", "--cameras", "c.json", "--out", "x"],
    ["match", "--left", "a.png"],                      # missing required arguments
    ["frobnicate"],
    ["pipeline"],
    ["synth", "--scene", "torus", "--out", "x"],
])
def test_validation_exit_code(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1


def test_bad_range_and_config(rendered, tmp_path):
    img = str(rendered / "left.png")
    assert main(["match", "--left", img, "--right", img, "--range", "9:3", "--out", str(tmp_path / "d")]) == 1
    (tmp_path / "bad.cfg").write_text("z_min = 9\nz_max = 3\n")
    assert main(["pipeline", str(tmp_path / "bad.cfg")]) == 1


def test_runtime_exit_code(tmp_path):
    # a 20 px image cannot hold the coarsest pyramid level
    tiny = tmp_path / "tiny.png"
    io.write_image(tiny, np.random.default_rng(0).uniform(0, 255, (20, 20)))
    assert main(["match", "--left", str(tiny), "--right", str(tiny), "--range", "0:4",
                 "--out", str(tmp_path / "d.pfm")]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "spherestereo", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for sub in ("synth", "rectify", "match", "triangulate", "eval", "pipeline"):
        assert sub in r.stdout
