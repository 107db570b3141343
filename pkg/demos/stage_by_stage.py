"""Run every stage through the command line on one convergent pair.

    python demos/stage_by_stage.py [workdir]

Renders a 30 degree convergent pair of a textured height field, then for
both rectification modes runs rectify, match, triangulate and eval, and
prints the distance of each cloud to the true surface.
"""

import contextlib
import io
import json
import sys
import tempfile
from pathlib import Path

from spherestereo.cli import main


def run(*argv) -> str:
    """Run one subcommand and return what it printed."""
    printed = io.StringIO()
    with contextlib.redirect_stdout(printed):
        code = main([str(a) for a in argv])
    if code != 0:
        raise SystemExit(f"{argv[0]} failed with exit code {code}")
    return printed.getvalue()


def demo(work: Path) -> None:
    data = work / "pair"
    info = run("synth", "--scene", "heightfield", "--convergence", "30", "--focal", "300",
               "--width", "320", "--height", "240", "--texture-scale", "0.01", "--out", data)
    # synth reports the true depth span in the rectified frame; pad it by 5%
    z_lo, z_hi = json.loads(info)["rectified_depth_span"]
    z_min, z_max = 0.95 * z_lo, 1.05 * z_hi
    for mode in ("frame", "spherical"):
        rect = work / mode / "rect"
        run("rectify", "--left", data / "left.png", "--right", data / "right.png",
            "--cameras", data / "cameras.json", "--mode", mode, "--out", rect)
        disp = work / mode / "disp.pfm"
        run("match", "--left", rect / "left.png", "--right", rect / "right.png",
            "--mask-left", rect / "mask_left.png", "--mask-right", rect / "mask_right.png",
            "--geom", rect / "geom.json", "--z-min", z_min, "--z-max", z_max,
            "--out", disp, "--preview", work / mode / "disp.png")
        cloud = work / mode / "cloud.ply"
        run("triangulate", "--disp", disp, "--geom", rect / "geom.json",
            "--colors", rect / "left.png", "--out", cloud)
        r = json.loads(run("eval", "--test", cloud, "--ref", data / "truth.ply",
                           "--out", work / mode / "report.json"))
        print(f"{mode:>9}: {r['count']} points, mean distance {r['mean_abs_dist']:.4f} m")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        demo(Path(sys.argv[1]))
    else:
        with tempfile.TemporaryDirectory() as tmp:
            demo(Path(tmp))
