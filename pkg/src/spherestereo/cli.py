"""Command-line entry point: per-stage subcommands and the end-to-end pipeline.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, StereoError
from .evaluate import cloud_to_cloud, evaluate
from .experiment import OBLIQUE_SCENE, rectified_depth_span, save_rendered_pair, write_oblique_experiment
from .geometry import Intrinsics, load_cameras
from .matcher import DisparityMap, SgmParams, hierarchical_match
from .pipeline import (
    derive_disparity_range,
    disparity_bounds,
    format_defaults,
    load_config,
    parse_kv,
    prepare_pair,
    run_pipeline,
    sgm_params_from_kv,
)
from .synth import SURFACES, SyntheticScene, make_oblique_pair, render_pair
from .triangulate import StereoGeometry, frame_disparity_cloud, spherical_disparity_cloud

log = logging.getLogger("spherestereo")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class InputError(Exception):
    """Bad command-line input, reported with exit code 1."""


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"missing file: {p}")
    return p


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise InputError(f"--range expects min:max, got {text!r}") from None
    if hi < lo:
        raise InputError(f"empty disparity range {text!r}")
    return lo, hi


def _load_params(path) -> SgmParams:
    if path is None:
        return SgmParams()
    return sgm_params_from_kv(parse_kv(_existing(path).read_text()))


# -- subcommands -------------------------------------------------------------------

def cmd_synth(args) -> int:
    intr = Intrinsics(args.focal, args.width, args.height)
    if args.experiment:
        scene = SyntheticScene(**{**OBLIQUE_SCENE, "seed": args.seed})
        ex = write_oblique_experiment(args.out, n_pairs=args.pairs, convergence=args.convergence,
                                      baseline=args.baseline, intrinsics=intr, scene=scene, jobs=args.jobs)
        print(ex.config)
        return EXIT_OK
    scene = SyntheticScene(kind=args.scene, depth=args.depth, seed=args.seed, texture_scale=args.texture_scale)
    view_l, view_r = make_oblique_pair(args.convergence, args.baseline, scene, intr, args.elevation)
    pair = render_pair(scene, view_l, view_r)
    paths = save_rendered_pair(pair, view_l, view_r, args.out)
    log.info("rendered %s scene, %d truth points", args.scene, pair.cloud.count)
    info = {k: str(v) for k, v in paths.items()}
    # depth bounds to pass on to match/pipeline (rectified-frame Z, not world Z)
    info["rectified_depth_span"] = list(rectified_depth_span(pair, view_l, view_r))
    print(json.dumps(info, indent=2))
    return EXIT_OK


def cmd_rectify(args) -> int:
    img_l, img_r = io.read_image(_existing(args.left)), io.read_image(_existing(args.right))
    view_l, view_r = load_cameras(_existing(args.cameras))
    prep = prepare_pair(img_l, img_r, view_l, view_r, args.mode, args.extent)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_image(out / "left.png", prep.left)
    io.write_image(out / "right.png", prep.right)
    io.write_mask(out / "mask_left.png", prep.mask_l)
    io.write_mask(out / "mask_right.png", prep.mask_r)
    sidecar = prep.geometry.to_dict()
    sidecar["H_l"] = [float(v) for v in prep.H_l.ravel()]
    sidecar["H_r"] = [float(v) for v in prep.H_r.ravel()]
    (out / "geom.json").write_text(json.dumps(sidecar, indent=2) + "\n")
    if prep.geometry.grid is not None:
        (out / "grid.json").write_text(json.dumps(prep.geometry.grid.to_dict(), indent=2) + "\n")
    log.info("%s epipolar images %dx%d written to %s", args.mode, prep.left.shape[1], prep.left.shape[0], out)
    return EXIT_OK


def cmd_match(args) -> int:
    left = io.read_image(_existing(args.left)).astype(np.float32)
    right = io.read_image(_existing(args.right)).astype(np.float32)
    if left.ndim == 3 or right.ndim == 3:
        raise InputError("match expects grayscale epipolar images (run rectify first)")
    ml = io.read_mask(_existing(args.mask_left)) if args.mask_left else None
    mr = io.read_mask(_existing(args.mask_right)) if args.mask_right else None
    params = _load_params(args.params)
    bounds = None
    if args.range:
        d_range = _parse_range(args.range)
    elif args.geom:
        geom = StereoGeometry.from_dict(json.loads(_existing(args.geom).read_text()))
        d_range = derive_disparity_range(geom, args.z_min, args.z_max, args.range_margin)
        bounds = disparity_bounds(geom, left.shape, args.z_min, args.z_max, args.range_margin)
    else:
        raise InputError("give --range min:max or --geom with --z-min/--z-max")
    disp = hierarchical_match(left, right, d_range, params, ml, mr, bounds=bounds)
    io.write_pfm(args.out, disp.data)
    if args.preview:
        io.disparity_preview(disp.data, args.preview)
    log.info("%d of %d pixels matched", int(disp.valid.sum()), disp.data.size)
    return EXIT_OK


def cmd_triangulate(args) -> int:
    data = io.read_pfm(_existing(args.disparity))
    geom = StereoGeometry.from_dict(json.loads(_existing(args.geom).read_text()))
    colors = io.read_image(_existing(args.colors)) if args.colors else None
    disp = DisparityMap(data, "frame" if geom.grid is None else "spherical")
    if geom.grid is None:
        cloud = frame_disparity_cloud(disp, geom, colors)
    else:
        cloud = spherical_disparity_cloud(disp, geom, colors)
    io.write_ply(cloud, args.out)
    log.info("%d points written to %s", cloud.count, args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    cloud = io.read_ply(_existing(args.cloud))
    reference = io.read_ply(_existing(args.reference)) if args.reference else None
    if args.compare:
        other = io.read_ply(_existing(args.compare))
        report = evaluate(cloud, other, reference, args.max_dist).to_dict()
    elif reference is not None:
        report = cloud_to_cloud(cloud, reference, args.max_dist).to_dict()
        report["count"] = cloud.count
    else:
        raise InputError("give --reference and/or --compare")
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    if args.print_defaults:
        sys.stdout.write(format_defaults())
        return EXIT_OK
    if args.config is None:
        raise InputError("pipeline needs a config file (see --print-defaults)")
    cfg = load_config(_existing(args.config))
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.mode is not None:
        cfg.mode = args.mode
    if args.out is not None:
        cfg.out = Path(args.out)
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    report = run_pipeline(cfg)
    sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spherestereo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic stereo pair with ground truth")
    p.add_argument("--scene", choices=SURFACES, default="ramp")
    p.add_argument("--convergence", type=float, default=0.0, help="toe-in angle between the cameras, degrees")
    p.add_argument("--baseline", type=float, default=1.0, help="metres")
    p.add_argument("--elevation", type=float, default=0.0, help="tilt about the baseline, degrees")
    p.add_argument("--depth", type=float, default=10.0, help="mean scene depth, metres")
    p.add_argument("--focal", type=float, default=500.0, help="focal length, pixels")
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--texture-scale", type=float, default=0.02, help="finest texture cell, metres")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--experiment", action="store_true",
                   help="write a multi-pair oblique dataset with reference cloud and pipeline config")
    p.add_argument("--pairs", type=int, default=10, help="pairs for --experiment")
    p.add_argument("--jobs", type=int, default=1, help="jobs written into the --experiment config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("rectify", help="planar or spherical epipolar images of a pair")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--cameras", required=True, help="camera pair JSON")
    p.add_argument("--mode", choices=("frame", "spherical"), default="frame")
    p.add_argument("--extent", choices=("fixed", "bbox"), default="fixed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_rectify)

    p = sub.add_parser("match", help="hierarchical SGM on epipolar images")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--mask-left")
    p.add_argument("--mask-right")
    p.add_argument("--range", help="disparity search range min:max")
    p.add_argument("--geom", help="geom.json from rectify; derives the range from --z-min/--z-max")
    p.add_argument("--z-min", type=float, default=1.0)
    p.add_argument("--z-max", type=float, default=100.0)
    p.add_argument("--range-margin", type=int, default=2)
    p.add_argument("--params", help="key = value file of SGM parameters")
    p.add_argument("--out", required=True, help="disparity PFM")
    p.add_argument("--preview", help="optional disparity PNG")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("triangulate", help="disparity map to point cloud")
    p.add_argument("--disparity", "--disp", required=True, help="PFM from match")
    p.add_argument("--geom", required=True, help="geom.json from rectify")
    p.add_argument("--colors", help="image sampled for point colours (the left epipolar image)")
    p.add_argument("--out", required=True, help="PLY")
    p.set_defaults(func=cmd_triangulate)

    p = sub.add_parser("eval", help="completeness and cloud-to-cloud accuracy")
    p.add_argument("--cloud", "--test", dest="cloud", required=True, help="cloud under test")
    p.add_argument("--compare", help="second cloud for the completeness comparison")
    p.add_argument("--reference", "--ref", dest="reference", help="reference cloud for accuracy")
    p.add_argument("--max-dist", type=float)
    p.add_argument("--out", help="write the JSON report here as well")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="end-to-end run over the configured pairs")
    p.add_argument("config", nargs="?")
    p.add_argument("--print-defaults", action="store_true", help="print a config with every default and exit")
    p.add_argument("--jobs", type=int, help="pairs processed in parallel")
    p.add_argument("--mode", choices=("frame", "spherical", "both"))
    p.add_argument("--out", help="output directory (overrides the config)")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (StereoError, ValueError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
