"""Writers for synthetic datasets: rendered pairs, cameras, truth and a ready-to-run config."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import io
from .geometry import CameraView, Intrinsics, save_cameras
from .rectify import build_rectifying_rotation
from .synth import RenderedPair, SyntheticScene, make_oblique_pair, render_pair, surface_samples

# the oblique comparison scene: gentle relief under a fine, high-contrast texture
OBLIQUE_SCENE = dict(kind="heightfield", depth=10.0, relief=0.15, relief_scale=0.5, texture_scale=0.006)


def save_rendered_pair(pair: RenderedPair, view_l: CameraView, view_r: CameraView, outdir,
                       prefix: str = "", truth_cloud: bool = True) -> dict:
    """Write images (PNG), cameras (JSON), true depth (PFM) and the true cloud (PLY)."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "left": out / f"{prefix}left.png",
        "right": out / f"{prefix}right.png",
        "cameras": out / f"{prefix}cameras.json",
        "depth_left": out / f"{prefix}depth_left.pfm",
        "depth_right": out / f"{prefix}depth_right.pfm",
        "cloud": out / f"{prefix}truth.ply",
    }
    io.write_image(paths["left"], pair.left.image)
    io.write_image(paths["right"], pair.right.image)
    save_cameras(paths["cameras"], view_l, view_r)
    io.write_pfm(paths["depth_left"], np.nan_to_num(pair.left.depth, nan=0.0))
    io.write_pfm(paths["depth_right"], np.nan_to_num(pair.right.depth, nan=0.0))
    if truth_cloud:
        io.write_ply(pair.cloud, paths["cloud"])
    else:
        del paths["cloud"]
    return paths


def rectified_depth_span(pair: RenderedPair, view_l: CameraView, view_r: CameraView) -> tuple[float, float]:
    """Min and max rectified-frame depth of the true surface points."""
    frame = build_rectifying_rotation(view_l.pose, view_r.pose)
    z = (pair.cloud.points - view_l.pose.c) @ frame.R[2]
    return float(z.min()), float(z.max())


@dataclass
class Experiment:
    config: Path
    reference: Path
    convergences: list[float]
    z_bounds: tuple[float, float]


def aim_points(n: int, step: float) -> list[tuple[float, float]]:
    """Aim points on rows of five, ``step`` metres apart, centred on the origin."""
    cols = min(n, 5)
    rows = (n + cols - 1) // cols
    return [(step * (i % cols - (cols - 1) / 2), step * (i // cols - (rows - 1) / 2)) for i in range(n)]


def write_oblique_experiment(outdir, n_pairs: int = 10, convergence=40.0, baseline: float = 1.0,
                             intrinsics: Intrinsics = Intrinsics(350.0, 384, 288), scene: SyntheticScene | None = None,
                             mode: str = "both", jobs: int = 1, extent: str = "fixed", aim_step: float = 0.25,
                             depth_pad: float = 0.05, spacing: float | None = None) -> Experiment:
    """Render ``n_pairs`` convergent rigs looking at different points of one height field.

    ``convergence`` is one angle for every pair or a ``(first, last)`` span.
    Because the surface is shared, one reference cloud serves the whole
    run: the true surface sampled on a regular lattice over the union of the
    visible footprints, at ``spacing`` metres (default half the
    pixel footprint at the nearest rectified depth).
    """
    scene = scene or SyntheticScene(**OBLIQUE_SCENE)
    if scene.kind != "heightfield":
        raise ValueError("aim points move the rig over the surface, which only a height field leaves unchanged")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    if np.ndim(convergence) == 0:
        convs = [float(convergence)] * n_pairs
    else:
        convs = [float(c) for c in np.linspace(convergence[0], convergence[1], n_pairs)]
    lines = []
    lo, hi = np.full(2, np.inf), np.full(2, -np.inf)
    zlo, zhi = np.inf, -np.inf
    for i, (conv, aim) in enumerate(zip(convs, aim_points(n_pairs, aim_step))):
        view_l, view_r = make_oblique_pair(conv, baseline, replace(scene, center=aim), intrinsics)
        pair = render_pair(scene, view_l, view_r)
        sub = out / f"pair_{i:02d}"
        save_rendered_pair(pair, view_l, view_r, sub, truth_cloud=False)
        a, b = rectified_depth_span(pair, view_l, view_r)
        zlo, zhi = min(zlo, a), max(zhi, b)
        lo = np.minimum(lo, pair.cloud.points[:, :2].min(axis=0))
        hi = np.maximum(hi, pair.cloud.points[:, :2].max(axis=0))
        lines.append(f"pair = {sub.name}/left.png {sub.name}/right.png {sub.name}/cameras.json")
    reference = out / "reference.ply"
    spacing = spacing or 0.5 * zlo / intrinsics.f
    io.write_ply(surface_samples(scene, (lo[0], hi[0]), (lo[1], hi[1]), spacing), reference)
    z_bounds = (zlo * (1.0 - depth_pad), zhi * (1.0 + depth_pad))
    lines += [
        f"mode = {mode}",
        f"extent = {extent}",
        f"z_min = {z_bounds[0]!r}",
        f"z_max = {z_bounds[1]!r}",
        "reference = reference.ply",
        "out = result",
        f"jobs = {jobs}",
    ]
    config = out / "pipeline.cfg"
    config.write_text("\n".join(lines) + "\n")
    return Experiment(config, reference, convs, z_bounds)
