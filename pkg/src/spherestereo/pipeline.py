"""End-to-end driver: rectify, (spherical warp), match, triangulate, evaluate."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, InvalidDepthBounds, StereoError
from .evaluate import ReferenceIndex, cloud_to_cloud, completeness
from .geometry import CameraView, load_cameras
from .matcher import DisparityMap, SgmParams, hierarchical_match
from .rectify import build_rectifying_rotation, compute_homographies, rectified_outline, warp_planar
from .sampling import to_gray
from .spherical import (
    TWO_PI,
    frame_ray_to_sphere_pixel,
    grid_for_frame,
    grid_for_rays,
    sphere_pixel_to_ray,
    spherical_warp_from_source,
)
from .triangulate import PointCloud, StereoGeometry, frame_disparity_cloud, spherical_disparity_cloud

log = logging.getLogger(__name__)

MODES = ("frame", "spherical", "both")


@dataclass(frozen=True)
class PairSpec:
    left: Path
    right: Path
    cameras: Path


@dataclass
class PipelineConfig:
    pairs: list[PairSpec] = field(default_factory=list)
    mode: str = "both"
    extent: str = "fixed"
    z_min: float = 1.0
    z_max: float = 100.0
    range_margin: int = 2
    sgm: SgmParams = field(default_factory=SgmParams)
    out: Path = Path("out")
    reference: Path | None = None
    max_dist: float | None = None
    save_intermediate: bool = True
    jobs: int = 1

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.extent not in ("fixed", "bbox"):
            raise ConfigError(f"extent must be 'fixed' or 'bbox', got {self.extent!r}")
        if not 0 < self.z_min < self.z_max or not np.isfinite(self.z_max):
            raise ConfigError(f"depth bounds must satisfy 0 < z_min < z_max < inf (got {self.z_min}, {self.z_max})")
        if not self.pairs:
            raise ConfigError("no pairs configured")
        for p in self.pairs:
            for path in (p.left, p.right, p.cameras):
                if not Path(path).is_file():
                    raise ConfigError(f"missing file: {path}")
        if self.reference is not None and not Path(self.reference).is_file():
            raise ConfigError(f"missing file: {self.reference}")

    @property
    def modes(self) -> tuple[str, ...]:
        return ("frame", "spherical") if self.mode == "both" else (self.mode,)


# -- flat key/value config ------------------------------------------------------

_SGM_KEYS = {f.name: f.type for f in fields(SgmParams)}
_SCALAR_KEYS = ("mode", "extent", "z_min", "z_max", "range_margin", "out", "reference", "max_dist",
                "save_intermediate", "jobs")


def parse_kv(text: str) -> list[tuple[str, str]]:
    items = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        items.append((key, value))
    return items


def _coerce_sgm(key: str, value: str):
    if key in ("lr_threshold", "uniqueness"):
        return float(value)
    if key == "levels":
        return None if value.lower() in ("auto", "none", "") else int(value)
    return int(value)


def sgm_params_from_kv(items, base: SgmParams | None = None) -> SgmParams:
    base = base or SgmParams()
    updates = {}
    for key, value in items:
        if key not in _SGM_KEYS:
            raise ConfigError(f"unknown SGM parameter {key!r}")
        updates[key] = _coerce_sgm(key, value)
    try:
        return replace(base, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> PipelineConfig:
    path = Path(path)
    root = path.parent
    cfg = PipelineConfig(out=root / "out")
    sgm_items = []

    def rel(p):
        p = Path(p)
        return p if p.is_absolute() else root / p

    for key, value in parse_kv(path.read_text()):
        try:
            _apply_key(cfg, key, value, rel, sgm_items)
        except ValueError:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from None
    cfg.sgm = sgm_params_from_kv(sgm_items)
    return cfg


def _apply_key(cfg: PipelineConfig, key: str, value: str, rel, sgm_items: list) -> None:
    if key == "pair":
        parts = value.split()
        if len(parts) != 3:
            raise ConfigError("pair needs: left_image right_image cameras.json")
        cfg.pairs.append(PairSpec(rel(parts[0]), rel(parts[1]), rel(parts[2])))
    elif key in _SGM_KEYS:
        sgm_items.append((key, value))
    elif key in ("z_min", "z_max"):
        setattr(cfg, key, float(value))
    elif key == "max_dist":
        cfg.max_dist = None if value.lower() in ("none", "") else float(value)
    elif key in ("range_margin", "jobs"):
        setattr(cfg, key, int(value))
    elif key == "save_intermediate":
        cfg.save_intermediate = value.lower() in ("1", "true", "yes", "on")
    elif key == "out":
        cfg.out = rel(value)
    elif key == "reference":
        cfg.reference = None if value.lower() in ("none", "") else rel(value)
    elif key in ("mode", "extent"):
        setattr(cfg, key, value)
    else:
        raise ConfigError(f"unknown config key {key!r}")


def format_defaults() -> str:
    cfg = PipelineConfig()
    lines = ["# pipeline configuration (key = value); paths are relative to this file",
             "# pair = left.png right.png cameras.json   (repeat per stereo pair)"]
    for key in _SCALAR_KEYS:
        lines.append(f"{key} = {getattr(cfg, key)}")
    for f in fields(SgmParams):
        v = getattr(cfg.sgm, f.name)
        lines.append(f"{f.name} = {'auto' if v is None else v}")
    return "\n".join(lines) + "\n"


# -- stages -----------------------------------------------------------------------

def derive_disparity_range(geom: StereoGeometry, z_min: float, z_max: float, margin: int = 0) -> tuple[int, int]:
    """Disparity search interval covering depths ``[z_min, z_max]`` (rectified-frame Z).

    Frame space uses ``d = b f / Z`` directly. For spherical maps the
    column disparity of a point depends on where it is in the grid, so the
    exact disparity is evaluated on a lattice of grid pixels at both depth
    bounds (it is monotone in depth along each ray).
    """
    if not (0 < z_min < z_max) or not np.isfinite(z_max):
        raise InvalidDepthBounds(f"need 0 < z_min < z_max < inf, got {z_min}, {z_max}")
    bf = geom.b * geom.f
    if geom.grid is None:
        lo, hi = bf / z_max, bf / z_min
    else:
        grid = geom.grid
        uu, vv = np.meshgrid(np.linspace(0, grid.n_phi - 1, 65), np.linspace(0, grid.n_lam - 1, 65))
        rays = sphere_pixel_to_ray(grid, uu, vv)
        ds = []
        for z in (z_min, z_max):
            p = rays * (z / rays[..., 2])[..., None]
            p[..., 0] -= geom.b
            ur, _ = frame_ray_to_sphere_pixel(grid, p, check=False)
            ds.append(uu - ur)
        lo, hi = float(np.min(ds[1])), float(np.max(ds[0]))
    return max(int(np.floor(lo)) - margin, 0), int(np.ceil(hi)) + margin


def disparity_bounds(geom: StereoGeometry, shape, z_min: float, z_max: float, margin: int = 0):
    """Per-pixel ``(lo, hi)`` disparity bounds for a spherical map, or None in frame space.

    Along each left ray the column disparity is monotone in depth, so the
    bounds are its values at ``z_max`` and ``z_min``.
    """
    if geom.grid is None:
        return None
    if not (0 < z_min < z_max) or not np.isfinite(z_max):
        raise InvalidDepthBounds(f"need 0 < z_min < z_max < inf, got {z_min}, {z_max}")
    uu, vv = np.meshgrid(np.arange(shape[1], dtype=float), np.arange(shape[0], dtype=float))
    rays = sphere_pixel_to_ray(geom.grid, uu, vv, check=False)
    ds = []
    for z in (z_min, z_max):
        with np.errstate(divide="ignore", invalid="ignore"):
            p = rays * (z / rays[..., 2])[..., None]
        p[..., 0] -= geom.b
        ur, _ = frame_ray_to_sphere_pixel(geom.grid, p, check=False)
        ds.append(uu - ur)
    hi, lo = ds
    ok = np.isfinite(lo) & np.isfinite(hi) & (rays[..., 2] > 0)
    lo = np.where(ok, np.floor(lo) - margin, 0)
    hi = np.where(ok, np.ceil(hi) + margin, 0)
    return np.maximum(lo, 0).astype(np.int32), np.maximum(hi, 0).astype(np.int32)


@dataclass(eq=False)
class ModeResult:
    mode: str
    cloud: PointCloud
    disparity: DisparityMap
    geometry: StereoGeometry
    left: np.ndarray
    right: np.ndarray
    mask_l: np.ndarray
    mask_r: np.ndarray
    d_range: tuple[int, int]


@dataclass(eq=False)
class PreparedPair:
    """Epipolar images of one pair in one space, ready for matching."""

    mode: str
    left: np.ndarray
    right: np.ndarray
    mask_l: np.ndarray
    mask_r: np.ndarray
    geometry: StereoGeometry
    H_l: np.ndarray
    H_r: np.ndarray


def prepare_pair(image_l, image_r, view_l: CameraView, view_r: CameraView, mode: str,
                 extent: str = "fixed") -> PreparedPair:
    """Planar (``frame``) or spherical epipolar images of a pair."""
    gray_l, gray_r = to_gray(image_l), to_gray(image_r)
    frame = build_rectifying_rotation(view_l.pose, view_r.pose)
    hp = compute_homographies(view_l, view_r, frame, extent=extent)
    h, w = hp.shape
    K_new = hp.K_new
    if mode == "frame":
        left, ml = warp_planar(gray_l, hp.H_l, w, h, hp.offset)
        right, mr = warp_planar(gray_r, hp.H_r, w, h, hp.offset)
        geom = StereoGeometry(frame, K_new, view_l.pose.c, hp.offset)
    elif mode == "spherical":
        s = TWO_PI * K_new.f
        if extent == "fixed":
            grid = grid_for_frame(K_new, (h, w), hp.offset, s=s)
        else:
            grid = grid_for_rays([rectified_outline(view_l, frame), rectified_outline(view_r, frame)], s)
        sl = spherical_warp_from_source(gray_l, hp.H_l, K_new, grid)
        sr = spherical_warp_from_source(gray_r, hp.H_r, K_new, grid)
        left, right, ml, mr = sl.pixels, sr.pixels, sl.mask, sr.mask
        if extent == "fixed":
            # restrict to what the planar rectified raster holds
            inside = _inside_raster(grid, K_new, (h, w), hp.offset)
            ml, mr = ml & inside, mr & inside
            left, right = np.where(ml, left, 0.0), np.where(mr, right, 0.0)
        geom = StereoGeometry(frame, K_new, view_l.pose.c, hp.offset, grid)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return PreparedPair(mode, left.astype(np.float32), right.astype(np.float32), ml, mr, geom, hp.H_l, hp.H_r)


def match_prepared(prep: PreparedPair, params: SgmParams, z_min: float, z_max: float,
                   range_margin: int = 2) -> ModeResult:
    geom = prep.geometry
    d_range = derive_disparity_range(geom, z_min, z_max, range_margin)
    bounds = disparity_bounds(geom, prep.left.shape, z_min, z_max, range_margin)
    disp = hierarchical_match(prep.left, prep.right, d_range, params, prep.mask_l, prep.mask_r, bounds=bounds)
    disp.space = prep.mode
    if prep.mode == "frame":
        cloud = frame_disparity_cloud(disp, geom)
    else:
        cloud = spherical_disparity_cloud(disp, geom)
    return ModeResult(prep.mode, cloud, disp, geom, prep.left, prep.right, prep.mask_l, prep.mask_r, d_range)


def process_pair(image_l, image_r, view_l: CameraView, view_r: CameraView, mode: str,
                 params: SgmParams, z_min: float, z_max: float, extent: str = "fixed",
                 range_margin: int = 2) -> ModeResult:
    """Run one stereo pair through one rectification mode."""
    prep = prepare_pair(image_l, image_r, view_l, view_r, mode, extent)
    return match_prepared(prep, params, z_min, z_max, range_margin)


def _inside_raster(grid, K_new, shape, offset):
    uu, vv = np.meshgrid(np.arange(grid.n_phi, dtype=float), np.arange(grid.n_lam, dtype=float))
    rays = sphere_pixel_to_ray(grid, uu, vv, check=False)
    x = K_new.f * rays[..., 0] / rays[..., 2] + K_new.cx - offset[0]
    y = K_new.f * rays[..., 1] / rays[..., 2] + K_new.cy - offset[1]
    h, w = shape
    return (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)


def save_mode_result(res: ModeResult, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    io.write_image(outdir / "left.png", res.left)
    io.write_image(outdir / "right.png", res.right)
    io.write_mask(outdir / "mask_left.png", res.mask_l)
    io.write_mask(outdir / "mask_right.png", res.mask_r)
    io.write_pfm(outdir / "disp.pfm", res.disparity.data)
    io.disparity_preview(res.disparity.data, outdir / "disp.png")
    (outdir / "geom.json").write_text(json.dumps(res.geometry.to_dict(), indent=2))
    io.write_ply(res.cloud, outdir / "cloud.ply")


def _run_pair(args):
    index, pair, cfg = args
    t0 = time.perf_counter()
    img_l, img_r = io.read_image(pair.left), io.read_image(pair.right)
    view_l, view_r = load_cameras(pair.cameras)
    out = {}
    timings = {}
    for mode in cfg.modes:
        t = time.perf_counter()
        try:
            res = process_pair(img_l, img_r, view_l, view_r, mode, cfg.sgm, cfg.z_min, cfg.z_max,
                               cfg.extent, cfg.range_margin)
        except StereoError as exc:
            log.warning("pair %d (%s) failed: %s", index, mode, exc)
            out[mode] = None
            continue
        if cfg.save_intermediate:
            save_mode_result(res, Path(cfg.out) / f"pair_{index:02d}" / mode)
        out[mode] = res.cloud
        timings[mode] = time.perf_counter() - t
        log.info("pair %d %s: %d points in %.2fs", index, mode, res.cloud.count, timings[mode])
    timings["total"] = time.perf_counter() - t0
    return out, timings


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(type(v))


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Process every configured pair, merge clouds per mode and write the report.

    Returns the report dictionary (also written to ``<out>/report.json``).
    """
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(i, p, cfg) for i, p in enumerate(cfg.pairs)]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_pair, tasks))
    else:
        results = [_run_pair(t) for t in tasks]

    if all(r[0].get(m) is None for r in results for m in cfg.modes):
        raise StereoError("all pairs failed")

    reference = ReferenceIndex(io.read_ply(cfg.reference)) if cfg.reference is not None else None
    report: dict = {"modes": {}, "pairs": []}
    merged = {}
    for mode in cfg.modes:
        clouds = [r[0][mode] for r in results if r[0].get(mode) is not None]
        cloud = PointCloud.concatenate(clouds)
        merged[mode] = cloud
        io.write_ply(cloud, out / f"{mode}.ply")
        entry = {"count": cloud.count}
        if reference is not None and cloud.count:
            acc = cloud_to_cloud(cloud, reference, cfg.max_dist)
            entry.update(mean_abs_dist=acc.mean_abs_dist, std_dist=acc.std_dist, points_used=acc.points_used)
        report["modes"][mode] = entry
    for i, (res, _) in enumerate(results):
        row = {"index": i}
        for mode in cfg.modes:
            c = res.get(mode)
            row[mode] = None if c is None else c.count
            if c is not None and reference is not None and c.count:
                row[f"{mode}_mean_abs_dist"] = cloud_to_cloud(c, reference, cfg.max_dist).mean_abs_dist
        report["pairs"].append(row)
    if cfg.mode == "both":
        comp = completeness(merged["spherical"], merged["frame"])
        report["comparison"] = {"count_spherical": comp.count_a, "count_frame": comp.count_b,
                                "completeness_gain_pct": comp.gain_pct}
        if reference is not None:
            report["comparison"]["mean_abs_dist_frame"] = report["modes"]["frame"].get("mean_abs_dist")
            report["comparison"]["mean_abs_dist_spherical"] = report["modes"]["spherical"].get("mean_abs_dist")
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n")
    summary = {"timings_s": [t for _, t in results], "jobs": cfg.jobs}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    return report

