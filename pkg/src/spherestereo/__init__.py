"""Stereo reconstruction from convergent image pairs with planar or spherical epipolar images."""

from .errors import StereoError
from .geometry import CameraPose, CameraView, Intrinsics
from .matcher import DisparityMap, SgmParams, hierarchical_match
from .pipeline import PipelineConfig, load_config, run_pipeline
from .rectify import build_rectifying_rotation, compute_homographies
from .spherical import SphericalGrid
from .triangulate import PointCloud

__version__ = "0.1.0"

__all__ = [
    "CameraPose",
    "CameraView",
    "DisparityMap",
    "Intrinsics",
    "PipelineConfig",
    "PointCloud",
    "SgmParams",
    "SphericalGrid",
    "StereoError",
    "build_rectifying_rotation",
    "compute_homographies",
    "hierarchical_match",
    "load_config",
    "run_pipeline",
]
