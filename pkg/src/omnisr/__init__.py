"""Projection toolkit and super-resolution evaluation harness for 360° images."""

__version__ = "0.1.0"

from omnisr.geometry import LatLon, SphereDir, angular_error, dir_to_latlon, latlon_to_dir
from omnisr.projection import (
    ProjectionFormat,
    ProjectionGrid,
    active_mask,
    default_grid,
    eac_remap,
    eac_unmap,
    project,
    unproject,
)
from omnisr.image import PlanarImage
from omnisr.resample import InterpKernel, ProjectionConverter, convert, sample
from omnisr.scaler import BuiltinUpscaler, Downscaler, ExternalUpscaler, downscale, upscale
from omnisr.metrics import (
    MetricResult,
    erp_weights,
    psnr,
    solid_angle_weights,
    ssim,
    ws_psnr,
    y_channel,
)
from omnisr.pipeline import (
    PipelineConfig,
    PipelineReport,
    RoundTripSR,
    render_report,
    run_matrix,
    run_roundtrip,
)
from omnisr.analysis import DistortionStats, density_map, distortion_stats

__all__ = [
    "LatLon", "SphereDir", "angular_error", "dir_to_latlon", "latlon_to_dir",
    "ProjectionFormat", "ProjectionGrid", "active_mask", "default_grid",
    "eac_remap", "eac_unmap", "project", "unproject",
    "PlanarImage",
    "InterpKernel", "ProjectionConverter", "convert", "sample",
    "BuiltinUpscaler", "Downscaler", "ExternalUpscaler", "downscale", "upscale",
    "MetricResult", "erp_weights", "psnr", "solid_angle_weights", "ssim", "ws_psnr", "y_channel",
    "PipelineConfig", "PipelineReport", "RoundTripSR", "render_report", "run_matrix", "run_roundtrip",
    "DistortionStats", "density_map", "distortion_stats",
]
