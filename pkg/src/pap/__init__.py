"""Panoramic affordance pipeline.

Grid-prompted coarse localization over equirectangular panoramas,
adaptive gaze viewport extraction, cascaded open-vocabulary detection +
promptable segmentation through pluggable HTTP backends, inverse mask
reprojection, and an evaluation harness.
"""
from .backends import Detection, HttpBackend, ModelBackendConfig
from .dataset import AnnotationRecord, classify_difficulty, load_dataset
from .errors import PapError
from .evaluate import EvalConfig, evaluate_dataset
from .gaze import GazeParams, gaze_extract, plan_gaze, region_to_spherical_box
from .geometry import (AffineMap, CameraRay, ErpImage, SphericalCoord,
                       ViewportSpec, WorldRay, erp_pixel_from_spherical,
                       extract_viewport, focal_length, pixel_to_camera_ray,
                       reproject_mask_to_erp, rotate_ray, spherical_from_ray)
from .grid import CropRegion, GridSpec, cell_region, merge_cells, render_grid_overlay
from .metrics import MetricReport, aggregate, iou
from .mock_server import NoiseConfig, build_mock_app, mock_serve, oracle_backend_set
from .pipeline import BackendSet, PipelineConfig, PipelineResult, run_pipeline
from .routing import RoutingConfig, RoutingResult, RoutingState, parse_vlm_response, route

__version__ = "0.1.0"

__all__ = [
    "AffineMap", "AnnotationRecord", "BackendSet", "CameraRay", "CropRegion",
    "Detection", "ErpImage", "EvalConfig", "GazeParams", "GridSpec",
    "HttpBackend", "MetricReport", "ModelBackendConfig", "NoiseConfig",
    "PapError", "PipelineConfig", "PipelineResult", "RoutingConfig",
    "RoutingResult", "RoutingState", "SphericalCoord", "ViewportSpec",
    "WorldRay", "aggregate", "build_mock_app", "cell_region",
    "classify_difficulty", "erp_pixel_from_spherical", "evaluate_dataset",
    "extract_viewport", "focal_length", "gaze_extract", "iou", "load_dataset",
    "merge_cells", "mock_serve", "oracle_backend_set", "parse_vlm_response",
    "pixel_to_camera_ray", "plan_gaze", "region_to_spherical_box",
    "render_grid_overlay", "reproject_mask_to_erp", "rotate_ray", "route",
    "run_pipeline", "spherical_from_ray",
]
