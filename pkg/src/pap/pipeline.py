"""End-to-end cascade: route -> gaze -> detect -> segment -> reproject.

Detection queries walk a fallback ladder (object_part, then object_name,
then a whole-viewport box straight to the segmenter). The first failing
stage aborts with a stage-tagged PipelineError carrying the partial
result; a fallback-box run that still grounds nothing (empty mask)
raises GroundingFailed.

With adaptive_gaze disabled the detector and segmenter see the raw ERP
crop of the routed region instead of the rectified viewport, and the
mask is pasted back instead of reprojected (the distortion-ablation
shape).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .backends import (Detection, ModelBackend, ovd_detect, sam_segment,
                       whole_frame_detection)
from .errors import GroundingFailed, NoDetection, PapError, PipelineError
from .gaze import GazeParams, gaze_extract
from .geometry import ErpImage, ViewportSpec, reproject_mask_to_erp
from .grid import CropRegion
from .image_io import resize
from .routing import RoutingConfig, RoutingResult, RoutingState, route


@dataclass(frozen=True)
class ErpWindow:
    """Raw ERP crop description used when adaptive gaze is disabled."""

    x0: int
    y0: int
    src_width: int
    src_height: int
    out_width: int
    out_height: int
    wraps_seam: bool = False


@dataclass(frozen=True)
class BackendSet:
    vlm: ModelBackend
    ovd: ModelBackend
    sam: ModelBackend

    def identifiers(self) -> dict:
        return {"vlm": self.vlm.describe(), "ovd": self.ovd.describe(),
                "sam": self.sam.describe()}


@dataclass(frozen=True)
class PipelineConfig:
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    gaze: GazeParams = field(default_factory=GazeParams)
    adaptive_gaze: bool = True
    workers: int = 1


@dataclass
class PipelineResult:
    routing: RoutingResult | None = None
    routing_state: RoutingState | None = None
    viewport_spec: ViewportSpec | ErpWindow | None = None
    viewport_image: np.ndarray | None = None
    detection: Detection | None = None
    mask_persp: np.ndarray | None = None
    mask_erp: np.ndarray | None = None
    timings_ms: dict = field(default_factory=dict)
    backend_ids: dict = field(default_factory=dict)


def viewport_extension(view: ViewportSpec | ErpWindow) -> dict:
    if isinstance(view, ViewportSpec):
        return {
            "kind": "perspective",
            "width": view.width,
            "height": view.height,
            "yaw_deg": view.yaw_deg,
            "pitch_deg": view.pitch_deg,
            "hfov_deg": view.hfov_deg,
        }
    return {
        "kind": "erp_window",
        "width": view.out_width,
        "height": view.out_height,
        "x0": float(view.x0),
        "y0": float(view.y0),
        "src_width": float(view.src_width),
        "src_height": float(view.src_height),
    }


def crop_erp_window(pixels: np.ndarray, window: ErpWindow) -> np.ndarray:
    """Crop + resize an ERP window; columns wrap across the seam."""
    cols = (np.arange(window.x0, window.x0 + window.src_width)) % pixels.shape[1]
    crop = np.take(pixels[window.y0: window.y0 + window.src_height], cols, axis=1)
    return resize(crop, window.out_width, window.out_height)


def raw_crop_window(region: CropRegion, erp_width: int, erp_height: int,
                    long_side: int) -> ErpWindow:
    """Integer ERP window covering a routed region, downscaled so the
    long side does not exceed ``long_side`` (never upscaled)."""
    x0 = int(math.floor(region.x0))
    y0 = max(0, int(math.floor(region.y0)))
    x1 = int(math.ceil(region.x0 + region.width))
    y1 = min(erp_height, int(math.ceil(region.y0 + region.height)))
    sw, sh = x1 - x0, y1 - y0
    scale = min(1.0, long_side / max(sw, sh))
    ow = max(2, int(round(sw * scale)))
    oh = max(2, int(round(sh * scale)))
    return ErpWindow(x0 % erp_width, y0, sw, sh, ow, oh, region.wraps_seam)


def paste_window_mask(mask: np.ndarray, window: ErpWindow,
                      erp_width: int, erp_height: int) -> np.ndarray:
    """Inverse of crop_erp_window for masks: nearest-neighbor un-resize,
    then paste at the window position (wrap-aware)."""
    sw, sh = window.src_width, window.src_height
    xs = np.minimum((np.arange(sw) * window.out_width) // sw, window.out_width - 1)
    ys = np.minimum((np.arange(sh) * window.out_height) // sh, window.out_height - 1)
    unresized = mask[np.ix_(ys, xs)]
    out = np.zeros((erp_height, erp_width), dtype=bool)
    cols = (np.arange(window.x0, window.x0 + sw)) % erp_width
    out[window.y0: window.y0 + sh, cols] = unresized
    return out


def run_pipeline(erp: ErpImage, task: str, backends: BackendSet,
                 cfg: PipelineConfig | None = None,
                 image_id: str | None = None) -> PipelineResult:
    cfg = cfg or PipelineConfig()
    pixels = erp.pixels if isinstance(erp, ErpImage) else np.asarray(erp)
    eh, ew = pixels.shape[:2]
    result = PipelineResult(backend_ids=backends.identifiers())

    def timed(stage, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except PipelineError:
            raise
        except PapError as exc:
            raise PipelineError(stage, exc, result) from exc
        finally:
            result.timings_ms[stage] = (time.perf_counter() - t0) * 1000.0
        return out

    def do_route():
        state, routed = route(erp if isinstance(erp, ErpImage) else ErpImage(pixels),
                              task, backends.vlm, cfg.routing, image_id=image_id)
        result.routing = routed
        result.routing_state = state
        return state

    state = timed("route", do_route)

    def do_view():
        if cfg.adaptive_gaze:
            image, spec = gaze_extract(pixels, state.crop_region, cfg.gaze,
                                       workers=cfg.workers)
        else:
            spec = raw_crop_window(state.crop_region, ew, eh,
                                   cfg.gaze.out_long_side_px)
            image = crop_erp_window(pixels, spec)
        result.viewport_spec = spec
        result.viewport_image = image
        return image, spec

    view_img, view = timed("gaze", do_view)
    view_ext = viewport_extension(view)

    def do_detect():
        routed = result.routing
        queries = []
        if routed.object_part:
            queries.append(routed.object_part)
        if routed.object_name and routed.object_name not in queries:
            queries.append(routed.object_name)
        for query in queries:
            try:
                return ovd_detect(backends.ovd, view_img, query,
                                  viewport=view_ext, image_id=image_id), False
            except NoDetection:
                continue
        h, w = view_img.shape[:2]
        label = routed.object_part or routed.object_name or task
        return whole_frame_detection(w, h, label), True

    detection, used_fallback_box = timed("detect", do_detect)
    result.detection = detection

    def do_segment():
        return sam_segment(backends.sam, view_img, detection,
                           viewport=view_ext, image_id=image_id)

    mask_persp = timed("segment", do_segment)
    result.mask_persp = mask_persp
    if used_fallback_box and not mask_persp.any():
        raise GroundingFailed("detect", NoDetection("all queries and the "
                              "whole-viewport fallback grounded nothing"), result)

    def do_reproject():
        if isinstance(view, ViewportSpec):
            return reproject_mask_to_erp(mask_persp, view, ew, eh,
                                         workers=cfg.workers)
        return paste_window_mask(mask_persp, view, ew, eh)

    result.mask_erp = timed("reproject", do_reproject)
    return result
