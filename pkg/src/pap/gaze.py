"""Adaptive gaze: turn a routed panorama region into a viewport.

The gaze centers on the region's spherical midpoint and scales the FoV
to the region's angular extent plus a redundancy margin (default 10
degrees per side) so objects grazing a grid boundary are still fully
covered. Output resolution is fixed by the long side; the short side
follows the angular aspect so the derived vertical FoV reaches the
target, with the aspect limited to [1/3, 3].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateRegion
from .geometry import ErpImage, ViewportSpec, extract_viewport
from .grid import CropRegion

POLE_CLAMP_DEG = 89.0


@dataclass(frozen=True)
class GazeParams:
    margin_deg: float = 10.0
    max_hfov_deg: float = 150.0
    min_hfov_deg: float = 20.0
    out_long_side_px: int = 1024

    def __post_init__(self):
        if not 0 <= self.margin_deg < 45:
            raise ValueError(f"margin_deg must be in [0, 45), got {self.margin_deg}")
        if not 0 < self.min_hfov_deg <= self.max_hfov_deg < 180:
            raise ValueError("need 0 < min_hfov <= max_hfov < 180")


class SphericalBox(NamedTuple):
    """Angular bounds in degrees; lon_hi may exceed 180 for seam-wrapping
    regions (unwrapped representation, lon_hi - lon_lo < 360)."""

    lon_lo_deg: float
    lon_hi_deg: float
    lat_lo_deg: float
    lat_hi_deg: float


def region_to_spherical_box(region: CropRegion, erp_width: int, erp_height: int) -> SphericalBox:
    """Linear pixel->angle conversion of a full-res ERP region's edges."""
    lon_lo = (region.x0 / erp_width - 0.5) * 360.0
    lon_hi = ((region.x0 + region.width) / erp_width - 0.5) * 360.0
    lat_lo = (region.y0 / erp_height - 0.5) * 180.0
    lat_hi = ((region.y0 + region.height) / erp_height - 0.5) * 180.0
    return SphericalBox(lon_lo, lon_hi, lat_lo, lat_hi)


def _normalize_deg(a: float) -> float:
    return (a + 180.0) % 360.0 - 180.0


def _boundary_needs(box: SphericalBox, yaw: float, pitch: float,
                    samples_per_edge: int = 48) -> tuple[float, float]:
    """Max |X/Z| and |Y/Z| over the region boundary in the (yaw, pitch)
    camera frame; inf when any boundary point falls behind the camera."""
    from .geometry import direction_from_spherical, rotation_matrix

    t = np.linspace(0.0, 1.0, samples_per_edge)
    lon_lo, lon_hi = math.radians(box.lon_lo_deg), math.radians(box.lon_hi_deg)
    lat_lo = math.radians(max(-89.9, box.lat_lo_deg))
    lat_hi = math.radians(min(89.9, box.lat_hi_deg))
    lons = np.concatenate([
        lon_lo + t * (lon_hi - lon_lo), np.full_like(t, lon_hi),
        lon_hi + t * (lon_lo - lon_hi), np.full_like(t, lon_lo)])
    lats = np.concatenate([
        np.full_like(t, lat_lo), lat_lo + t * (lat_hi - lat_lo),
        np.full_like(t, lat_hi), lat_hi + t * (lat_lo - lat_hi)])
    dx, dy, dz = direction_from_spherical(lons, lats)
    r_inv = rotation_matrix(yaw, pitch).T
    xc = r_inv[0, 0] * dx + r_inv[0, 1] * dy + r_inv[0, 2] * dz
    yc = r_inv[1, 0] * dx + r_inv[1, 1] * dy + r_inv[1, 2] * dz
    zc = r_inv[2, 0] * dx + r_inv[2, 1] * dy + r_inv[2, 2] * dz
    if np.any(zc <= 1e-9):
        return math.inf, math.inf
    return float(np.abs(xc / zc).max()), float(np.abs(yc / zc).max())


def plan_gaze(box: SphericalBox, params: GazeParams | None = None) -> ViewportSpec:
    """Choose yaw/pitch/FoV/dims for a region's angular box.

    FoV is the region's angular span plus the margin on each side, but
    never less than what the region boundary needs in the projected frame
    (lon/lat rectangles bulge past their lat span under the pitch
    rotation, so span + margin alone can clip corners of wide regions).
    """
    params = params or GazeParams()
    lon_span = box.lon_hi_deg - box.lon_lo_deg
    lat_span = box.lat_hi_deg - box.lat_lo_deg
    if lon_span <= 0 or lat_span <= 0:
        raise DegenerateRegion(f"zero-area box {box}")

    m = params.margin_deg
    eps = 0.2  # slack over the exact boundary needs, degrees
    yaw = _normalize_deg((box.lon_lo_deg + box.lon_hi_deg) / 2.0)
    pitch = (box.lat_lo_deg + box.lat_hi_deg) / 2.0
    touches_pole = (box.lat_hi_deg + m >= POLE_CLAMP_DEG
                    or box.lat_lo_deg - m <= -POLE_CLAMP_DEG)

    width = height = params.out_long_side_px
    hfov = params.max_hfov_deg
    for _ in range(4):
        hfov = lon_span + 2 * m
        vfov_target = lat_span + 2 * m
        if touches_pole:
            # pole caps cannot be enclosed by any pinhole frustum; widen
            # the horizontal FoV instead and let the pitch clamp decide
            # how much of the cap stays visible (documented limitation)
            hfov = params.max_hfov_deg
        else:
            need_x, need_y = _boundary_needs(box, yaw, pitch)
            if math.isfinite(need_x):
                hfov = max(hfov, 2 * math.degrees(math.atan(need_x)) + eps)
            if math.isfinite(need_y):
                vfov_target = max(vfov_target,
                                  2 * math.degrees(math.atan(need_y)) + eps)
            # keep the aspect clamp from capping the vertical FoV below target
            hfov = max(hfov, 2 * math.degrees(math.atan(
                math.tan(math.radians(min(vfov_target, 178.0)) / 2.0) / 3.0)))
        vfov_target = min(vfov_target, 2 * POLE_CLAMP_DEG)
        hfov = min(max(hfov, params.min_hfov_deg), params.max_hfov_deg)

        ratio = math.tan(math.radians(vfov_target) / 2.0) / math.tan(math.radians(hfov) / 2.0)
        aspect = min(3.0, max(1.0 / 3.0, 1.0 / ratio))  # W/H
        long_side = params.out_long_side_px
        if aspect >= 1.0:
            width, height = long_side, max(2, math.ceil(long_side / aspect))
        else:
            width, height = max(2, math.floor(long_side * aspect)), long_side

        vfov_real = ViewportSpec(yaw, 0.0, hfov, width, height).vfov_deg
        pitch_room = max(0.0, POLE_CLAMP_DEG - vfov_real / 2.0)
        new_pitch = float(np.clip((box.lat_lo_deg + box.lat_hi_deg) / 2.0,
                                  -pitch_room, pitch_room))
        if new_pitch == pitch:
            break
        pitch = new_pitch
    return ViewportSpec(yaw, pitch, hfov, width, height)


def gaze_extract(erp: ErpImage, region: CropRegion, params: GazeParams | None = None,
                 workers: int = 1) -> tuple[np.ndarray, ViewportSpec]:
    """Plan the gaze for a routed region and render the rectified patch."""
    pixels = erp.pixels if isinstance(erp, ErpImage) else np.asarray(erp)
    eh, ew = pixels.shape[:2]
    box = region_to_spherical_box(region, ew, eh)
    spec = plan_gaze(box, params)
    return extract_viewport(pixels, spec, workers=workers), spec


def footprint_polygon(spec: ViewportSpec, erp_width: int, erp_height: int,
                      points_per_edge: int = 16) -> list[tuple[float, float]]:
    """Viewport boundary projected to continuous ERP coords (debug dump)."""
    from .geometry import (erp_pixel_from_spherical, pixel_to_camera_ray,
                           rotate_ray, spherical_from_ray)

    w, h = float(spec.width), float(spec.height)
    pts: list[tuple[float, float]] = []
    edges = [((0.0, 0.0), (w, 0.0)), ((w, 0.0), (w, h)),
             ((w, h), (0.0, h)), ((0.0, h), (0.0, 0.0))]
    for (xa, ya), (xb, yb) in edges:
        for k in range(points_per_edge):
            t = k / points_per_edge
            ray = pixel_to_camera_ray(xa + t * (xb - xa), ya + t * (yb - ya), spec)
            world = rotate_ray(ray, spec.yaw_deg, spec.pitch_deg)
            pts.append(erp_pixel_from_spherical(
                spherical_from_ray(world), erp_width, erp_height))
    return pts
