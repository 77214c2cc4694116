"""Equirectangular <-> perspective geometry.

Camera model for a virtual pinhole viewport over an equirectangular
panorama:

    f  = W / (2 tan(hfov/2))
    (X_c, Y_c, Z_c) = (x - c_x, y - c_y, f)          per output pixel
    world = R_y(yaw) @ R_x(pitch) @ cam              yaw about Y, pitch about X
    lon = atan2(X_w, Z_w),  lat = asin(Y_w / |ray|)
    U = (lon/2pi + 0.5) * W_erp  (mod W_erp),  V = (lat/pi + 0.5) * H_erp

Conventions (pinned here because they are easy to get wrong):
  * Continuous coordinate x is the CENTER of pixel x; the optical center
    is c = ((W-1)/2, (H-1)/2) so round trips are exact.
  * Positive yaw turns the view toward +longitude; positive pitch
    increases latitude, i.e. moves the boresight toward larger ERP row
    indices (image-down).
  * lon = atan2(X, Z): the +Z boresight is lon 0; atan2(0, 0) == 0 is
    relied on for the (0, +-1, 0) poles.
  * Horizontal sampling wraps modulo W_erp (seam); vertical clamps at
    the poles. Pole rows are not blended across the pole.

All trig in float64; image data uint8.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateRay, DimensionMismatch, InvalidSpec

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ErpImage:
    """Equirectangular panorama raster with seam-wrapping semantics."""

    pixels: np.ndarray  # uint8, HxW or HxWx3
    full_panorama: bool = True

    def __post_init__(self):
        if self.pixels.ndim not in (2, 3):
            raise InvalidSpec("ERP raster must be HxW or HxWx3")
        if self.pixels.ndim == 3 and self.pixels.shape[2] != 3:
            raise InvalidSpec("color ERP raster must have 3 channels")
        h, w = self.pixels.shape[:2]
        if w < 2 or h < 1:
            raise InvalidSpec(f"ERP dims too small: {w}x{h}")
        if self.full_panorama and w != 2 * h:
            raise InvalidSpec(f"full panorama requires W == 2H, got {w}x{h}")

    @property
    def width_px(self) -> int:
        return self.pixels.shape[1]

    @property
    def height_px(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    @classmethod
    def load(cls, path, full_panorama: bool = True) -> "ErpImage":
        from .image_io import load_image

        return cls(load_image(path), full_panorama=full_panorama)


@dataclass(frozen=True)
class ViewportSpec:
    """Virtual pinhole camera: gaze direction, horizontal FoV, output dims."""

    yaw_deg: float
    pitch_deg: float
    hfov_deg: float
    width: int
    height: int

    def __post_init__(self):
        if not (0.0 < self.hfov_deg < 180.0):
            raise InvalidSpec(f"hfov must be in (0, 180), got {self.hfov_deg}")
        if self.width < 2 or self.height < 2:
            raise InvalidSpec(f"output dims must be >= 2, got {self.width}x{self.height}")

    @property
    def cx(self) -> float:
        return (self.width - 1) / 2.0

    @property
    def cy(self) -> float:
        return (self.height - 1) / 2.0

    @property
    def vfov_deg(self) -> float:
        """Vertical FoV derived from the focal length; always < 180."""
        return 2.0 * math.degrees(math.atan(self.height / (2.0 * focal_length(self))))


class CameraRay(NamedTuple):
    x: float
    y: float
    z: float


class WorldRay(NamedTuple):
    x: float
    y: float
    z: float


class SphericalCoord(NamedTuple):
    lon_rad: float
    lat_rad: float


def focal_length(spec: ViewportSpec) -> float:
    """Focal length in pixels: W / (2 tan(hfov/2))."""
    return spec.width / (2.0 * math.tan(math.radians(spec.hfov_deg) / 2.0))


def pixel_to_camera_ray(x_px: float, y_px: float, spec: ViewportSpec) -> CameraRay:
    """Ray through pixel center (x, y); out-of-bounds pixels allowed."""
    return CameraRay(x_px - spec.cx, y_px - spec.cy, focal_length(spec))


def rotation_matrix(yaw_deg: float, pitch_deg: float) -> np.ndarray:
    """R_y(yaw) @ R_x(pitch), camera-to-world.

    The pitch matrix is chosen so that positive pitch maps the boresight
    to positive latitude (see module docstring).
    """
    y = math.radians(yaw_deg)
    p = math.radians(pitch_deg)
    cy_, sy = math.cos(y), math.sin(y)
    cp, sp = math.cos(p), math.sin(p)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, sp], [0.0, -sp, cp]])
    ry = np.array([[cy_, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy_]])
    return ry @ rx


def rotate_ray(ray: CameraRay, yaw_deg: float, pitch_deg: float) -> WorldRay:
    """Apply R_y(yaw) @ R_x(pitch) to a camera ray."""
    v = rotation_matrix(yaw_deg, pitch_deg) @ np.array(ray, dtype=np.float64)
    return WorldRay(float(v[0]), float(v[1]), float(v[2]))


def spherical_from_ray(ray: WorldRay) -> SphericalCoord:
    """lon = atan2(X, Z); lat = asin(Y / |ray|)."""
    n = math.sqrt(ray.x * ray.x + ray.y * ray.y + ray.z * ray.z)
    if n == 0.0:
        raise DegenerateRay("zero-norm ray")
    return SphericalCoord(math.atan2(ray.x, ray.z), math.asin(ray.y / n))


def erp_pixel_from_spherical(s: SphericalCoord, erp_width: int, erp_height: int) -> tuple[float, float]:
    """(U, V) continuous ERP pixel coordinates; U reduced modulo W_erp.

    V spans [0, H_erp] (the lat == +pi/2 limit falls just past the last
    row); samplers clamp vertically.
    """
    u = (s.lon_rad / _TWO_PI + 0.5) * erp_width
    v = (s.lat_rad / math.pi + 0.5) * erp_height
    return u % erp_width, v


def spherical_from_erp_pixel(u: float, v: float, erp_width: int, erp_height: int) -> SphericalCoord:
    """Inverse of erp_pixel_from_spherical (applies to region edges too)."""
    return SphericalCoord((u / erp_width - 0.5) * _TWO_PI, (v / erp_height - 0.5) * math.pi)


def direction_from_spherical(lon_rad, lat_rad):
    """Unit direction(s) for lon/lat; accepts scalars or arrays."""
    cl = np.cos(lat_rad)
    return cl * np.sin(lon_rad), np.sin(lat_rad), cl * np.cos(lon_rad)


def _erp_pixels(erp) -> np.ndarray:
    if isinstance(erp, ErpImage):
        return erp.pixels
    return np.asarray(erp)


def _run_row_chunks(total_rows: int, worker_fn, workers: int, chunk: int = 256) -> None:
    """Apply worker_fn(r0, r1) over disjoint row chunks, optionally threaded.

    Chunks are disjoint so parallel execution is bit-identical to serial.
    """
    spans = [(r0, min(r0 + chunk, total_rows)) for r0 in range(0, total_rows, chunk)]
    if workers <= 1 or len(spans) <= 1:
        for r0, r1 in spans:
            worker_fn(r0, r1)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda s: worker_fn(*s), spans))


def _bilinear_wrap(pixels: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear sample at continuous (u, v); u wraps mod W, v clamps."""
    h, w = pixels.shape[:2]
    u0f = np.floor(u)
    v0f = np.floor(v)
    du = u - u0f
    dv = v - v0f
    u0 = u0f.astype(np.int64) % w
    u1 = (u0 + 1) % w
    v0 = np.clip(v0f.astype(np.int64), 0, h - 1)
    v1 = np.clip(v0.astype(np.int64) + 1, 0, h - 1)
    p = pixels.astype(np.float64)
    if pixels.ndim == 3:
        du = du[..., None]
        dv = dv[..., None]
    val = (
        p[v0, u0] * (1.0 - du) * (1.0 - dv)
        + p[v0, u1] * du * (1.0 - dv)
        + p[v1, u0] * (1.0 - du) * dv
        + p[v1, u1] * du * dv
    )
    return np.clip(np.floor(val + 0.5), 0, 255).astype(np.uint8)


def viewport_sample_grid(spec: ViewportSpec, erp_width: int, erp_height: int,
                         rows: slice | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Continuous ERP (U, V) sample coordinates for each viewport pixel."""
    f = focal_length(spec)
    xs = np.arange(spec.width, dtype=np.float64) - spec.cx
    row_range = range(spec.height)[rows] if rows is not None else range(spec.height)
    ys = np.asarray(row_range, dtype=np.float64) - spec.cy
    xg, yg = np.meshgrid(xs, ys)
    r = rotation_matrix(spec.yaw_deg, spec.pitch_deg)
    xw = r[0, 0] * xg + r[0, 1] * yg + r[0, 2] * f
    yw = r[1, 0] * xg + r[1, 1] * yg + r[1, 2] * f
    zw = r[2, 0] * xg + r[2, 1] * yg + r[2, 2] * f
    lon = np.arctan2(xw, zw)
    lat = np.arcsin(np.clip(yw / np.sqrt(xw * xw + yw * yw + zw * zw), -1.0, 1.0))
    u = (lon / _TWO_PI + 0.5) * erp_width % erp_width
    v = (lat / math.pi + 0.5) * erp_height
    return u, v


def extract_viewport(erp, spec: ViewportSpec, workers: int = 1) -> np.ndarray:
    """Render the perspective viewport by inverse mapping + bilinear sampling.

    Dense output, no holes: every output pixel samples the panorama at its
    (U, V) with horizontal wrap and vertical clamp.
    """
    pixels = _erp_pixels(erp)
    eh, ew = pixels.shape[:2]
    shape = (spec.height, spec.width) if pixels.ndim == 2 else (spec.height, spec.width, 3)
    out = np.empty(shape, dtype=np.uint8)

    def work(r0: int, r1: int) -> None:
        u, v = viewport_sample_grid(spec, ew, eh, rows=slice(r0, r1))
        out[r0:r1] = _bilinear_wrap(pixels, u, v)

    _run_row_chunks(spec.height, work, workers)
    return out


def _pole_in_frustum(spec: ViewportSpec, pad_px: float = 2.0) -> bool:
    """True when either pole direction projects inside the (padded) frustum."""
    r_inv = rotation_matrix(spec.yaw_deg, spec.pitch_deg).T
    f = focal_length(spec)
    for pole_y in (1.0, -1.0):
        c = r_inv @ np.array([0.0, pole_y, 0.0])
        if c[2] <= 0.0:
            continue
        x = f * c[0] / c[2] + spec.cx
        y = f * c[1] / c[2] + spec.cy
        if -pad_px <= x < spec.width + pad_px and -pad_px <= y < spec.height + pad_px:
            return True
    return False


def _boundary_lat_lon_bounds(spec: ViewportSpec) -> tuple[float, float, float, float]:
    """Exact (lat_min, lat_max) and unwrapped (lon_min, lon_max) over the
    frustum boundary.

    Latitude along a straight plane edge d(t) = a + t*b has a single
    critical point at t = (a_y(a.b) - b_y(a.a)) / (b_y(a.b) - a_y(b.b)),
    so per-edge extremes are exact. Longitude is monotone along each
    straight edge (its derivative can only vanish identically), so corner
    values bound it; intermediate samples are used solely to unwrap.
    """
    r = rotation_matrix(spec.yaw_deg, spec.pitch_deg)
    f = focal_length(spec)
    corners_px = [(0.0, 0.0), (float(spec.width), 0.0),
                  (float(spec.width), float(spec.height)), (0.0, float(spec.height))]
    corners = [r @ np.array([x - spec.cx, y - spec.cy, f]) for x, y in corners_px]

    lat_cands = []
    lons_unwrapped: list[float] = []
    n_interp = 32
    for i in range(4):
        a = corners[i]
        b = corners[(i + 1) % 4] - a
        lat_cands.append(math.asin(a[1] / np.linalg.norm(a)))
        denom = b[1] * (a @ b) - a[1] * (b @ b)
        if denom != 0.0:
            t = (a[1] * (a @ b) - b[1] * (a @ a)) / denom
            if 0.0 < t < 1.0:
                d = a + t * b
                lat_cands.append(math.asin(d[1] / np.linalg.norm(d)))
        for k in range(n_interp):
            d = a + (k / n_interp) * b
            lon = math.atan2(d[0], d[2])
            if lons_unwrapped:
                prev = lons_unwrapped[-1]
                lon += _TWO_PI * round((prev - lon) / _TWO_PI)
            lons_unwrapped.append(lon)
    return min(lat_cands), max(lat_cands), min(lons_unwrapped), max(lons_unwrapped)


def reproject_mask_to_erp(mask: np.ndarray, spec: ViewportSpec,
                          erp_width: int, erp_height: int,
                          restrict_scan: bool = True, workers: int = 1) -> np.ndarray:
    """Back-project a viewport-frame binary mask into ERP space.

    Each ERP pixel center is ray-cast through the inverse rotation; pixels
    whose ray hits the viewport plane in front of the camera (Z_c > 0) at a
    continuous position inside [0, W) x [0, H) take the nearest-neighbor
    mask sample. With restrict_scan, only the ERP strip bounded by the
    frustum's exact lat/lon extent is visited; output is identical to the
    full scan.
    """
    mask = np.asarray(mask)
    if mask.shape != (spec.height, spec.width):
        raise DimensionMismatch(
            f"mask {mask.shape[1]}x{mask.shape[0]} != viewport {spec.width}x{spec.height}")
    mask = mask.astype(bool)
    r_inv = rotation_matrix(spec.yaw_deg, spec.pitch_deg).T
    f = focal_length(spec)
    out = np.zeros((erp_height, erp_width), dtype=bool)

    if restrict_scan and not _pole_in_frustum(spec):
        lat_lo, lat_hi, lon_lo, lon_hi = _boundary_lat_lon_bounds(spec)
        v_lo = max(0, int(math.floor((lat_lo / math.pi + 0.5) * erp_height)) - 1)
        v_hi = min(erp_height, int(math.ceil((lat_hi / math.pi + 0.5) * erp_height)) + 1)
        u_lo = int(math.floor((lon_lo / _TWO_PI + 0.5) * erp_width)) - 1
        u_hi = int(math.ceil((lon_hi / _TWO_PI + 0.5) * erp_width)) + 1
        if lon_hi - lon_lo >= _TWO_PI or u_hi - u_lo >= erp_width:
            cols = np.arange(erp_width)
        else:
            cols = np.arange(u_lo, u_hi) % erp_width
    else:
        v_lo, v_hi = 0, erp_height
        cols = np.arange(erp_width)

    if v_hi <= v_lo or cols.size == 0:
        return out

    lon = (cols / erp_width - 0.5) * _TWO_PI

    def work(r0: int, r1: int) -> None:
        rows = np.arange(v_lo + r0, v_lo + r1)
        lat = (rows / erp_height - 0.5) * math.pi
        lon_g, lat_g = np.meshgrid(lon, lat)
        dx, dy, dz = direction_from_spherical(lon_g, lat_g)
        cx_ = r_inv[0, 0] * dx + r_inv[0, 1] * dy + r_inv[0, 2] * dz
        cy_ = r_inv[1, 0] * dx + r_inv[1, 1] * dy + r_inv[1, 2] * dz
        cz_ = r_inv[2, 0] * dx + r_inv[2, 1] * dy + r_inv[2, 2] * dz
        valid = cz_ > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            px = f * cx_ / cz_ + spec.cx
            py = f * cy_ / cz_ + spec.cy
        valid &= (px >= 0.0) & (px < spec.width) & (py >= 0.0) & (py < spec.height)
        px = np.where(valid, px, 0.0)
        py = np.where(valid, py, 0.0)
        xi = np.minimum(np.floor(px + 0.5).astype(np.int64), spec.width - 1)
        yi = np.minimum(np.floor(py + 0.5).astype(np.int64), spec.height - 1)
        hit = valid & mask[yi, xi]
        out[rows[:, None], cols[None, :]] = hit

    _run_row_chunks(v_hi - v_lo, work, workers)
    return out


@dataclass(frozen=True)
class AffineMap:
    """2D axis-aligned affine map: target = offset + scale * source."""

    scale_x: float = 1.0
    scale_y: float = 1.0
    offset_x: float = 0.0
    offset_y: float = 0.0

    def apply(self, x: float, y: float) -> tuple[float, float]:
        return self.offset_x + self.scale_x * x, self.offset_y + self.scale_y * y

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """self o inner: apply ``inner`` first, then self."""
        return AffineMap(
            self.scale_x * inner.scale_x,
            self.scale_y * inner.scale_y,
            self.offset_x + self.scale_x * inner.offset_x,
            self.offset_y + self.scale_y * inner.offset_y,
        )


IDENTITY_MAP = AffineMap()
