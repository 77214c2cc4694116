"""Numbered grid overlays and cell geometry for visual grid prompting.

A cols x rows grid (default 4x3) is drawn over the routing frame as solid
red lines plus a large index digit at each cell center, indices 1..N in
reading order (row-major, top row first). Cell regions use floor integer
boundaries so the cells tile the frame exactly; drawn line positions are
rounded independently and may sit one pixel off a cell boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadIndex, GridTooDense
from .geometry import IDENTITY_MAP, AffineMap

LINE_COLOR = (255, 0, 0)
DIGIT_COLOR = (255, 0, 0)
HALO_COLOR = (255, 255, 255)

# 5x7 bitmap digits, scaled to the configured font size at draw time.
_GLYPHS = {
    "0": ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    "1": ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    "2": ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    "3": ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    "4": ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    "5": ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    "6": ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    "7": ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    "8": ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    "9": ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}


@dataclass(frozen=True)
class GridSpec:
    cols: int = 4
    rows: int = 3
    line_width_px: int = 5
    font_size_px: int = 50

    def __post_init__(self):
        if self.cols < 1 or self.rows < 1:
            raise BadIndex("grid shape must be positive")

    @property
    def n_cells(self) -> int:
        return self.cols * self.rows


@dataclass(frozen=True)
class CropRegion:
    """Axis-aligned window in some frame, plus the cumulative affine map
    from that frame's coordinates back to full-resolution ERP coordinates.

    ``x0 + width`` may exceed ``frame_width`` only for seam-wrapping
    regions (merges of first+last column cells on the full panorama);
    coordinates then stay unwrapped and callers reduce modulo the frame
    width when indexing pixels.
    """

    x0: float
    y0: float
    width: float
    height: float
    frame_width: int
    frame_height: int
    to_erp: AffineMap = field(default=IDENTITY_MAP)
    wraps_seam: bool = False

    def in_erp(self, erp_width: int, erp_height: int) -> "CropRegion":
        """The same region expressed in full-resolution ERP coordinates."""
        x, y = self.to_erp.apply(self.x0, self.y0)
        return CropRegion(
            x,
            y,
            self.width * self.to_erp.scale_x,
            self.height * self.to_erp.scale_y,
            erp_width,
            erp_height,
            IDENTITY_MAP,
            self.wraps_seam,
        )


def _glyph_mask(text: str, font_px: int) -> np.ndarray:
    """Render digits to a bool bitmap of height font_px (NN upscale)."""
    gh = max(7, font_px)
    gw = max(5, round(font_px * 5 / 7))
    gap = max(1, round(font_px / 7))
    width = len(text) * gw + (len(text) - 1) * gap
    out = np.zeros((gh, width), dtype=bool)
    rows_idx = (np.arange(gh) * 7) // gh
    cols_idx = (np.arange(gw) * 5) // gw
    for i, ch in enumerate(text):
        bits = np.array([[c == "1" for c in row] for row in _GLYPHS[ch]])
        out[:, i * (gw + gap): i * (gw + gap) + gw] = bits[np.ix_(rows_idx, cols_idx)]
    return out


def _dilate(mask: np.ndarray, t: int) -> np.ndarray:
    """Binary dilation by a (2t+1)-square, on a t-padded copy."""
    padded = np.pad(mask, t)
    out = np.zeros_like(padded)
    h, w = padded.shape
    for dy in range(-t, t + 1):
        for dx in range(-t, t + 1):
            src = padded[max(0, -dy): h - max(0, dy), max(0, -dx): w - max(0, dx)]
            out[max(0, dy): h - max(0, -dy), max(0, dx): w - max(0, -dx)] |= src
    return out


def label_masks(text: str, font_px: int) -> tuple[np.ndarray, np.ndarray]:
    """(core, halo) bitmaps for a cell label; halo includes the core."""
    core = _glyph_mask(text, font_px)
    t = max(1, font_px // 12)
    return np.pad(core, t), _dilate(core, t)


def _line_positions(extent: int, n: int) -> list[int]:
    return [int(k * extent / n + 0.5) for k in range(1, n)]


def render_grid_overlay(img: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Copy of img with grid lines and centered cell indices painted.

    Lines are pure red; digits are red with a white halo so they stay
    readable over arbitrary scenes. Pixels outside lines and glyphs are
    byte-identical to the input.
    """
    h, w = img.shape[:2]
    cell_w = w // grid.cols
    cell_h = h // grid.rows
    if min(cell_w, cell_h) < 2 * grid.font_size_px:
        raise GridTooDense(
            f"cell {cell_w}x{cell_h} too small for font {grid.font_size_px}")
    out = img.copy()
    if out.ndim == 2:
        out = np.stack([out] * 3, axis=-1)

    lw = grid.line_width_px
    for x in _line_positions(w, grid.cols):
        x0 = max(0, x - (lw - 1) // 2)
        out[:, x0: min(w, x0 + lw)] = LINE_COLOR
    for y in _line_positions(h, grid.rows):
        y0 = max(0, y - (lw - 1) // 2)
        out[y0: min(h, y0 + lw), :] = LINE_COLOR

    for idx in range(1, grid.n_cells + 1):
        region = cell_region(idx, grid, w, h)
        cx = region.x0 + region.width / 2.0
        cy = region.y0 + region.height / 2.0
        core, halo = label_masks(str(idx), grid.font_size_px)
        lh, lww = halo.shape
        top = int(round(cy - lh / 2.0))
        left = int(round(cx - lww / 2.0))
        ys = slice(max(0, top), min(h, top + lh))
        xs = slice(max(0, left), min(w, left + lww))
        sub_h = halo[ys.start - top: ys.stop - top, xs.start - left: xs.stop - left]
        sub_c = core[ys.start - top: ys.stop - top, xs.start - left: xs.stop - left]
        out[ys, xs][sub_h] = HALO_COLOR
        out[ys, xs][sub_c] = DIGIT_COLOR
    return out


def cell_region(index: int, grid: GridSpec, frame_width: int, frame_height: int) -> CropRegion:
    """Region of cell ``index`` (1-based, reading order); floor boundaries
    make the cols*rows regions an exact disjoint tiling of the frame."""
    if not 1 <= index <= grid.n_cells:
        raise BadIndex(f"index {index} outside 1..{grid.n_cells}")
    row, col = divmod(index - 1, grid.cols)
    x0 = col * frame_width // grid.cols
    x1 = (col + 1) * frame_width // grid.cols
    y0 = row * frame_height // grid.rows
    y1 = (row + 1) * frame_height // grid.rows
    return CropRegion(float(x0), float(y0), float(x1 - x0), float(y1 - y0),
                      frame_width, frame_height)


def _minimal_circular_interval(cols: set[int], n: int) -> tuple[int, int, bool]:
    """(start_col, end_col, wraps): shortest cyclic column interval covering
    ``cols``; chosen as the complement of the largest cyclic gap."""
    ordered = sorted(cols)
    if len(ordered) == n:
        return 0, n - 1, False
    best_gap, best_after = -1, 0
    for i, c in enumerate(ordered):
        nxt = ordered[(i + 1) % len(ordered)]
        gap = (nxt - c - 1) % n
        if gap > best_gap:
            best_gap, best_after = gap, i
    start = ordered[(best_after + 1) % len(ordered)]
    end = ordered[best_after]
    return start, end, start > end


def merge_cells(indices, grid: GridSpec, frame_width: int, frame_height: int,
                circular: bool = True) -> CropRegion:
    """Minimal axis-aligned region covering the listed cells.

    With ``circular`` (full-panorama frames), index sets touching both the
    first and last column without covering every column take the shortest
    seam-wrapping column interval instead of the full width. Row extents
    never wrap.
    """
    idx = sorted(set(indices))
    if not idx:
        raise BadIndex("empty cell set")
    for i in idx:
        if not 1 <= i <= grid.n_cells:
            raise BadIndex(f"index {i} outside 1..{grid.n_cells}")
    rows = {(i - 1) // grid.cols for i in idx}
    cols = {(i - 1) % grid.cols for i in idx}

    wraps = False
    if circular and {0, grid.cols - 1} <= cols and len(cols) < grid.cols:
        c_start, c_end, wraps = _minimal_circular_interval(cols, grid.cols)
    else:
        c_start, c_end = min(cols), max(cols)

    x0 = c_start * frame_width // grid.cols
    x1 = (c_end + 1) * frame_width // grid.cols
    if wraps:
        x1 += frame_width
    y0 = min(rows) * frame_height // grid.rows
    y1 = (max(rows) + 1) * frame_height // grid.rows
    return CropRegion(float(x0), float(y0), float(x1 - x0), float(y1 - y0),
                      frame_width, frame_height, wraps_seam=wraps)
