"""Recursive visual routing: coarse-to-fine target localization.

Depth 0 downsamples the full panorama to the first routing resolution
(default 2000x1000), overlays the numbered grid, and asks the VLM which
cells contain the target. Multi-cell answers, non-small singletons, and
the depth cap all terminate; a small singleton recurses into that cell,
cropped from the full-resolution panorama and resized to the next
routing resolution (default 1500x1000, slight anamorphic stretch; the
exact per-axis scale is kept in the cumulative mapping so coordinates
stay exact).
"""
from __future__ import annotations

import importlib.resources
import json
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadIndex, EmptyGridBoxes, UnparseableResponse
from .geometry import AffineMap, ErpImage
from .grid import CropRegion, GridSpec, merge_cells, render_grid_overlay
from .image_io import resize

STRICT_REMINDER = "STRICTLY output the JSON only."


@dataclass(frozen=True)
class RoutingConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    resolutions: tuple[tuple[int, int], ...] = ((2000, 1000), (1500, 1000))
    max_depth: int = 2
    parse_retries: int = 2


@dataclass(frozen=True)
class RoutingResult:
    """One parsed VLM routing answer."""

    grid_boxes: tuple[int, ...]
    object_name: str
    object_part: str
    small: bool
    raw_response: str


@dataclass(frozen=True)
class RoutingState:
    """Where the recursion currently points in the full-resolution panorama."""

    depth: int
    image: np.ndarray  # the (downsampled) frame queried at this depth
    crop_region: CropRegion  # target region, full-res ERP coordinates
    task_text: str
    history: tuple[RoutingResult, ...]


def prompt_template() -> str:
    return importlib.resources.files("pap").joinpath("assets/routing_prompt.txt").read_text()


def build_prompt(task: str) -> str:
    return prompt_template().replace("TASK", task)


def _strip_comments(text: str) -> str:
    """Drop // line comments outside of string literals."""
    out = []
    in_str = False
    escape = False
    i = 0
    while i < len(text):
        c = text[i]
        if in_str:
            out.append(c)
            if escape:
                escape = False
            elif c == "\\":
                escape = True
            elif c == '"':
                in_str = False
            i += 1
            continue
        if c == '"':
            in_str = True
            out.append(c)
            i += 1
            continue
        if c == "/" and i + 1 < len(text) and text[i + 1] == "/":
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        out.append(c)
        i += 1
    return "".join(out)


def _json_candidates(text: str) -> list[str]:
    """Balanced top-level {...} spans, string-aware, in order of appearance."""
    spans = []
    depth = 0
    start = -1
    in_str = False
    escape = False
    for i, c in enumerate(text):
        if in_str:
            if escape:
                escape = False
            elif c == "\\":
                escape = True
            elif c == '"':
                in_str = False
            continue
        if c == '"':
            in_str = True
        elif c == "{":
            if depth == 0:
                start = i
            depth += 1
        elif c == "}":
            if depth > 0:
                depth -= 1
                if depth == 0:
                    spans.append(text[start: i + 1])
    return spans


def parse_vlm_response(text: str, max_index: int | None = None) -> RoutingResult:
    """Extract the last JSON object from a routing reply.

    Tolerates a Thinking preamble, code fences, and // line comments.
    object_part falls back to object_name when absent or empty.
    """
    cleaned = re.sub(r"^\s*```.*$", "", text, flags=re.MULTILINE)
    cleaned = _strip_comments(cleaned)
    payload = None
    for candidate in reversed(_json_candidates(cleaned)):
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict) and "grid_boxes" in obj:
            payload = obj
            break
    if payload is None:
        raise UnparseableResponse(f"no routing JSON found in reply: {text[:200]!r}")

    boxes = payload["grid_boxes"]
    if not isinstance(boxes, list) or not all(
            isinstance(b, int) and not isinstance(b, bool) for b in boxes):
        raise UnparseableResponse(f"grid_boxes must be a list of ints, got {boxes!r}")
    if not boxes:
        raise EmptyGridBoxes("reply selected no grid cells")
    uniq = tuple(sorted(set(boxes)))
    for b in uniq:
        if b < 1 or (max_index is not None and b > max_index):
            raise BadIndex(f"grid index {b} out of range")

    small = payload.get("small", False)
    if not isinstance(small, bool):
        raise UnparseableResponse(f"small must be boolean, got {small!r}")
    name = str(payload.get("object_name", "") or "")
    part = str(payload.get("object_part", "") or "") or name
    return RoutingResult(uniq, name, part, small, text)


def grid_extension(grid: GridSpec, frame_w: int, frame_h: int, frame_map: AffineMap) -> dict:
    """Wire-protocol grid metadata so oracle mocks can answer exactly."""
    return {
        "cols": grid.cols,
        "rows": grid.rows,
        "frame_width": frame_w,
        "frame_height": frame_h,
        "scale_x": frame_map.scale_x,
        "scale_y": frame_map.scale_y,
        "offset_x": frame_map.offset_x,
        "offset_y": frame_map.offset_y,
    }


def _query(vlm, overlay: np.ndarray, prompt: str, grid_ext: dict,
           image_id: str | None, retries: int, max_index: int) -> RoutingResult:
    from .backends import vlm_complete

    attempt_prompt = prompt
    for attempt in range(retries + 1):
        text = vlm_complete(vlm, overlay, attempt_prompt, grid=grid_ext, image_id=image_id)
        try:
            return parse_vlm_response(text, max_index=max_index)
        except UnparseableResponse:
            if attempt == retries:
                raise
            attempt_prompt = prompt + "\n" + STRICT_REMINDER
    raise AssertionError("unreachable")


def route(erp: ErpImage, task: str, vlm, cfg: RoutingConfig | None = None,
          image_id: str | None = None) -> tuple[RoutingState, RoutingResult]:
    """Run the recursion; returns the final state and final parsed answer.

    The final state's crop_region locates the target in full-resolution
    ERP coordinates.
    """
    cfg = cfg or RoutingConfig()
    pixels = erp.pixels if isinstance(erp, ErpImage) else np.asarray(erp)
    eh, ew = pixels.shape[:2]
    prompt = build_prompt(task)

    res0 = cfg.resolutions[0]
    frame = resize(pixels, res0[0], res0[1])
    frame_map = AffineMap(ew / res0[0], eh / res0[1], 0.0, 0.0)

    depth = 0
    history: list[RoutingResult] = []
    while True:
        overlay = render_grid_overlay(frame, cfg.grid)
        grid_ext = grid_extension(cfg.grid, frame.shape[1], frame.shape[0], frame_map)
        result = _query(vlm, overlay, prompt, grid_ext, image_id,
                        cfg.parse_retries, cfg.grid.n_cells)
        history.append(result)

        region = merge_cells(result.grid_boxes, cfg.grid,
                             frame.shape[1], frame.shape[0], circular=(depth == 0))
        region = replace(region, to_erp=frame_map)
        state = RoutingState(depth, frame, region.in_erp(ew, eh), task, tuple(history))

        if len(result.grid_boxes) >= 2 or not result.small or depth >= cfg.max_depth:
            return state, result

        erp_region = state.crop_region
        x0 = int(np.floor(erp_region.x0))
        y0 = max(0, int(np.floor(erp_region.y0)))
        x1 = int(np.ceil(erp_region.x0 + erp_region.width))
        y1 = min(eh, int(np.ceil(erp_region.y0 + erp_region.height)))
        # recursion only happens on single non-wrapping cells
        x0 = max(0, x0)
        x1 = min(ew, x1)
        crop = pixels[y0:y1, x0:x1]
        res = cfg.resolutions[min(depth + 1, len(cfg.resolutions) - 1)]
        frame = resize(crop, res[0], res[1])
        frame_map = AffineMap((x1 - x0) / res[0], (y1 - y0) / res[1], float(x0), float(y0))
        depth += 1
