"""Ground-truth oracle test doubles for all three model backends.

The oracle answers from dataset annotations instead of model weights:
the VLM reply lists the grid cells the GT mask intersects (small=true
for sub-0.1% coverage of the queried frame), the detector returns the
tight box + centroid of the GT projected into the request's viewport,
and the segmenter returns that projected GT mask (or fills the prompt
box when running in the distortion-sensitive "boxfill" mode used by the
ablation).

Exactness relies on the grid/viewport extension fields of pap-wire/1;
requests resolve to a record via image_id, else a unique question or
object-name match. The same service backs both the FastAPI app
(mock_serve) and the in-process OracleBackend, so transport cannot
change behavior.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

import numpy as np

from . import wire
from .dataset import Dataset, load_dataset
from .errors import UnknownImage
from .geometry import ViewportSpec, extract_viewport
from .grid import GridSpec, cell_region
from .pipeline import ErpWindow, crop_erp_window
from .wire import (GridExtension, OvdRequest, SamRequest, ViewportExtension,
                   VlmRequest)

_TASK_RE = re.compile(r'The task instruction is "(.*?)"')


@dataclass(frozen=True)
class NoiseConfig:
    grid_p: float = 0.0  # probability of perturbing one grid index
    box_jitter_px: int = 0
    seed: int = 0


def _window_slices(lo: float, hi: float, wrap: int | None):
    """Integer index array for a continuous [lo, hi) interval; columns
    wrap modulo ``wrap`` when given, rows clamp otherwise."""
    a = math.ceil(lo)
    b = math.ceil(hi)
    idx = np.arange(a, b)
    if wrap is not None:
        return idx % wrap
    return idx[(idx >= 0)]


def gt_cells_and_small(gt: np.ndarray, ext: GridExtension) -> tuple[list[int], bool]:
    """Grid cells whose ERP windows intersect the GT mask, plus the
    sub-scale flag (GT area < 0.1% of the queried frame)."""
    eh, ew = gt.shape
    grid = GridSpec(cols=ext.cols, rows=ext.rows)
    cells = []
    for idx in range(1, grid.n_cells + 1):
        r = cell_region(idx, grid, ext.frame_width, ext.frame_height)
        cols = _window_slices(ext.offset_x + ext.scale_x * r.x0,
                              ext.offset_x + ext.scale_x * (r.x0 + r.width), ew)
        rows = _window_slices(ext.offset_y + ext.scale_y * r.y0,
                              ext.offset_y + ext.scale_y * (r.y0 + r.height), None)
        rows = rows[rows < eh]
        if rows.size and cols.size and gt[np.ix_(rows, cols)].any():
            cells.append(idx)

    cols = _window_slices(ext.offset_x, ext.offset_x + ext.scale_x * ext.frame_width, ew)
    rows = _window_slices(ext.offset_y, ext.offset_y + ext.scale_y * ext.frame_height, None)
    rows = rows[rows < eh]
    frame_area = rows.size * cols.size
    gt_in_frame = int(gt[np.ix_(rows, cols)].sum()) if frame_area else 0
    small = len(cells) == 1 and frame_area > 0 and gt_in_frame / frame_area < 0.001
    return cells, small


def project_gt(gt: np.ndarray, ext: ViewportExtension) -> np.ndarray:
    """GT mask rendered into the request's viewport frame."""
    raster = gt.astype(np.uint8) * 255
    if ext.kind == "perspective":
        spec = ViewportSpec(ext.yaw_deg, ext.pitch_deg, ext.hfov_deg,
                            ext.width, ext.height)
        return extract_viewport(raster, spec) >= 128
    window = ErpWindow(int(ext.x0), int(ext.y0), int(ext.src_width),
                       int(ext.src_height), ext.width, ext.height)
    return crop_erp_window(raster, window) >= 128


class OracleService:
    def __init__(self, dataset: Dataset, noise: NoiseConfig | None = None,
                 sam_mode: str = "oracle"):
        if sam_mode not in ("oracle", "boxfill"):
            raise ValueError(f"unknown sam_mode {sam_mode!r}")
        self.dataset = dataset
        self.noise = noise or NoiseConfig()
        self.sam_mode = sam_mode
        self._rng = np.random.default_rng(self.noise.seed)

    # record resolution -------------------------------------------------
    def _resolve(self, image_id: str | None, question: str | None = None,
                 object_name: str | None = None):
        if image_id is not None:
            rec = self.dataset.by_id.get(image_id)
            if rec is None:
                raise UnknownImage(f"unknown image_id {image_id!r}")
            return rec
        if question is not None:
            rec = self.dataset.find_by_question(question)
            if rec is not None:
                return rec
        if object_name is not None:
            rec = self.dataset.find_by_object(object_name)
            if rec is not None:
                return rec
        raise UnknownImage("request matched no dataset record")

    # handlers -----------------------------------------------------------
    def vlm(self, req: VlmRequest) -> dict:
        if req.grid is None:
            raise UnknownImage("oracle vlm requires the grid extension")
        m = _TASK_RE.search(req.prompt)
        rec = self._resolve(req.image_id, question=m.group(1) if m else None)
        gt = self.dataset.mask(rec)
        cells, small = gt_cells_and_small(gt, req.grid)
        if not cells:
            cells, small = [1], False  # noise pushed the crop off target
        cells = self._perturb_cells(cells, req.grid)
        reply = {
            "grid_boxes": cells,
            "task": rec.question,
            "object_name": rec.object_name,
            "object_part": rec.object_name,
            "small": small,
        }
        text = (
            "#### Thinking\n"
            f"1. The target is {rec.object_name}. "
            f"2. It occupies grid boxes {cells}. 3. small={small}.\n\n"
            "#### Output\n"
            "{ \"grid_boxes\": " + json.dumps(cells)
            + ", // cells covering the target\n"
            + ", ".join(
                f'"{k}": {json.dumps(v)}' for k, v in reply.items() if k != "grid_boxes")
            + " }"
        )
        return {"text": text}

    def ovd(self, req: OvdRequest) -> dict:
        if req.viewport is None:
            raise UnknownImage("oracle ovd requires the viewport extension")
        rec = self._resolve(req.image_id, object_name=req.query)
        gt_vp = project_gt(self.dataset.mask(rec), req.viewport)
        ys, xs = np.nonzero(gt_vp)
        if xs.size == 0:
            return {"boxes": [], "points": [], "scores": []}
        box = [float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1)]
        if self.noise.box_jitter_px:
            j = self.noise.box_jitter_px
            box = [v + float(self._rng.integers(-j, j + 1)) for v in box]
            box = [min(box[0], box[2]), min(box[1], box[3]),
                   max(box[0], box[2]) + 1.0, max(box[1], box[3]) + 1.0]
        point = [float(xs.mean()), float(ys.mean())]
        return {"boxes": [box], "points": [point], "scores": [1.0]}

    def sam(self, req: SamRequest) -> dict:
        if req.viewport is None:
            raise UnknownImage("oracle sam requires the viewport extension")
        h, w = req.viewport.height, req.viewport.width
        if self.sam_mode == "boxfill":
            mask = np.zeros((h, w), dtype=bool)
            x0, y0, x1, y1 = req.box
            mask[max(0, int(math.floor(y0))): min(h, int(math.ceil(y1))),
                 max(0, int(math.floor(x0))): min(w, int(math.ceil(x1)))] = True
        else:
            rec = self._resolve(req.image_id)
            mask = project_gt(self.dataset.mask(rec), req.viewport)
        return {"mask_b64": wire.mask_to_b64(mask)}

    def _perturb_cells(self, cells: list[int], ext: GridExtension) -> list[int]:
        if self.noise.grid_p <= 0 or self._rng.random() >= self.noise.grid_p:
            return cells
        pick = int(self._rng.integers(0, len(cells)))
        idx = cells[pick]
        row, col = divmod(idx - 1, ext.cols)
        neighbors = []
        if col > 0:
            neighbors.append(idx - 1)
        if col < ext.cols - 1:
            neighbors.append(idx + 1)
        if row > 0:
            neighbors.append(idx - ext.cols)
        if row < ext.rows - 1:
            neighbors.append(idx + ext.cols)
        cells = list(cells)
        cells[pick] = int(neighbors[self._rng.integers(0, len(neighbors))])
        return sorted(set(cells))


class OracleBackend:
    """In-process backend over an OracleService (no HTTP)."""

    _MODELS = {"vlm": (VlmRequest, "vlm"), "ovd": (OvdRequest, "ovd"),
               "sam": (SamRequest, "sam")}
    _PATHS = {wire.VLM_PATH: "vlm", wire.OVD_PATH: "ovd", wire.SAM_PATH: "sam"}

    def __init__(self, kind: str, service: OracleService):
        self.kind = kind
        self.service = service

    def describe(self) -> str:
        return f"oracle:{self.kind}"

    def post(self, path: str, payload: dict) -> dict:
        kind = self._PATHS[path]
        model_cls, attr = self._MODELS[kind]
        return getattr(self.service, attr)(model_cls.model_validate(payload))


def oracle_backend_set(dataset: Dataset, noise: NoiseConfig | None = None,
                       sam_mode: str = "oracle"):
    from .pipeline import BackendSet

    service = OracleService(dataset, noise=noise, sam_mode=sam_mode)
    return BackendSet(vlm=OracleBackend("vlm", service),
                      ovd=OracleBackend("ovd", service),
                      sam=OracleBackend("sam", service))


def build_mock_app(dataset: Dataset | str, noise: NoiseConfig | None = None,
                   sam_mode: str = "oracle", auth_token: str | None = None):
    """FastAPI app exposing the oracle over pap-wire/1."""
    from fastapi import FastAPI, Header, HTTPException

    if not isinstance(dataset, Dataset):
        dataset = load_dataset(dataset)
    service = OracleService(dataset, noise=noise, sam_mode=sam_mode)
    app = FastAPI(title="pap oracle mock", version=wire.WIRE_VERSION)

    def check_auth(authorization: str | None):
        if auth_token and authorization != f"Bearer {auth_token}":
            raise HTTPException(status_code=401, detail="bad or missing token")

    def guarded(fn, req):
        try:
            return fn(req)
        except UnknownImage as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.get(wire.HEALTH_PATH)
    def healthz():
        return {"ok": True, "model": f"oracle-mock/{service.sam_mode}"}

    @app.post(wire.VLM_PATH)
    def vlm(req: VlmRequest, authorization: str | None = Header(default=None)):
        check_auth(authorization)
        return guarded(service.vlm, req)

    @app.post(wire.OVD_PATH)
    def ovd(req: OvdRequest, authorization: str | None = Header(default=None)):
        check_auth(authorization)
        return guarded(service.ovd, req)

    @app.post(wire.SAM_PATH)
    def sam(req: SamRequest, authorization: str | None = Header(default=None)):
        check_auth(authorization)
        return guarded(service.sam, req)

    return app


def mock_serve(dataset_dir: str, noise: NoiseConfig | None = None, port: int = 8008,
               host: str = "127.0.0.1", sam_mode: str = "oracle",
               auth_token: str | None = None) -> None:
    """Serve the oracle endpoints until interrupted."""
    import uvicorn

    app = build_mock_app(dataset_dir, noise=noise, sam_mode=sam_mode,
                         auth_token=auth_token)
    uvicorn.run(app, host=host, port=port, log_level="warning")
