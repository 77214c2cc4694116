"""pap-wire/1: JSON-over-HTTP schemas shared by clients, mocks, adapters.

Endpoints:
    POST /v1/vlm/complete   VlmRequest  -> VlmResponse
    POST /v1/ovd/detect     OvdRequest  -> OvdResponse
    POST /v1/sam/segment    SamRequest  -> SamResponse
    GET  /healthz           -> {"ok": true, ...}

Images travel as base64 PNG. The optional ``grid``/``viewport``/
``image_id`` extension fields exist so oracle test doubles can answer
exactly; live model servers ignore them. When the PAP_AUTH_TOKEN env var
is set, clients send it as a Bearer header and servers may require it.
"""
from __future__ import annotations

import base64
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

WIRE_VERSION = "pap-wire/1"
VLM_PATH = "/v1/vlm/complete"
OVD_PATH = "/v1/ovd/detect"
SAM_PATH = "/v1/sam/segment"
HEALTH_PATH = "/healthz"
AUTH_ENV_VAR = "PAP_AUTH_TOKEN"


def image_to_b64(pixels: np.ndarray) -> str:
    from .image_io import encode_png

    return base64.b64encode(encode_png(pixels)).decode("ascii")


def b64_to_image(data: str) -> np.ndarray:
    from .image_io import decode_png

    return decode_png(base64.b64decode(data))


def mask_to_b64(mask: np.ndarray) -> str:
    return image_to_b64(mask.astype(np.uint8) * 255)


def b64_to_mask(data: str) -> np.ndarray:
    arr = b64_to_image(data)
    if arr.ndim == 3:
        arr = arr[..., 0]
    return arr >= 128


class GridExtension(BaseModel):
    model_config = ConfigDict(extra="forbid")
    cols: int
    rows: int
    frame_width: int
    frame_height: int
    scale_x: float
    scale_y: float
    offset_x: float
    offset_y: float


class ViewportExtension(BaseModel):
    """Describes how the request image was produced from the panorama.

    kind "perspective": virtual pinhole viewport (yaw/pitch/hfov).
    kind "erp_window": axis-aligned ERP crop (x0/y0/src_*) resized to
    width x height; x0 + src_width may exceed the panorama width for
    seam-wrapping windows.
    """

    model_config = ConfigDict(extra="forbid")
    kind: Literal["perspective", "erp_window"] = "perspective"
    width: int
    height: int
    yaw_deg: Optional[float] = None
    pitch_deg: Optional[float] = None
    hfov_deg: Optional[float] = None
    x0: Optional[float] = None
    y0: Optional[float] = None
    src_width: Optional[float] = None
    src_height: Optional[float] = None


class VlmRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    prompt: str
    image_b64: str
    model: Optional[str] = None
    grid: Optional[GridExtension] = None
    image_id: Optional[str] = None


class VlmResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")
    text: str


class OvdRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    image_b64: str
    query: str
    viewport: Optional[ViewportExtension] = None
    image_id: Optional[str] = None


class OvdResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")
    boxes: list[list[float]] = Field(default_factory=list)
    points: list[list[float]] = Field(default_factory=list)
    scores: list[float] = Field(default_factory=list)


class SamRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    image_b64: str
    box: list[float] = Field(min_length=4, max_length=4)
    points: list[list[float]] = Field(default_factory=list)
    viewport: Optional[ViewportExtension] = None
    image_id: Optional[str] = None


class SamResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")
    mask_b64: str
