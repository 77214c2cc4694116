"""pap-wire/1 request/response schemas (server-side copy).

Adapters implement the wire contract independently of the pipeline
package; these models mirror the published schemas. Unknown fields are
rejected (422) to keep mock and live servers behaviorally identical.
"""
from __future__ import annotations

import base64
import io
from typing import Literal, Optional

import numpy as np
from PIL import Image
from pydantic import BaseModel, ConfigDict, Field

WIRE_VERSION = "pap-wire/1"
VLM_PATH = "/v1/vlm/complete"
OVD_PATH = "/v1/ovd/detect"
SAM_PATH = "/v1/sam/segment"
HEALTH_PATH = "/healthz"
AUTH_ENV_VAR = "PAP_AUTH_TOKEN"


def decode_image(b64: str) -> np.ndarray:
    with Image.open(io.BytesIO(base64.b64decode(b64))) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        return np.asarray(im, dtype=np.uint8)


def encode_mask(mask: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(mask.astype(np.uint8) * 255).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


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
    text: str


class OvdRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    image_b64: str
    query: str
    viewport: Optional[ViewportExtension] = None
    image_id: Optional[str] = None


class OvdResponse(BaseModel):
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
    mask_b64: str
