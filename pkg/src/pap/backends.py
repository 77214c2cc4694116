"""Model backend abstraction over the pap-wire/1 protocol.

A backend is anything with a ``kind``, a ``post(path, payload) -> dict``
transport, and a ``describe()`` identifier. HttpBackend talks to a real
server; in-process doubles (oracle mocks, scripted replies) implement the
same surface so swapping transports cannot change pipeline output.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np
import requests

from . import wire
from .errors import BackendError, MaskDimMismatch, NoDetection, Timeout


@dataclass(frozen=True)
class ModelBackendConfig:
    kind: str  # vlm | ovd | sam
    endpoint_url: str
    timeout_s: float = 60.0
    retries: int = 2
    auth_token: str | None = None
    model: str | None = None
    backoff_base_s: float = 1.0

    def __post_init__(self):
        if self.kind not in ("vlm", "ovd", "sam"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if not self.endpoint_url:
            raise ValueError("endpoint_url must be non-empty")


@dataclass(frozen=True)
class Detection:
    """OVD output in viewport pixel coordinates."""

    box: tuple[float, float, float, float]  # x0, y0, x1, y1 with x0<x1, y0<y1
    points: tuple[tuple[float, float], ...]
    score: float
    label: str


@runtime_checkable
class ModelBackend(Protocol):
    kind: str

    def post(self, path: str, payload: dict) -> dict: ...

    def describe(self) -> str: ...


class HttpBackend:
    """JSON-over-HTTP transport with exponential-backoff retries.

    5xx, connection failures, and timeouts are retried (base 1s, x2);
    4xx fail immediately. Timeout raises after retries are exhausted.
    """

    def __init__(self, config: ModelBackendConfig):
        self.config = config
        self.kind = config.kind
        self._session = requests.Session()

    def describe(self) -> str:
        return f"{self.config.kind}@{self.config.endpoint_url}"

    def _headers(self) -> dict:
        token = self.config.auth_token or os.environ.get(wire.AUTH_ENV_VAR)
        return {"Authorization": f"Bearer {token}"} if token else {}

    def post(self, path: str, payload: dict) -> dict:
        url = self.config.endpoint_url.rstrip("/") + path
        delay = self.config.backoff_base_s
        last_error: BackendError | None = None
        for attempt in range(self.config.retries + 1):
            try:
                resp = self._session.post(url, json=payload, headers=self._headers(),
                                          timeout=self.config.timeout_s)
            except requests.Timeout:
                last_error = Timeout(f"{url} timed out after {self.config.timeout_s}s")
            except requests.RequestException as exc:
                last_error = BackendError(f"{url}: {exc}")
            else:
                if resp.status_code == 200:
                    return resp.json()
                if resp.status_code >= 500:
                    last_error = BackendError(f"{url} -> {resp.status_code}",
                                              status=resp.status_code, body=resp.text)
                else:
                    raise BackendError(f"{url} -> {resp.status_code}",
                                       status=resp.status_code, body=resp.text)
            if attempt < self.config.retries:
                time.sleep(delay)
                delay *= 2.0
        assert last_error is not None
        raise last_error

    def health(self) -> dict:
        resp = self._session.get(self.config.endpoint_url.rstrip("/") + wire.HEALTH_PATH,
                                 headers=self._headers(), timeout=self.config.timeout_s)
        resp.raise_for_status()
        return resp.json()


def _drop_none(payload: dict) -> dict:
    return {k: v for k, v in payload.items() if v is not None}


def vlm_complete(backend: ModelBackend, image: np.ndarray, prompt: str,
                 grid: dict | None = None, image_id: str | None = None,
                 model: str | None = None) -> str:
    """Ask the VLM backend for a completion over an image + prompt."""
    if backend.kind != "vlm":
        raise BackendError(f"expected vlm backend, got {backend.kind}")
    payload = _drop_none({
        "prompt": prompt,
        "image_b64": wire.image_to_b64(image),
        "model": model,
        "grid": grid,
        "image_id": image_id,
    })
    reply = backend.post(wire.VLM_PATH, payload)
    try:
        return str(reply["text"])
    except (KeyError, TypeError) as exc:
        raise BackendError(f"malformed vlm reply: {reply!r}") from exc


def ovd_detect(backend: ModelBackend, image: np.ndarray, query: str,
               viewport: dict | None = None, image_id: str | None = None) -> Detection:
    """Query the open-vocabulary detector; returns the best-scoring box.

    Points are the returned key points falling inside the chosen box, or
    the box center when none do.
    """
    if backend.kind != "ovd":
        raise BackendError(f"expected ovd backend, got {backend.kind}")
    if not query:
        raise NoDetection("empty query")
    h, w = image.shape[:2]
    payload = _drop_none({
        "image_b64": wire.image_to_b64(image),
        "query": query,
        "viewport": viewport,
        "image_id": image_id,
    })
    reply = backend.post(wire.OVD_PATH, payload)
    boxes = reply.get("boxes") or []
    if not boxes:
        raise NoDetection(f"no boxes for query {query!r}")
    scores = reply.get("scores") or [1.0] * len(boxes)
    if len(scores) != len(boxes):
        raise BackendError("scores/boxes length mismatch")
    best = int(np.argmax(scores))
    x0, y0, x1, y1 = (float(v) for v in boxes[best])
    x0, x1 = max(0.0, x0), min(float(w), x1)
    y0, y1 = max(0.0, y0), min(float(h), y1)
    if not (x0 < x1 and y0 < y1):
        raise NoDetection(f"degenerate box for query {query!r}")
    inside = tuple(
        (float(px), float(py)) for px, py in (reply.get("points") or [])
        if x0 <= px <= x1 and y0 <= py <= y1)
    if not inside:
        inside = (((x0 + x1) / 2.0, (y0 + y1) / 2.0),)
    return Detection((x0, y0, x1, y1), inside, float(scores[best]), query)


def sam_segment(backend: ModelBackend, image: np.ndarray, det: Detection,
                viewport: dict | None = None, image_id: str | None = None) -> np.ndarray:
    """Prompt the segmenter with box + points; returns a bool mask."""
    if backend.kind != "sam":
        raise BackendError(f"expected sam backend, got {backend.kind}")
    h, w = image.shape[:2]
    payload = _drop_none({
        "image_b64": wire.image_to_b64(image),
        "box": list(det.box),
        "points": [list(p) for p in det.points],
        "viewport": viewport,
        "image_id": image_id,
    })
    reply = backend.post(wire.SAM_PATH, payload)
    try:
        mask = wire.b64_to_mask(reply["mask_b64"])
    except (KeyError, TypeError) as exc:
        raise BackendError(f"malformed sam reply: {reply!r}") from exc
    if mask.shape != (h, w):
        raise MaskDimMismatch(
            f"mask {mask.shape[1]}x{mask.shape[0]} != image {w}x{h}")
    return mask


def whole_frame_detection(width: int, height: int, label: str) -> Detection:
    """Fallback prompt covering the full viewport."""
    return Detection((0.0, 0.0, float(width), float(height)),
                     ((width / 2.0, height / 2.0),), 0.0, label)


@dataclass
class ScriptedBackend:
    """Test double replaying canned wire responses in order."""

    kind: str
    responses: list
    identifier: str = "scripted"
    requests_seen: list = field(default_factory=list)

    def post(self, path: str, payload: dict) -> dict:
        self.requests_seen.append((path, payload))
        if not self.responses:
            raise BackendError("scripted backend exhausted")
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item

    def describe(self) -> str:
        return self.identifier
