"""FastAPI servers exposing one engine each behind pap-wire/1.

Lifecycle: the engine loads in a background thread at startup; requests
arriving before it finishes get 503, schema violations get 422, and
inference exceptions get 500 with an error body. Request concurrency is
bounded per config; adapters are stateless across requests.
"""
from __future__ import annotations

import os
import threading
from dataclasses import dataclass

from fastapi import FastAPI, Header, HTTPException

from . import schemas
from .engines import create_engine


@dataclass(frozen=True)
class AdapterConfig:
    kind: str  # vlm | ovd | sam
    engine_spec: str = "static"
    device: str = "cpu"
    port: int = 8008
    host: str = "127.0.0.1"
    max_concurrency: int = 1
    auth_token: str | None = None

    def __post_init__(self):
        if self.kind not in ("vlm", "ovd", "sam"):
            raise ValueError(f"unknown adapter kind {self.kind!r}")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")


class EngineHolder:
    """Tracks load state: loading -> ready | failed."""

    def __init__(self, engine, eager: bool = False):
        self.engine = engine
        self.state = "loading"
        self.error: str | None = None
        self._lock = threading.Lock()
        if eager:
            self._load()
        else:
            threading.Thread(target=self._load, daemon=True).start()

    def _load(self) -> None:
        try:
            self.engine.load()
        except Exception as exc:  # surfaced as 500 with the error body
            with self._lock:
                self.state = "failed"
                self.error = f"{type(exc).__name__}: {exc}"
            return
        with self._lock:
            self.state = "ready"

    def require_ready(self) -> None:
        if self.state == "loading":
            raise HTTPException(status_code=503, detail="model is loading")
        if self.state == "failed":
            raise HTTPException(status_code=500,
                                detail=f"model failed to load: {self.error}")


def build_app(cfg: AdapterConfig, engine=None, eager_load: bool = True) -> FastAPI:
    engine = engine if engine is not None else create_engine(
        cfg.kind, cfg.engine_spec, cfg.device)
    holder = EngineHolder(engine, eager=eager_load)
    gate = threading.BoundedSemaphore(cfg.max_concurrency)
    expected_token = cfg.auth_token or os.environ.get(schemas.AUTH_ENV_VAR)
    app = FastAPI(title=f"pap adapter ({cfg.kind})", version=schemas.WIRE_VERSION)
    app.state.holder = holder

    def check_auth(authorization: str | None) -> None:
        if expected_token and authorization != f"Bearer {expected_token}":
            raise HTTPException(status_code=401, detail="bad or missing token")

    def run(fn):
        holder.require_ready()
        with gate:
            try:
                return fn()
            except HTTPException:
                raise
            except Exception as exc:
                raise HTTPException(status_code=500,
                                    detail=f"inference failed: {exc}") from exc

    @app.get(schemas.HEALTH_PATH)
    def healthz():
        return {"ok": True, "model": getattr(engine, "identifier", cfg.engine_spec),
                "kind": cfg.kind, "state": holder.state}

    if cfg.kind == "vlm":
        @app.post(schemas.VLM_PATH, response_model=schemas.VlmResponse)
        def complete(req: schemas.VlmRequest,
                     authorization: str | None = Header(default=None)):
            check_auth(authorization)
            image = schemas.decode_image(req.image_b64)
            return {"text": run(lambda: engine.complete(image, req.prompt))}

    elif cfg.kind == "ovd":
        @app.post(schemas.OVD_PATH, response_model=schemas.OvdResponse)
        def detect(req: schemas.OvdRequest,
                   authorization: str | None = Header(default=None)):
            check_auth(authorization)
            image = schemas.decode_image(req.image_b64)
            boxes, points, scores = run(lambda: engine.detect(image, req.query))
            return {"boxes": boxes, "points": points, "scores": scores}

    else:
        @app.post(schemas.SAM_PATH, response_model=schemas.SamResponse)
        def segment(req: schemas.SamRequest,
                    authorization: str | None = Header(default=None)):
            check_auth(authorization)
            image = schemas.decode_image(req.image_b64)
            mask = run(lambda: engine.segment(image, req.box, req.points))
            return {"mask_b64": schemas.encode_mask(mask)}

    return app


def serve(cfg: AdapterConfig) -> None:
    import uvicorn

    uvicorn.run(build_app(cfg, eager_load=False), host=cfg.host, port=cfg.port,
                log_level="info")


def serve_vlm(cfg: AdapterConfig) -> None:
    serve(cfg)


def serve_ovd(cfg: AdapterConfig) -> None:
    serve(cfg)


def serve_sam(cfg: AdapterConfig) -> None:
    serve(cfg)
