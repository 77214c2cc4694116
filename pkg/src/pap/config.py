"""JSON config schema for the CLI; unknown keys are rejected.

Absent config (or absent sections) means the published defaults: 4x3
grid, 5 px lines, 50 px digits, routing at 2000x1000 then 1500x1000,
depth cap 2, 10-degree gaze margin.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .backends import ModelBackendConfig
from .errors import ConfigError
from .evaluate import EvalConfig
from .gaze import GazeParams
from .grid import GridSpec
from .pipeline import PipelineConfig
from .routing import RoutingConfig

DEFAULT_ENDPOINT = "http://127.0.0.1:8008"


@dataclass(frozen=True)
class Config:
    grid: GridSpec = field(default_factory=GridSpec)
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    gaze: GazeParams = field(default_factory=GazeParams)
    backends: dict = field(default_factory=dict)  # kind -> ModelBackendConfig
    eval: EvalConfig = field(default_factory=EvalConfig)
    adaptive_gaze: bool = True
    workers: int = 1

    def backend_config(self, kind: str) -> ModelBackendConfig:
        got = self.backends.get(kind)
        if got is not None:
            return got
        return ModelBackendConfig(kind=kind, endpoint_url=DEFAULT_ENDPOINT)

    def pipeline_config(self) -> PipelineConfig:
        routing = RoutingConfig(grid=self.grid, resolutions=self.routing.resolutions,
                                max_depth=self.routing.max_depth,
                                parse_retries=self.routing.parse_retries)
        return PipelineConfig(routing=routing, gaze=self.gaze,
                              adaptive_gaze=self.adaptive_gaze, workers=self.workers)


def _build(cls, data: dict, where: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {where}: {exc}") from exc


def config_from_dict(data: dict) -> Config:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    known = {"grid", "routing", "gaze", "backends", "eval", "adaptive_gaze", "workers"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    grid = _build(GridSpec, data.get("grid", {}), "grid")

    routing_data = dict(data.get("routing", {}))
    if "resolutions" in routing_data:
        routing_data["resolutions"] = tuple(
            tuple(r) for r in routing_data["resolutions"])
    routing_data.pop("grid", None)
    routing = _build(RoutingConfig, {**routing_data, "grid": grid}, "routing")

    gaze = _build(GazeParams, data.get("gaze", {}), "gaze")

    backends = {}
    backends_data = data.get("backends", {})
    if not isinstance(backends_data, dict):
        raise ConfigError("backends must be an object keyed by vlm/ovd/sam")
    for kind, bd in backends_data.items():
        if kind not in ("vlm", "ovd", "sam"):
            raise ConfigError(f"unknown backend kind {kind!r}")
        backends[kind] = _build(ModelBackendConfig, {**bd, "kind": kind},
                                f"backends.{kind}")

    eval_data = dict(data.get("eval", {}))
    eval_data.pop("pipeline", None)
    eval_cfg = _build(EvalConfig, eval_data, "eval")

    return Config(grid=grid, routing=routing, gaze=gaze, backends=backends,
                  eval=eval_cfg, adaptive_gaze=bool(data.get("adaptive_gaze", True)),
                  workers=int(data.get("workers", 1)))


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)
