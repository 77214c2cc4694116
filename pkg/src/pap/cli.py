"""Batch CLI: predict, evaluate, viewport, grid, split, mock-serve.

Exit codes: 0 success, 1 usage/input error, 2 grounding failure,
3 backend failure, 4 dataset error.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .backends import HttpBackend
from .config import Config, load_config
from .dataset import classify_difficulty, load_dataset, write_annotations
from .errors import (BackendError, ConfigError, DatasetFormatError,
                     GroundingFailed, PapError, PipelineError, Timeout)
from .evaluate import EvalConfig, evaluate_dataset
from .gaze import footprint_polygon
from .geometry import ErpImage, ViewportSpec, extract_viewport
from .grid import GridSpec, render_grid_overlay
from .image_io import load_image, save_mask, save_png
from .mock_server import NoiseConfig, mock_serve
from .pipeline import BackendSet, PipelineResult, run_pipeline
from .routing import RoutingResult

EXIT_USAGE = 1
EXIT_GROUNDING = 2
EXIT_BACKEND = 3
EXIT_DATASET = 4


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _exit_code_for(exc: PapError) -> int:
    if isinstance(exc, GroundingFailed):
        return EXIT_GROUNDING
    if isinstance(exc, (BackendError, Timeout)):
        return EXIT_BACKEND
    if isinstance(exc, PipelineError):
        cause = exc.cause
        if isinstance(cause, (BackendError, Timeout)):
            return EXIT_BACKEND
        return EXIT_GROUNDING
    if isinstance(exc, DatasetFormatError):
        return EXIT_DATASET
    return EXIT_USAGE


def _load_config_or_fail(path: str | None) -> Config:
    try:
        return load_config(path)
    except ConfigError as exc:
        _fail(EXIT_USAGE, str(exc))


def _backends(cfg: Config) -> BackendSet:
    return BackendSet(vlm=HttpBackend(cfg.backend_config("vlm")),
                      ovd=HttpBackend(cfg.backend_config("ovd")),
                      sam=HttpBackend(cfg.backend_config("sam")))


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        _fail(EXIT_USAGE, f"file not found: {path}")
    return p


@click.group()
def main():
    """Panoramic affordance pipeline."""


def _write_debug(debug_dir: str, result: PipelineResult, grid: GridSpec,
                 erp: ErpImage) -> None:
    out = Path(debug_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = result.routing_state
    save_png(out / "overlay_final.png", render_grid_overlay(state.image, grid))
    save_png(out / "viewport.png", result.viewport_image)
    save_mask(out / "mask_persp.png", result.mask_persp)

    view = result.viewport_spec
    if isinstance(view, ViewportSpec):
        spec_json = {
            "kind": "perspective",
            "yaw_deg": view.yaw_deg, "pitch_deg": view.pitch_deg,
            "hfov_deg": view.hfov_deg, "width": view.width, "height": view.height,
            "footprint_polygon": footprint_polygon(view, erp.width_px, erp.height_px),
        }
    else:
        spec_json = {"kind": "erp_window", "x0": view.x0, "y0": view.y0,
                     "src_width": view.src_width, "src_height": view.src_height,
                     "width": view.out_width, "height": view.out_height}
    (out / "viewport_spec.json").write_text(json.dumps(spec_json, indent=2))

    def result_json(r: RoutingResult) -> dict:
        return {"grid_boxes": list(r.grid_boxes), "object_name": r.object_name,
                "object_part": r.object_part, "small": r.small}

    region = state.crop_region
    routing_json = {
        "depth": state.depth,
        "history": [result_json(r) for r in state.history],
        "crop_region": {"x0": region.x0, "y0": region.y0, "width": region.width,
                        "height": region.height, "wraps_seam": region.wraps_seam},
    }
    (out / "routing.json").write_text(json.dumps(routing_json, indent=2))


@main.command()
@click.option("--image", required=True, help="Panorama (PNG or JPEG, 2:1)")
@click.option("--task", required=True, help="Task / question text")
@click.option("--config", "config_path", default=None, help="JSON config")
@click.option("--out", required=True, help="Output ERP mask PNG")
@click.option("--debug-dir", default=None, help="Write 5 debug artifacts here")
@click.option("--image-id", default=None,
              help="Dataset record id forwarded to oracle mock backends")
def predict(image, task, config_path, out, debug_dir, image_id):
    """Predict the panoramic affordance mask for one task."""
    cfg = _load_config_or_fail(config_path)
    path = _require_file(image)
    try:
        erp = ErpImage(load_image(path))
    except PapError as exc:
        _fail(EXIT_USAGE, f"{image}: {exc}")
    try:
        result = run_pipeline(erp, task, _backends(cfg), cfg.pipeline_config(),
                              image_id=image_id)
    except PapError as exc:
        _fail(_exit_code_for(exc), str(exc))
    save_mask(out, result.mask_erp)
    if debug_dir:
        _write_debug(debug_dir, result, cfg.grid, erp)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--dataset", required=True, help="Dataset directory")
@click.option("--config", "config_path", default=None)
@click.option("--report", required=True, help="Output report JSON path")
@click.option("--subset", type=click.Choice(["hard", "normal"]), default=None)
def evaluate(dataset, config_path, report, subset):
    """Evaluate the pipeline over a dataset; writes report.json +
    per_sample.csv."""
    cfg = _load_config_or_fail(config_path)
    if not (Path(dataset) / "annotations.jsonl").exists():
        _fail(EXIT_USAGE, f"no dataset at {dataset} (annotations.jsonl missing)")
    try:
        ds = load_dataset(dataset)
        if not ds.records:
            _fail(EXIT_USAGE, f"dataset at {dataset} is empty")
        eval_cfg = EvalConfig(concurrency=cfg.eval.concurrency,
                              subset=subset or cfg.eval.subset,
                              pipeline=cfg.pipeline_config())
        per_sample = Path(report).with_name("per_sample.csv")
        metrics, outcomes = evaluate_dataset(ds, _backends(cfg), eval_cfg,
                                             report_path=report,
                                             per_sample_path=per_sample)
    except DatasetFormatError as exc:
        _fail(EXIT_DATASET, str(exc))
    except PapError as exc:
        _fail(_exit_code_for(exc), str(exc))
    click.echo(f"n={metrics.n} gIoU={metrics.giou:.4f} cIoU={metrics.ciou:.4f} "
               f"P@50={metrics.p50:.4f} P@50:95={metrics.p50_95:.4f}")
    failed = sum(1 for o in outcomes if o.error)
    if failed:
        click.echo(f"{failed} samples failed (scored 0)", err=True)


@main.command()
@click.option("--image", required=True)
@click.option("--yaw", type=float, required=True)
@click.option("--pitch", type=float, required=True)
@click.option("--fov", type=float, required=True, help="Horizontal FoV, degrees")
@click.option("--width", type=int, required=True)
@click.option("--height", type=int, required=True)
@click.option("--out", required=True)
def viewport(image, yaw, pitch, fov, width, height, out):
    """Extract a rectilinear viewport from a panorama."""
    path = _require_file(image)
    try:
        spec = ViewportSpec(yaw, pitch, fov, width, height)
    except PapError as exc:
        _fail(EXIT_USAGE, str(exc))
    save_png(out, extract_viewport(load_image(path), spec))
    click.echo(f"wrote {out}")


@main.command()
@click.option("--image", required=True)
@click.option("--cols", type=int, default=4)
@click.option("--rows", type=int, default=3)
@click.option("--line-width", type=int, default=5)
@click.option("--font-size", type=int, default=50)
@click.option("--out", required=True)
def grid(image, cols, rows, line_width, font_size, out):
    """Render the numbered grid overlay."""
    path = _require_file(image)
    try:
        spec = GridSpec(cols=cols, rows=rows, line_width_px=line_width,
                        font_size_px=font_size)
        save_png(out, render_grid_overlay(load_image(path), spec))
    except PapError as exc:
        _fail(EXIT_USAGE, str(exc))
    click.echo(f"wrote {out}")


@main.command()
@click.option("--dataset", required=True)
@click.option("--out", required=True, help="annotations.jsonl with subset filled")
def split(dataset, out):
    """Classify every record as hard/normal and write updated annotations."""
    try:
        ds = load_dataset(dataset)
        updated = []
        counts = {"hard": 0, "normal": 0}
        for rec in ds.records:
            subset = classify_difficulty(ds.mask(rec))
            counts[subset] += 1
            updated.append(type(rec)(**{**rec.__dict__, "subset": subset}))
        write_annotations(out, updated)
    except DatasetFormatError as exc:
        _fail(EXIT_DATASET, str(exc))
    click.echo(f"hard={counts['hard']} normal={counts['normal']} -> {out}")


@main.command("mock-serve")
@click.option("--dataset", required=True)
@click.option("--port", type=int, default=8008)
@click.option("--host", default="127.0.0.1")
@click.option("--noise-p", type=float, default=0.0,
              help="Probability of perturbing a routed grid index")
@click.option("--jitter", type=int, default=0, help="Detection box jitter, px")
@click.option("--sam-mode", type=click.Choice(["oracle", "boxfill"]),
              default="oracle")
def mock_serve_cmd(dataset, port, host, noise_p, jitter, sam_mode):
    """Serve ground-truth oracle model backends for a dataset."""
    try:
        load_dataset(dataset)
    except DatasetFormatError as exc:
        _fail(EXIT_DATASET, str(exc))
    click.echo(f"serving oracle backends for {dataset} on {host}:{port}")
    mock_serve(dataset, NoiseConfig(grid_p=noise_p, box_jitter_px=jitter),
               port=port, host=host, sam_mode=sam_mode)


if __name__ == "__main__":
    main()
