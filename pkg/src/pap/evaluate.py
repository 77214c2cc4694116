"""Dataset evaluation: run the pipeline per record and aggregate metrics.

Records run in parallel (backends must tolerate concurrent requests);
aggregation is a deterministic fold over id-sorted results. Failed
pipelines score IoU 0 and stay in the count so numbers remain comparable
across methods.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import AnnotationRecord, Dataset, classify_difficulty, load_dataset
from .errors import DatasetFormatError, PapError
from .geometry import ErpImage
from .metrics import MetricReport, SampleScore, aggregate, mask_overlap
from .pipeline import BackendSet, PipelineConfig, run_pipeline

STAGES = ("route", "gaze", "detect", "segment", "reproject")


@dataclass(frozen=True)
class EvalConfig:
    concurrency: int = 0  # 0 -> cpu count
    subset: str | None = None  # evaluate only "hard" or "normal"
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)


@dataclass
class SampleOutcome:
    record_id: str
    subset: str
    score: SampleScore
    timings_ms: dict = field(default_factory=dict)
    error: str | None = None


def evaluate_record(dataset: Dataset, rec: AnnotationRecord, backends: BackendSet,
                    cfg: PipelineConfig) -> SampleOutcome:
    image = dataset.image(rec)
    gt = dataset.mask(rec)
    if gt.shape != image.shape[:2]:
        raise DatasetFormatError(rec.id, "mask dims != image dims")
    subset = rec.subset or classify_difficulty(gt)
    try:
        result = run_pipeline(ErpImage(image), rec.question, backends, cfg,
                              image_id=rec.id)
    except PapError as exc:
        # failed samples contribute IoU 0, counted
        return SampleOutcome(rec.id, subset,
                             SampleScore(0, int(gt.sum()), 0.0), error=str(exc))
    score = mask_overlap(result.mask_erp, gt)
    return SampleOutcome(rec.id, subset, score, dict(result.timings_ms))


def evaluate_dataset(dataset: Dataset | str | Path, backends: BackendSet,
                     cfg: EvalConfig | None = None,
                     report_path: str | Path | None = None,
                     per_sample_path: str | Path | None = None,
                     ) -> tuple[MetricReport, list[SampleOutcome]]:
    cfg = cfg or EvalConfig()
    if not isinstance(dataset, Dataset):
        dataset = load_dataset(dataset)
    records = dataset.records
    if cfg.subset:
        records = [r for r in records
                   if (r.subset or classify_difficulty(dataset.mask(r))) == cfg.subset]
    if not records:
        raise DatasetFormatError("<dataset>", "no records to evaluate")

    workers = cfg.concurrency if cfg.concurrency > 0 else (min(8, len(records)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(
                lambda r: evaluate_record(dataset, r, backends, cfg.pipeline), records))
    else:
        outcomes = [evaluate_record(dataset, r, backends, cfg.pipeline) for r in records]

    outcomes.sort(key=lambda o: o.record_id)
    report = aggregate([o.score for o in outcomes])
    for name in ("hard", "normal"):
        group = [o.score for o in outcomes if o.subset == name]
        if group:
            report.subsets[name] = aggregate(group)

    if report_path is not None:
        Path(report_path).write_text(json.dumps(report.to_json(), indent=2, sort_keys=True))
    if per_sample_path is not None:
        with open(per_sample_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "iou", "subset", *(f"{s}_ms" for s in STAGES), "error"])
            for o in outcomes:
                writer.writerow([
                    o.record_id, f"{o.score.iou:.6f}", o.subset,
                    *(f"{o.timings_ms.get(s, float('nan')):.2f}" for s in STAGES),
                    o.error or "",
                ])
    return report, outcomes
