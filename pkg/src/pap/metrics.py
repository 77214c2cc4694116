"""Segmentation metrics: per-sample IoU and dataset-level aggregation.

gIoU is the mean per-sample IoU; cIoU the ratio of summed intersections
to summed unions; P@50 the fraction of samples with IoU strictly above
0.5; P@50:95 the mean of those fractions over thresholds 0.50, 0.55, ...
0.95. Threshold comparison is strict '>' throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyEvaluation

THRESHOLDS = tuple((50 + 5 * k) / 100 for k in range(10))


@dataclass(frozen=True)
class SampleScore:
    intersection: int
    union: int
    iou: float


def mask_overlap(a: np.ndarray, b: np.ndarray) -> SampleScore:
    """(intersection, union, iou) for two binary masks of equal dims.

    Both empty counts as IoU 1.0 (absence correctly predicted); exactly
    one empty is 0.0.
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask dims differ: {a.shape} vs {b.shape}")
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    return SampleScore(inter, union, iou_from_counts(inter, union))


def iou_from_counts(intersection: int, union: int) -> float:
    if union == 0:
        return 1.0
    return intersection / union


def iou(a: np.ndarray, b: np.ndarray) -> float:
    return mask_overlap(a, b).iou


@dataclass
class MetricReport:
    n: int
    giou: float
    ciou: float
    p50: float
    p50_95: float
    per_sample_ious: list[float] = field(default_factory=list)
    subsets: dict = field(default_factory=dict)  # name -> MetricReport

    def to_json(self) -> dict:
        out = {
            "n": self.n,
            "giou": self.giou,
            "ciou": self.ciou,
            "p50": self.p50,
            "p50_95": self.p50_95,
            "per_sample_ious": self.per_sample_ious,
        }
        if self.subsets:
            out["subsets"] = {k: v.to_json() for k, v in self.subsets.items()}
        return out


def aggregate(per_sample: list[SampleScore | tuple]) -> MetricReport:
    """Fold per-sample (intersection, union, iou) scores into a report."""
    if not per_sample:
        raise EmptyEvaluation("no samples to aggregate")
    scores = [s if isinstance(s, SampleScore) else SampleScore(*s) for s in per_sample]
    ious = [s.iou for s in scores]
    total_union = sum(s.union for s in scores)
    total_inter = sum(s.intersection for s in scores)
    n = len(scores)
    precisions = [sum(1 for v in ious if v > t) / n for t in THRESHOLDS]
    return MetricReport(
        n=n,
        giou=float(sum(ious) / n),
        ciou=iou_from_counts(total_inter, total_union),
        p50=precisions[0],
        p50_95=float(sum(precisions) / len(precisions)),
        per_sample_ious=ious,
    )
