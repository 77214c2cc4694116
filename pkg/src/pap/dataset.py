"""Dataset ingestion: JSONL annotations + image/mask rasters.

Layout: a dataset directory holds ``annotations.jsonl`` (one record per
line) plus the image and mask files it references (paths relative to the
directory). Masks are single-channel PNGs, 0/255, at panorama dims.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetFormatError
from .image_io import load_image, load_mask

ANNOTATIONS_NAME = "annotations.jsonl"

_REQUIRED_KEYS = ("id", "image_path", "question", "object_name", "mask_path")


@dataclass(frozen=True)
class AnnotationRecord:
    id: str
    image_path: str
    question: str
    object_name: str
    mask_path: str
    scene_category: str | None = None
    subset: str | None = None  # hard | normal, when pre-assigned

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in _REQUIRED_KEYS}
        if self.scene_category is not None:
            out["scene_category"] = self.scene_category
        if self.subset is not None:
            out["subset"] = self.subset
        return out


def classify_difficulty(mask: np.ndarray, area: int | None = None) -> str:
    """hard iff area fraction > 30% or < 0.1%, or the mask touches both
    vertical image edges (seam truncation)."""
    total = mask.shape[0] * mask.shape[1]
    area = int(mask.sum()) if area is None else area
    frac = area / total
    if frac > 0.30 or frac < 0.001:
        return "hard"
    if mask[:, 0].any() and mask[:, -1].any():
        return "hard"
    return "normal"


class Dataset:
    def __init__(self, root: Path, records: list[AnnotationRecord]):
        self.root = Path(root)
        self.records = records
        self.by_id = {r.id: r for r in records}
        self._mask_cache: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.records)

    def image(self, rec: AnnotationRecord) -> np.ndarray:
        return load_image(self.root / rec.image_path)

    def mask(self, rec: AnnotationRecord) -> np.ndarray:
        cached = self._mask_cache.get(rec.id)
        if cached is None:
            path = self.root / rec.mask_path
            if not path.exists():
                raise DatasetFormatError(rec.id, f"mask file missing: {rec.mask_path}")
            cached = load_mask(path)
            self._mask_cache[rec.id] = cached
        return cached

    def find_by_question(self, question: str) -> AnnotationRecord | None:
        hits = [r for r in self.records if r.question == question]
        return hits[0] if len(hits) == 1 else None

    def find_by_object(self, name: str) -> AnnotationRecord | None:
        hits = [r for r in self.records if r.object_name == name]
        return hits[0] if len(hits) == 1 else None


def load_dataset(root: str | Path) -> Dataset:
    root = Path(root)
    ann = root / ANNOTATIONS_NAME
    if not ann.exists():
        raise DatasetFormatError("<dataset>", f"{ann} not found")
    records = []
    seen = set()
    for lineno, line in enumerate(ann.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"line {lineno}", f"bad JSON: {exc}") from exc
        missing = [k for k in _REQUIRED_KEYS if not obj.get(k)]
        if missing:
            raise DatasetFormatError(str(obj.get("id", f"line {lineno}")),
                                     f"missing keys: {missing}")
        rec = AnnotationRecord(
            id=str(obj["id"]),
            image_path=str(obj["image_path"]),
            question=str(obj["question"]),
            object_name=str(obj["object_name"]),
            mask_path=str(obj["mask_path"]),
            scene_category=obj.get("scene_category"),
            subset=obj.get("subset"),
        )
        if rec.subset not in (None, "hard", "normal"):
            raise DatasetFormatError(rec.id, f"bad subset {rec.subset!r}")
        if rec.id in seen:
            raise DatasetFormatError(rec.id, "duplicate id")
        seen.add(rec.id)
        if not (root / rec.image_path).exists():
            raise DatasetFormatError(rec.id, f"image file missing: {rec.image_path}")
        records.append(rec)
    return Dataset(root, records)


def write_annotations(path: str | Path, records: list[AnnotationRecord]) -> None:
    lines = [json.dumps(r.to_json(), sort_keys=True) for r in records]
    Path(path).write_text("\n".join(lines) + "\n")
