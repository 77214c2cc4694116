"""Shared runner for the pap-wire/1 conformance vectors."""
from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from pap.dataset import AnnotationRecord, Dataset, write_annotations
from pap.image_io import decode_png, save_mask, save_png

VECTORS_PATH = Path(__file__).parent.parent / "src" / "pap" / "assets" / "wire_testvectors.json"


def load_vectors() -> dict:
    return json.loads(VECTORS_PATH.read_text())


def conformance_dataset(root: Path) -> Dataset:
    """Materialize the dataset_contract records on disk."""
    vectors = load_vectors()
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    records = []
    for spec in vectors["dataset_contract"]["records"]:
        w, h = spec["erp_width"], spec["erp_height"]
        x0, y0, x1, y1 = spec["gt_rect"]
        gt = np.zeros((h, w), dtype=bool)
        gt[y0:y1, x0:x1] = True
        save_png(root / "images" / f"{spec['id']}.png",
                 np.full((h, w, 3), 70, dtype=np.uint8))
        save_mask(root / "masks" / f"{spec['id']}.png", gt)
        records.append(AnnotationRecord(
            id=spec["id"],
            image_path=f"images/{spec['id']}.png",
            question=spec["question"],
            object_name=spec["object_name"],
            mask_path=f"masks/{spec['id']}.png",
        ))
    write_annotations(root / "annotations.jsonl", records)
    return Dataset(root, records)


_TYPE_CHECKS = {
    "str": lambda v: isinstance(v, str),
    "list": lambda v: isinstance(v, list),
    "bool": lambda v: isinstance(v, bool),
}


def run_case(client, case: dict) -> None:
    """Execute one vector case against a TestClient-style client."""
    if case["method"] == "GET":
        resp = client.get(case["path"])
    else:
        resp = client.post(case["path"], json=case["json"])
    assert resp.status_code == case["expect_status"], (
        f"{case['name']}: expected {case['expect_status']}, "
        f"got {resp.status_code}: {resp.text[:200]}")
    if case["expect_status"] != 200:
        return
    body = resp.json()
    for key, value in case.get("expect_fields", {}).items():
        assert body.get(key) == value, (case["name"], key, body)
    for key, typename in case.get("response_schema", {}).items():
        assert key in body, (case["name"], key)
        assert _TYPE_CHECKS[typename](body[key]), (case["name"], key, type(body[key]))
    if "expect_mask_dims" in case:
        w, h = case["expect_mask_dims"]
        mask = decode_png(base64.b64decode(body["mask_b64"]))
        assert mask.shape[:2] == (h, w), (case["name"], mask.shape)
