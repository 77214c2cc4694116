import json

import numpy as np
import pytest

from pap.dataset import (AnnotationRecord, classify_difficulty, load_dataset,
                         write_annotations)
from pap.errors import DatasetFormatError
from pap.image_io import (decode_png, encode_png, load_image, load_mask,
                          resize, save_mask, save_png)


def blob_mask(w, h, frac, seam=False, left_only=False):
    """Mask with approximately ``frac`` area; optionally touching edges."""
    mask = np.zeros((h, w), dtype=bool)
    n_rows = max(1, int(round(frac * w * h / w)))
    if seam:
        half = max(1, w // 20)
        mask[h // 3: h // 3 + max(1, n_rows), :half] = True
        mask[h // 3: h // 3 + max(1, n_rows), -half:] = True
    elif left_only:
        mask[h // 3: h // 3 + n_rows, : w // 2] = True
    else:
        mask[h // 3: h // 3 + n_rows, w // 4: 3 * w // 4] = True
    return mask


class TestClassifyDifficulty:
    def test_large_mask_hard(self):
        mask = np.zeros((100, 200), bool)
        mask[:70, :100] = True  # 35%
        assert classify_difficulty(mask) == "hard"

    def test_centered_blob_normal(self):
        mask = np.zeros((100, 200), bool)
        mask[40:60, 80:130] = True  # 5%
        assert classify_difficulty(mask) == "normal"

    def test_tiny_mask_hard(self):
        mask = np.zeros((100, 200), bool)
        mask[50, 100:110] = True  # 0.05%
        assert classify_difficulty(mask) == "hard"

    def test_seam_touching_hard(self):
        mask = np.zeros((100, 200), bool)
        mask[40:45, 0:3] = True
        mask[40:45, 197:] = True
        assert classify_difficulty(mask) == "hard"

    def test_single_edge_not_seam(self):
        mask = np.zeros((100, 200), bool)
        mask[30:60, 0:50] = True  # touches left edge only, 7.5%
        assert classify_difficulty(mask) == "normal"

    def test_empty_mask_hard(self):
        assert classify_difficulty(np.zeros((10, 20), bool)) == "hard"


class TestLoader:
    def make_dataset(self, root, records=None, skip_files=False):
        (root / "images").mkdir(exist_ok=True)
        (root / "masks").mkdir(exist_ok=True)
        if records is None:
            records = [AnnotationRecord("r1", "images/r1.png", "where?", "thing",
                                        "masks/r1.png")]
        if not skip_files:
            for r in records:
                save_png(root / r.image_path, np.zeros((10, 20, 3), np.uint8))
                save_mask(root / r.mask_path, np.zeros((10, 20), bool))
        write_annotations(root / "annotations.jsonl", records)
        return records

    def test_roundtrip(self, tmp_path):
        self.make_dataset(tmp_path)
        ds = load_dataset(tmp_path)
        assert len(ds) == 1
        assert ds.records[0].question == "where?"
        assert ds.mask(ds.records[0]).shape == (10, 20)

    def test_missing_annotations(self, tmp_path):
        with pytest.raises(DatasetFormatError):
            load_dataset(tmp_path)

    def test_missing_image_file(self, tmp_path):
        self.make_dataset(tmp_path, skip_files=True)
        with pytest.raises(DatasetFormatError) as exc_info:
            load_dataset(tmp_path)
        assert "r1" in str(exc_info.value)

    def test_missing_key(self, tmp_path):
        (tmp_path / "annotations.jsonl").write_text(
            json.dumps({"id": "x", "image_path": "a.png"}) + "\n")
        with pytest.raises(DatasetFormatError) as exc_info:
            load_dataset(tmp_path)
        assert "missing keys" in str(exc_info.value)

    def test_duplicate_id(self, tmp_path):
        rec = AnnotationRecord("r1", "images/r1.png", "q", "o", "masks/r1.png")
        self.make_dataset(tmp_path, [rec])
        lines = (tmp_path / "annotations.jsonl").read_text()
        (tmp_path / "annotations.jsonl").write_text(lines + lines)
        with pytest.raises(DatasetFormatError) as exc_info:
            load_dataset(tmp_path)
        assert "duplicate" in str(exc_info.value)

    def test_bad_json_line(self, tmp_path):
        (tmp_path / "annotations.jsonl").write_text("{not json}\n")
        with pytest.raises(DatasetFormatError):
            load_dataset(tmp_path)


class TestImageIO:
    def test_png_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 255, (20, 30, 3), dtype=np.uint8)
        save_png(tmp_path / "x.png", img)
        assert np.array_equal(load_image(tmp_path / "x.png"), img)

    def test_jpeg_readable(self, tmp_path):
        from PIL import Image

        img = np.full((32, 64, 3), 130, dtype=np.uint8)
        Image.fromarray(img).save(tmp_path / "x.jpg", quality=95)
        loaded = load_image(tmp_path / "x.jpg")
        assert loaded.shape == (32, 64, 3)
        assert abs(int(loaded.mean()) - 130) <= 2

    def test_mask_roundtrip(self, tmp_path):
        mask = np.zeros((15, 25), bool)
        mask[3:7, 5:20] = True
        save_mask(tmp_path / "m.png", mask)
        assert np.array_equal(load_mask(tmp_path / "m.png"), mask)

    def test_encode_decode(self):
        img = np.arange(12, dtype=np.uint8).reshape(3, 4)
        assert np.array_equal(decode_png(encode_png(img)), img)

    def test_resize_box_for_big_factors(self):
        img = np.zeros((100, 200), np.uint8)
        img[:, ::2] = 200  # 1px comb survives area averaging
        small = resize(img, 50, 25)
        assert small.shape == (25, 50)
        assert 80 <= small.mean() <= 120

    def test_resize_identity(self):
        img = np.full((10, 10), 5, np.uint8)
        out = resize(img, 10, 10)
        assert np.array_equal(out, img)
        assert out is not img
