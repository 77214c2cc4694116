"""Inference engines behind the wire endpoints.

Engines are stateless per request. ``create_engine`` resolves a spec
string: "static" builds the offline smoke-test engine, "hf:<model-id>"
wraps a Hugging Face checkpoint (transformers/torch are imported lazily
on load so the server package works without them installed).
"""
from __future__ import annotations

import json
from typing import Protocol

import numpy as np


class VlmEngine(Protocol):
    def load(self) -> None: ...

    def complete(self, image: np.ndarray, prompt: str) -> str: ...


class OvdEngine(Protocol):
    def load(self) -> None: ...

    def detect(self, image: np.ndarray, query: str
               ) -> tuple[list[list[float]], list[list[float]], list[float]]: ...


class SamEngine(Protocol):
    def load(self) -> None: ...

    def segment(self, image: np.ndarray, box: list[float],
                points: list[list[float]]) -> np.ndarray: ...


class StaticVlmEngine:
    """Canned routing-format reply; schema-valid for any prompt."""

    identifier = "static-vlm"

    def load(self) -> None:
        pass

    def complete(self, image: np.ndarray, prompt: str) -> str:
        body = {"grid_boxes": [5], "task": "static", "object_name": "object",
                "object_part": "object", "small": False}
        return "#### Thinking\nstatic engine\n\n#### Output\n" + json.dumps(body)


class CenterBoxOvdEngine:
    """One box over the central half of the image, score 1.0."""

    identifier = "static-ovd"

    def load(self) -> None:
        pass

    def detect(self, image, query):
        h, w = image.shape[:2]
        box = [w / 4.0, h / 4.0, 3 * w / 4.0, 3 * h / 4.0]
        return [box], [[w / 2.0, h / 2.0]], [1.0]


class BoxFillSamEngine:
    """Fills the prompt box; mask dims follow the input image."""

    identifier = "static-sam"

    def load(self) -> None:
        pass

    def segment(self, image, box, points):
        h, w = image.shape[:2]
        mask = np.zeros((h, w), dtype=bool)
        x0, y0, x1, y1 = box
        mask[max(0, int(y0)): min(h, int(np.ceil(y1))),
             max(0, int(x0)): min(w, int(np.ceil(x1)))] = True
        return mask


class HfVlmEngine:
    """Image-text-to-text checkpoint via transformers."""

    def __init__(self, model_id: str, device: str = "cpu",
                 max_new_tokens: int = 512):
        self.identifier = model_id
        self.device = device
        self.max_new_tokens = max_new_tokens
        self._pipe = None

    def load(self) -> None:
        from transformers import pipeline

        self._pipe = pipeline("image-text-to-text", model=self.identifier,
                              device=self.device)

    def complete(self, image: np.ndarray, prompt: str) -> str:
        from PIL import Image

        messages = [{"role": "user", "content": [
            {"type": "image", "image": Image.fromarray(image)},
            {"type": "text", "text": prompt},
        ]}]
        out = self._pipe(text=messages, max_new_tokens=self.max_new_tokens)
        reply = out[0]["generated_text"]
        if isinstance(reply, list):  # chat-format output
            reply = reply[-1]["content"]
        return str(reply)


class HfOvdEngine:
    """Zero-shot object detection checkpoint (OwlViT-style)."""

    def __init__(self, model_id: str, device: str = "cpu", threshold: float = 0.05):
        self.identifier = model_id
        self.device = device
        self.threshold = threshold
        self._pipe = None

    def load(self) -> None:
        from transformers import pipeline

        self._pipe = pipeline("zero-shot-object-detection", model=self.identifier,
                              device=self.device)

    def detect(self, image, query):
        from PIL import Image

        results = self._pipe(Image.fromarray(image), candidate_labels=[query],
                             threshold=self.threshold)
        boxes, points, scores = [], [], []
        for det in results:
            b = det["box"]
            boxes.append([float(b["xmin"]), float(b["ymin"]),
                          float(b["xmax"]), float(b["ymax"])])
            points.append([(b["xmin"] + b["xmax"]) / 2.0,
                           (b["ymin"] + b["ymax"]) / 2.0])
            scores.append(float(det["score"]))
        return boxes, points, scores


class HfSamEngine:
    """Promptable segmentation checkpoint (SAM-style)."""

    def __init__(self, model_id: str, device: str = "cpu"):
        self.identifier = model_id
        self.device = device
        self._model = None
        self._processor = None

    def load(self) -> None:
        import torch  # noqa: F401  (device handling)
        from transformers import SamModel, SamProcessor

        self._model = SamModel.from_pretrained(self.identifier).to(self.device)
        self._processor = SamProcessor.from_pretrained(self.identifier)

    def segment(self, image, box, points):
        import torch
        from PIL import Image

        pil = Image.fromarray(image if image.ndim == 3
                              else np.stack([image] * 3, axis=-1))
        inputs = self._processor(
            pil, input_boxes=[[list(box)]],
            input_points=[[list(p) for p in points]] if points else None,
            return_tensors="pt").to(self.device)
        with torch.no_grad():
            outputs = self._model(**inputs)
        masks = self._processor.image_processor.post_process_masks(
            outputs.pred_masks.cpu(), inputs["original_sizes"].cpu(),
            inputs["reshaped_input_sizes"].cpu())
        scores = outputs.iou_scores.cpu().numpy().ravel()
        best = int(scores.argmax())
        return np.asarray(masks[0][0][best].numpy(), dtype=bool)


_STATIC = {"vlm": StaticVlmEngine, "ovd": CenterBoxOvdEngine, "sam": BoxFillSamEngine}
_HF = {"vlm": HfVlmEngine, "ovd": HfOvdEngine, "sam": HfSamEngine}


def create_engine(kind: str, spec: str = "static", device: str = "cpu"):
    """Resolve an engine spec: "static" or "hf:<model-id>"."""
    if kind not in _STATIC:
        raise ValueError(f"unknown engine kind {kind!r}")
    if spec == "static":
        return _STATIC[kind]()
    if spec.startswith("hf:"):
        return _HF[kind](spec[3:], device=device)
    raise ValueError(f"unknown engine spec {spec!r} (use 'static' or 'hf:<id>')")
