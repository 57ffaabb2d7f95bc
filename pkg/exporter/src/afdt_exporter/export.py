"""Offline activation export: images in, AFDT feature file out."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .models import EXPECTED_SHAPES, ExporterError, TapRecorder, build_model
from .writer import write_afdt

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
INPUT_SIZE = 224


@dataclass
class ExportSpec:
    model: str
    layers: tuple                  # D-labels to capture, e.g. ("D1", "D3")
    images: list                   # image file paths, one frame each
    out_path: str
    boxes: list | None = None      # optional (x, y, w, h) crop per image
    weights: str = "none"
    device: str = "cpu"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in EXPECTED_SHAPES:
            raise ExporterError(f"unknown model {self.model!r}")
        if not self.layers:
            raise ExporterError("no layers requested")
        if not self.images:
            raise ExporterError("no input images")
        if self.boxes is not None and len(self.boxes) != len(self.images):
            raise ExporterError(
                f"{len(self.boxes)} boxes for {len(self.images)} images")


def _load_input(path, box):
    with Image.open(path) as img:
        img = img.convert("RGB")
        if box is not None:
            x, y, w, h = box
            if w <= 0 or h <= 0:
                raise ExporterError(f"{path}: bad crop box {box}")
            img = img.crop((int(round(x)), int(round(y)),
                            int(round(x + w)), int(round(y + h))))
        img = img.resize((INPUT_SIZE, INPUT_SIZE), Image.BILINEAR)
        arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = (arr - np.asarray(IMAGENET_MEAN, dtype=np.float32)) \
        / np.asarray(IMAGENET_STD, dtype=np.float32)
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))[None]


def export(spec: ExportSpec) -> Path:
    """Run the backbone over every input and write one AFDT frame each.

    Captured tensors must match the catalog shapes for a 224x224 input;
    anything else aborts the export.
    """
    model = build_model(spec.model, spec.weights).to(spec.device)
    recorder = TapRecorder(model, spec.model, spec.layers)
    expected = EXPECTED_SHAPES[spec.model]
    frames = []
    try:
        for idx, image_path in enumerate(spec.images):
            box = spec.boxes[idx] if spec.boxes is not None else None
            batch = _load_input(image_path, box).to(spec.device)
            with torch.no_grad():
                model(batch)
            acts = recorder.collect()
            layers = []
            for label in spec.layers:
                tensor = acts[label][0].cpu().numpy()      # (C, H, W)
                data = np.ascontiguousarray(tensor.transpose(1, 2, 0))
                if data.shape != expected[label]:
                    raise ExporterError(
                        f"{spec.model}/{label}: got {data.shape}, catalog "
                        f"expects {expected[label]}")
                if not np.isfinite(data).all():
                    raise ExporterError(
                        f"{spec.model}/{label}: non-finite activations in "
                        f"frame {idx}")
                layers.append((label, data))
            frames.append((idx, layers))
    finally:
        recorder.remove()
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_afdt(frames, out)
    return out
