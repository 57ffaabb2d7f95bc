"""OTB-style dataset reading.

A sequence directory holds `img/` with numbered frames, a
`groundtruth_rect.txt` with one `x,y,w,h` line per frame (1-based pixel
origin, comma/tab/space separated), and an optional `attrs.txt` with one
canonical attribute tag per line.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .dictionaries import ATTRIBUTES

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp")


class DatasetError(Exception):
    """Sequence directory is malformed."""


@dataclass
class GroundTruth:
    boxes: np.ndarray   # (N, 4) float, 0-based (x, y, w, h)
    tags: tuple         # subset of the 11 canonical attributes

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=float)
        if self.boxes.ndim != 2 or self.boxes.shape[1] != 4:
            raise DatasetError(f"boxes must be (N, 4), got {self.boxes.shape}")
        bad = [t for t in self.tags if t not in ATTRIBUTES]
        if bad:
            raise DatasetError(f"unknown attribute tags {bad}")


@dataclass
class Sequence:
    name: str
    frame_paths: list
    ground_truth: GroundTruth
    truncated: bool = False   # frame/box count mismatch, common prefix kept

    def __len__(self) -> int:
        return len(self.frame_paths)

    def load_frame(self, index: int) -> np.ndarray:
        return load_grayscale(self.frame_paths[index])

    def frames(self):
        for path in self.frame_paths:
            yield load_grayscale(path)


def load_grayscale(path) -> np.ndarray:
    """8-bit grayscale image as float64 in [0, 1]."""
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.float64) / 255.0


def _parse_box_line(line: str, where: str):
    for sep in (",", "\t"):
        if sep in line:
            parts = line.split(sep)
            break
    else:
        parts = line.split()
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise DatasetError(f"{where}: non-numeric box line {line!r}") from None
    if len(vals) != 4:
        raise DatasetError(f"{where}: expected 4 box fields, got {len(vals)}")
    return vals


def read_ground_truth(seq_dir: Path) -> GroundTruth:
    gt_path = seq_dir / "groundtruth_rect.txt"
    if not gt_path.is_file():
        raise DatasetError(f"{seq_dir.name}: missing groundtruth_rect.txt")
    boxes = []
    for i, line in enumerate(gt_path.read_text().splitlines()):
        line = line.strip()
        if not line:
            continue
        x, y, w, h = _parse_box_line(line, f"{seq_dir.name} line {i + 1}")
        boxes.append((x - 1.0, y - 1.0, w, h))  # files use a 1-based origin
    if not boxes:
        raise DatasetError(f"{seq_dir.name}: empty ground truth")
    tags = ()
    attrs_path = seq_dir / "attrs.txt"
    if attrs_path.is_file():
        tags = tuple(t.strip() for t in attrs_path.read_text().split() if t.strip())
    return GroundTruth(np.asarray(boxes), tags)


def read_sequence(seq_dir) -> Sequence:
    seq_dir = Path(seq_dir)
    img_dir = seq_dir / "img"
    if not img_dir.is_dir():
        raise DatasetError(f"{seq_dir.name}: missing img/ directory")
    frames = sorted(p for p in img_dir.iterdir()
                    if p.suffix.lower() in IMAGE_SUFFIXES)
    if not frames:
        raise DatasetError(f"{seq_dir.name}: no frames in img/")
    gt = read_ground_truth(seq_dir)
    n = min(len(frames), len(gt.boxes))
    truncated = len(frames) != len(gt.boxes)
    if truncated:
        log.warning("%s: %d frames vs %d boxes; evaluating the common prefix",
                    seq_dir.name, len(frames), len(gt.boxes))
        gt = GroundTruth(gt.boxes[:n], gt.tags)
        frames = frames[:n]
    return Sequence(seq_dir.name, frames, gt, truncated=truncated)


def discover_sequences(root) -> list:
    """Sequence directories directly under `root`, sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    return sorted(p for p in root.iterdir() if (p / "img").is_dir())
