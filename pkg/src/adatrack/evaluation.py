"""One-pass evaluation: precision/success metrics, attribute aggregation,
and report files.

Thresholds follow the standard protocol: success counts frames whose overlap
is strictly greater than the threshold, precision counts frames whose center
error is strictly smaller. Headline numbers are success at 0.5 overlap and
precision at 20 pixels.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrackerConfig
from .dataset import DatasetError, discover_sequences, read_sequence
from .dictionaries import ATTRIBUTES, AttributeVector, DictionaryCatalog
from .tracker import SequenceSpec, run_sequence

log = logging.getLogger(__name__)

SUCCESS_THRESHOLDS = np.round(np.arange(0.0, 1.0001, 0.05), 10)
PRECISION_THRESHOLDS = np.arange(0.0, 51.0, 1.0)


def iou(a, b) -> float:
    """Intersection over union of two (x, y, w, h) boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    if min(aw, ah, bw, bh) < 0:
        raise ValueError("box sizes must be non-negative")
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def center_error(a, b) -> float:
    """Euclidean distance between box centers, pixels."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return float(np.hypot((ax + aw / 2) - (bx + bw / 2),
                          (ay + ah / 2) - (by + bh / 2)))


def success_curve(est, gt):
    """(curve over the overlap-threshold grid, AUC, success at 0.5)."""
    scores = np.array([iou(e, g) for e, g in zip(est, gt)])
    curve = np.array([(scores > t).mean() for t in SUCCESS_THRESHOLDS])
    auc = float(curve.mean())
    at_half = float((scores > 0.5).mean())
    return curve, auc, at_half


def precision_curve(est, gt):
    """(curve over the pixel-threshold grid, precision at 20 px)."""
    errors = np.array([center_error(e, g) for e, g in zip(est, gt)])
    curve = np.array([(errors < t).mean() for t in PRECISION_THRESHOLDS])
    at_20 = float((errors < 20.0).mean())
    return curve, at_20


@dataclass
class OPEResult:
    name: str
    boxes: list
    precision: np.ndarray
    success: np.ndarray
    precision_at_20: float
    success_at_half: float
    success_auc: float
    tags: tuple = ()
    flagged: bool = False

    def validate(self) -> "OPEResult":
        for curve, trend in ((self.precision, 1), (self.success, -1)):
            if np.any(curve < 0) or np.any(curve > 1):
                raise ValueError(f"{self.name}: curve values outside [0, 1]")
            if np.any(trend * np.diff(curve) < 0):
                raise ValueError(f"{self.name}: curve not monotone")
        return self


def evaluate_boxes(name: str, est, gt_boxes, tags=(), flagged=False) -> OPEResult:
    n = min(len(est), len(gt_boxes))
    if n == 0:
        raise ValueError(f"{name}: nothing to evaluate (no overlapping frames)")
    est, ref = list(est)[:n], list(gt_boxes)[:n]
    s_curve, auc, at_half = success_curve(est, ref)
    p_curve, at20 = precision_curve(est, ref)
    return OPEResult(name, est, p_curve, s_curve, at20, at_half, auc,
                     tuple(tags), flagged).validate()


@dataclass
class OPEReport:
    results: list
    skipped: list = field(default_factory=list)

    def aggregate(self) -> dict:
        res = sorted(self.results, key=lambda r: r.name)
        if not res:
            return {"sequences": 0, "skipped": len(self.skipped)}
        return {
            "sequences": len(res),
            "skipped": len(self.skipped),
            "precision_at_20": float(np.mean([r.precision_at_20 for r in res])),
            "success_at_0.5": float(np.mean([r.success_at_half for r in res])),
            "success_auc": float(np.mean([r.success_auc for r in res])),
        }

    def by_attribute(self) -> dict:
        out = {}
        for tag in ATTRIBUTES:
            tagged = sorted((r for r in self.results if tag in r.tags),
                            key=lambda r: r.name)
            if not tagged:
                continue
            out[tag] = {
                "sequences": len(tagged),
                "precision_at_20": float(np.mean([r.precision_at_20 for r in tagged])),
                "success_at_0.5": float(np.mean([r.success_at_half for r in tagged])),
                "success_auc": float(np.mean([r.success_auc for r in tagged])),
            }
        return out


def _evaluate_one(seq, model, solver, catalog, config):
    spec = SequenceSpec(
        source=[seq.load_frame(i) for i in range(len(seq))],
        initial_box=tuple(seq.ground_truth.boxes[0]),
        attributes=AttributeVector.from_names(seq.ground_truth.tags),
        model=model,
        solver=solver,
    )
    boxes = run_sequence(spec, catalog, config)
    return evaluate_boxes(seq.name, boxes, seq.ground_truth.boxes,
                          seq.ground_truth.tags, seq.truncated)


def run_ope(dataset_root, catalog: DictionaryCatalog | None = None,
            model: str = "resnet50", solver: str = "eco",
            config: TrackerConfig | None = None, jobs: int | None = None) -> OPEReport:
    """Track every sequence under `dataset_root` from its first-frame ground
    truth and score the estimates. Malformed sequences are skipped and
    counted."""
    config = config or TrackerConfig()
    jobs = jobs or os.cpu_count() or 1
    seq_dirs = discover_sequences(dataset_root)
    sequences, skipped = [], []
    for d in seq_dirs:
        try:
            sequences.append(read_sequence(d))
        except DatasetError as exc:
            log.warning("skipping %s: %s", d.name, exc)
            skipped.append((d.name, str(exc)))

    results = {}
    if jobs == 1 or len(sequences) <= 1:
        for seq in sequences:
            results[seq.name] = _evaluate_one(seq, model, solver, catalog, config)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {
                seq.name: pool.submit(_evaluate_one, seq, model, solver,
                                      catalog, config)
                for seq in sequences
            }
            results = {name: f.result() for name, f in futures.items()}
    ordered = [results[name] for name in sorted(results)]
    return OPEReport(ordered, skipped)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: OPEReport, out_dir) -> dict:
    """Emit results.json plus per-curve CSV files; all writes are atomic."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "aggregate": report.aggregate(),
        "attributes": report.by_attribute(),
        "skipped": report.skipped,
        "sequences": {
            r.name: {
                "precision_at_20": r.precision_at_20,
                "success_at_0.5": r.success_at_half,
                "success_auc": r.success_auc,
                "tags": list(r.tags),
                "flagged": r.flagged,
                "boxes": [list(map(float, b)) for b in r.boxes],
            }
            for r in report.results
        },
    }
    _atomic_write(out / "results.json", json.dumps(payload, indent=2))

    def curve_csv(threshes, rows, header):
        lines = [",".join([header] + [f"{t:g}" for t in threshes])]
        for name, curve in rows:
            lines.append(",".join([name] + [f"{v:.6f}" for v in curve]))
        return "\n".join(lines) + "\n"

    p_rows = [(r.name, r.precision) for r in report.results]
    s_rows = [(r.name, r.success) for r in report.results]
    if report.results:
        p_rows.append(("MEAN", np.mean([r.precision for r in report.results], axis=0)))
        s_rows.append(("MEAN", np.mean([r.success for r in report.results], axis=0)))
    _atomic_write(out / "precision_curves.csv",
                  curve_csv(PRECISION_THRESHOLDS, p_rows, "sequence"))
    _atomic_write(out / "success_curves.csv",
                  curve_csv(SUCCESS_THRESHOLDS, s_rows, "sequence"))
    return payload
