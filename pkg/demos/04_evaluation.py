"""One-pass evaluation over a small on-disk dataset.

Writes two synthetic sequences in the standard layout (img/ directory,
groundtruth_rect.txt, attrs.txt), runs the full evaluation harness, and
prints the aggregate plus per-attribute numbers. Report files land in a
temporary directory.
"""

import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from adatrack import load_dictionaries, run_ope, write_report


def write_sequence(root, name, speed, tags, seed):
    rng = np.random.default_rng(seed)
    h, w, side = 72, 96, 20
    bg = rng.uniform(0.35, 0.55, (h, w))
    tex = rng.uniform(0, 1, (side, side))
    seq = root / name
    (seq / "img").mkdir(parents=True)
    boxes = []
    for t in range(8):
        x = 8 + speed * t
        f = bg.copy()
        f[26:26 + side, x:x + side] = tex
        Image.fromarray((f * 255).astype(np.uint8)).save(
            seq / "img" / f"{t + 1:04d}.png")
        boxes.append((x + 1, 27, side, side))  # 1-based file convention
    (seq / "groundtruth_rect.txt").write_text(
        "\n".join(",".join(str(v) for v in b) for b in boxes) + "\n")
    (seq / "attrs.txt").write_text("\n".join(tags) + "\n")


with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp) / "dataset"
    write_sequence(root, "walker", speed=2, tags=("FM", "SV"), seed=1)
    write_sequence(root, "sitter", speed=0, tags=("SV",), seed=2)

    catalog = load_dictionaries()
    report = run_ope(root, catalog, model="resnet50", solver="eco", jobs=2)

    agg = report.aggregate()
    print("=== aggregate ===")
    for key, val in agg.items():
        print(f"{key:<16} {val:.3f}" if isinstance(val, float) else
              f"{key:<16} {val}")

    print()
    print("=== per attribute ===")
    for tag, stats in report.by_attribute().items():
        print(f"{tag:<4} over {stats['sequences']} sequence(s): "
              f"precision@20 {stats['precision_at_20']:.3f}, "
              f"success@0.5 {stats['success_at_0.5']:.3f}, "
              f"AUC {stats['success_auc']:.3f}")

    out = Path(tmp) / "report"
    write_report(report, out)
    print()
    print("=== report files ===")
    for p in sorted(out.iterdir()):
        print(f"{p.name:<24} {p.stat().st_size} bytes")
