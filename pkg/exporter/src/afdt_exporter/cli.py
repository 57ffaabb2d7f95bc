"""Export CLI.

    afdt-export --model resnet50 --layers D1,D3 --images frames.txt \
        --boxes crops.csv --out seq.afdt

`--images` takes either a comma-separated list of image paths or a text
file with one path per line. `--boxes` is an optional CSV with one
`x,y,w,h` crop per image; without it the whole frame is used. A leading
`export` token is accepted for subcommand-style invocation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .export import ExportSpec, export
from .models import MODELS


def _parse_images(value: str) -> list:
    path = Path(value)
    if path.is_file() and path.suffix.lower() not in (
            ".jpg", ".jpeg", ".png", ".bmp"):
        return [line.strip() for line in path.read_text().splitlines()
                if line.strip()]
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_boxes(value: str) -> list:
    boxes = []
    for i, line in enumerate(Path(value).read_text().splitlines()):
        line = line.strip()
        if not line:
            continue
        parts = [float(v) for v in line.replace("\t", ",").split(",")]
        if len(parts) != 4:
            raise ValueError(f"boxes line {i + 1}: expected x,y,w,h")
        boxes.append(tuple(parts))
    return boxes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afdt-export",
        description="capture CNN activations at the D1..D5 taps into an "
                    "AFDT feature file")
    parser.add_argument("--model", choices=MODELS, required=True)
    parser.add_argument("--layers", required=True,
                        help="comma-separated D-labels, e.g. D1,D3")
    parser.add_argument("--images", required=True,
                        help="comma-separated paths or a list file")
    parser.add_argument("--boxes", default=None,
                        help="CSV of one x,y,w,h crop per image")
    parser.add_argument("--out", required=True, help="output .afdt path")
    parser.add_argument("--weights", choices=("none", "pretrained"),
                        default="none")
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "export":
        argv = argv[1:]
    args = build_parser().parse_args(argv)
    try:
        spec = ExportSpec(
            model=args.model,
            layers=tuple(l.strip() for l in args.layers.split(",") if l.strip()),
            images=_parse_images(args.images),
            boxes=_parse_boxes(args.boxes) if args.boxes else None,
            out_path=args.out,
            weights=args.weights,
            device=args.device,
        )
        out = export(spec)
    except Exception as exc:  # noqa: BLE001 - single CLI error boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out} ({len(spec.images)} frames, layers {args.layers})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
