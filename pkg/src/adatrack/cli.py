"""Command-line front end.

Subcommands: `select` (dictionary query), `track` (one sequence), `evaluate`
(one-pass evaluation over a dataset), `analyze` (re-derive dictionary-style
tables by running every configuration of a model over a dataset).
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .config import TrackerConfig
from .dataset import read_sequence, discover_sequences
from .dictionaries import (ATTRIBUTES, MODELS, AttributeVector, channel_count,
                           load_dictionaries, score_configs, select_config)
from .evaluation import run_ope, write_report, evaluate_boxes
from .solvers import BacfConfig, CgSettings
from .tracker import SequenceSpec, run_sequence


def _attrs(text: str) -> AttributeVector:
    return AttributeVector.from_names(text or "")


def _tracker_config(args) -> TrackerConfig:
    cfg = TrackerConfig()
    if args.sigma_factor is not None:
        cfg = cfg.override(sigma_factor=args.sigma_factor)
    if args.learning_rate is not None:
        cfg = cfg.override(learning_rate_eco=args.learning_rate,
                           learning_rate_bacf=args.learning_rate)
    if args.scales is not None:
        cfg = cfg.override(num_scales=args.scales)
    if args.scale_step is not None:
        cfg = cfg.override(scale_step=args.scale_step)
    if args.search_area is not None:
        cfg = cfg.override(search_area_scale=args.search_area)
    if args.cg_iters is not None or args.cg_tol is not None:
        cg = CgSettings(max_iters=args.cg_iters or 100, tol=args.cg_tol or 1e-6)
        cfg = cfg.override(cg=cg)
    if args.admm_iters is not None:
        cfg = cfg.override(bacf=BacfConfig(iterations=args.admm_iters))
    return cfg


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_select(args) -> int:
    catalog = load_dictionaries(args.data_path)
    z = _attrs(args.attrs)
    scores = score_configs(args.model, z, catalog)
    chosen = select_config(args.model, z, catalog)
    print(f"model:     {args.model}")
    print(f"attrs:     {','.join(z.names) or '(none; uniform average)'}")
    print(f"selected:  {chosen.label}")
    print(f"channels:  {channel_count(chosen)}")
    print()
    print(f"{'configuration':<28} {'channels':>8} {'score':>8}")
    order = np.argsort(-scores, kind="stable")
    labels = catalog.config_labels(args.model)
    configs = catalog.configs(args.model)
    for j in order:
        mark = " *" if labels[j] == chosen.label else ""
        print(f"{labels[j]:<28} {channel_count(configs[j]):>8} {scores[j]:>8.4f}{mark}")
    return 0


def _spec_from_args(args, source, initial_box, frame_size=None) -> SequenceSpec:
    return SequenceSpec(
        source=source,
        initial_box=initial_box,
        attributes=_attrs(args.attrs),
        model=args.model,
        solver=args.solver,
        frame_size=frame_size,
    )


def cmd_track(args) -> int:
    catalog = load_dictionaries(args.data_path)
    config = _tracker_config(args)
    if args.features:
        if not args.box or not args.frame_size:
            print("track: --features needs --box and --frame-size", file=sys.stderr)
            return 2
        box = tuple(float(v) for v in args.box.split(","))
        fw, fh = (int(v) for v in args.frame_size.lower().split("x"))
        spec = _spec_from_args(args, args.features, box, (fw, fh))
    else:
        seq = read_sequence(args.dataset)
        spec = _spec_from_args(args, [seq.load_frame(i) for i in range(len(seq))],
                               tuple(seq.ground_truth.boxes[0]))
    boxes = run_sequence(spec, catalog, config)
    out = Path(args.out) / "boxes.txt"
    _atomic_write(out, "\n".join(
        ",".join(f"{v:.3f}" for v in b) for b in boxes) + "\n")
    print(f"wrote {out} ({len(boxes)} boxes)")
    return 0


def cmd_evaluate(args) -> int:
    catalog = load_dictionaries(args.data_path)
    config = _tracker_config(args)
    report = run_ope(args.dataset, catalog, model=args.model,
                     solver=args.solver, config=config, jobs=args.jobs)
    payload = write_report(report, args.out)
    agg = payload["aggregate"]
    print(f"sequences: {agg['sequences']}  skipped: {agg['skipped']}")
    if agg["sequences"]:
        print(f"precision@20: {agg['precision_at_20']:.4f}")
        print(f"success@0.5:  {agg['success_at_0.5']:.4f}")
        print(f"success AUC:  {agg['success_auc']:.4f}")
    return 0


def cmd_analyze(args) -> int:
    catalog = load_dictionaries(args.data_path)
    config = _tracker_config(args)
    labels = catalog.config_labels(args.model)
    configs = catalog.configs(args.model)
    seq_dirs = discover_sequences(args.dataset)
    sequences = [read_sequence(d) for d in seq_dirs]
    if not sequences:
        print("analyze: no sequences found", file=sys.stderr)
        return 2

    feature_dir = Path(args.features) if args.features else None
    per_config = {}
    for layer_config, label in zip(configs, labels):
        results = []
        for seq in sequences:
            if feature_dir is not None:
                afdt = feature_dir / f"{seq.name}.afdt"
                frame0 = seq.load_frame(0)
                spec = SequenceSpec(
                    source=afdt, initial_box=tuple(seq.ground_truth.boxes[0]),
                    attributes=AttributeVector.from_names(seq.ground_truth.tags),
                    model=args.model, solver=args.solver,
                    frame_size=(frame0.shape[1], frame0.shape[0]),
                    layer_config=layer_config,
                )
            else:
                spec = SequenceSpec(
                    source=[seq.load_frame(i) for i in range(len(seq))],
                    initial_box=tuple(seq.ground_truth.boxes[0]),
                    attributes=AttributeVector.from_names(seq.ground_truth.tags),
                    model=args.model, solver=args.solver,
                    layer_config=layer_config,
                )
            boxes = run_sequence(spec, catalog, config)
            results.append(evaluate_boxes(seq.name, boxes, seq.ground_truth.boxes,
                                          seq.ground_truth.tags))
        per_config[label] = results
        print(f"analyzed {label}: "
              f"mean success@0.5 "
              f"{np.mean([r.success_at_half for r in results]):.3f}")

    out = Path(args.out)
    for metric, getter in (("success", lambda r: r.success_at_half),
                           ("precision", lambda r: r.precision_at_20)):
        lines = [",".join(["attribute"] + [f'"{l}"' for l in labels])]
        for tag in ATTRIBUTES + ("Overall",):
            row = [tag]
            for label in labels:
                results = per_config[label]
                if tag == "Overall":
                    chosen = results
                else:
                    chosen = [r for r in results if tag in r.tags]
                row.append(f"{np.mean([getter(r) for r in chosen]):.3f}"
                           if chosen else "")
            lines.append(",".join(row))
        _atomic_write(out / f"analysis_{args.model}_{metric}.csv",
                      "\n".join(lines) + "\n")
    print(f"wrote {out}/analysis_{args.model}_{{success,precision}}.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adatrack",
        description="attribute-adaptive correlation-filter tracking toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset_required=False):
        p.add_argument("--model", choices=MODELS, default="resnet50")
        p.add_argument("--solver", choices=("eco", "bacf"), default="eco")
        p.add_argument("--attrs", default="",
                       help="comma-separated attribute tags, e.g. OCC,SV")
        p.add_argument("--data-path", default=None,
                       help="directory of dictionary CSV files")
        p.add_argument("--out", default="out")
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--sigma-factor", type=float, default=None)
        p.add_argument("--learning-rate", type=float, default=None)
        p.add_argument("--scales", type=int, default=None)
        p.add_argument("--scale-step", type=float, default=None)
        p.add_argument("--search-area", type=float, default=None)
        p.add_argument("--cg-iters", type=int, default=None)
        p.add_argument("--cg-tol", type=float, default=None)
        p.add_argument("--admm-iters", type=int, default=None)

    p_select = sub.add_parser("select", help="query the attribute dictionaries")
    common(p_select)
    p_select.set_defaults(func=cmd_select)

    p_track = sub.add_parser("track", help="track one sequence")
    common(p_track)
    p_track.add_argument("--dataset", help="sequence directory (OTB layout)")
    p_track.add_argument("--features", help="AFDT feature file")
    p_track.add_argument("--box", help="initial x,y,w,h (feature-file mode)")
    p_track.add_argument("--frame-size", help="WxH pixels (feature-file mode)")
    p_track.set_defaults(func=cmd_track)

    p_eval = sub.add_parser("evaluate", help="one-pass evaluation over a dataset")
    common(p_eval)
    p_eval.add_argument("--dataset", required=True)
    p_eval.set_defaults(func=cmd_evaluate)

    p_an = sub.add_parser("analyze",
                          help="run every configuration of a model over a dataset")
    common(p_an)
    p_an.add_argument("--dataset", required=True)
    p_an.add_argument("--features",
                      help="directory of <sequence>.afdt files (optional)")
    p_an.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single CLI error boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
