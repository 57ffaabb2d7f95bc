"""The AFDT tensor-file bridge: write, read, and track from feature files.

The offline exporter (see exporter/) fills these files with real CNN
activations; here synthetic multi-layer features stand in so the demo needs
no network weights. Channel depths must match the model catalog, spatial
grids are free (the tracker maps them to pixels by stride).
"""

import tempfile
from pathlib import Path

import numpy as np

from adatrack import (AttributeVector, FeatureFrame, LayerRecord,
                      SequenceSpec, load_dictionaries, read_feature_file,
                      run_sequence, select_config, stack_from_frame,
                      write_feature_file)
from adatrack.dictionaries import MODEL_CATALOG, LayerConfig

rng = np.random.default_rng(0)
catalog = load_dictionaries()

# a drifting blob rendered straight into "feature space" for each tap of
# VGG-M; depths come from the model catalog, grids shrink layer by layer
depths = {lbl: spec[0] for lbl, spec in MODEL_CATALOG["vggm"].items()}
grids = {"D1": 32, "D2": 16, "D3": 16}
n_frames = 12

def blob(grid, cx, cy, sharp):
    ys, xs = np.meshgrid(np.arange(grid), np.arange(grid), indexing="ij")
    return np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2 * sharp ** 2))

# each layer keeps one channel signature across the sequence; only the
# spatial envelope drifts
signature = {lbl: rng.standard_normal((d, 1, 1)) for lbl, d in depths.items()}

frames = []
for t in range(n_frames):
    layers = []
    for lbl in ("D1", "D2", "D3"):
        g = grids[lbl]
        scale = g / 64.0                      # grid cells per frame pixel
        cx, cy = (20 + 2 * t) * scale, 32 * scale
        base = blob(g, cx, cy, 5.0 * scale)   # ~5 px envelope
        chans = signature[lbl] * base[None]
        chans = chans + 0.05 * rng.standard_normal((depths[lbl], g, g))
        layers.append(LayerRecord(lbl, np.moveaxis(chans, 0, 2).astype(np.float32)))
    frames.append(FeatureFrame(t, layers))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "sequence.afdt"
    write_feature_file(frames, path)
    print(f"wrote {path.name}: {path.stat().st_size} bytes, "
          f"{n_frames} frames x {sum(depths.values())} channels")

    back = read_feature_file(path)
    print(f"round trip: {len(back)} frames, labels {back[0].labels}")

    z = AttributeVector.from_names("BC,OCC")
    chosen = select_config("vggm", z, catalog)
    print(f"dictionary pick for BC,OCC on vggm: {chosen.label}")

    stack = stack_from_frame(back[0], LayerConfig("vggm", ("D1", "D3")))
    print(f"unified stack for D1, D3: {stack.num_channels} channels on "
          f"grid {stack.grid}")

    spec = SequenceSpec(source=path, initial_box=(12, 24, 16, 16),
                        attributes=z, model="vggm", frame_size=(64, 64))
    boxes = run_sequence(spec, catalog)
    print("\nfile-backed tracking (blob drifts +2 px/frame):")
    for t in (0, 4, 8, 11):
        cx = boxes[t][0] + boxes[t][2] / 2
        print(f"  frame {t:>2}: center x = {cx:6.2f} (truth {20 + 2 * t})")
