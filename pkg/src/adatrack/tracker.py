"""Per-sequence tracking loop.

The layer configuration is chosen once per sequence from the attribute
dictionaries, then tracking-by-detection runs with multi-scale search,
sample-memory updates, and periodic filter refreshes. Localization is
calibrated against the model's own response peak on its training sample, so
a frame identical to the training frame yields exactly zero displacement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset
from .afdt import read_feature_file
from .config import TrackerConfig
from .dcf import (FilterModel, SampleMemory, detect, make_gaussian_label,
                  make_spatial_regularizer, update_memory)
from .dictionaries import (AttributeVector, DictionaryCatalog, LayerConfig,
                           channel_count, select_config)
from .features import FeatureStack, builtin_extract, fourier_resize
from .solvers import train_bacf, train_eco


class TrackerError(Exception):
    """Invalid sequence specification or exhausted frame source."""


@dataclass
class SequenceSpec:
    """Everything needed to track one sequence."""

    source: object                    # frame arrays, an image dir, or an .afdt path
    initial_box: tuple                # (x, y, w, h) pixels
    attributes: AttributeVector = field(default_factory=AttributeVector.zeros)
    model: str = "resnet50"
    solver: str = "eco"
    frame_size: tuple | None = None   # (W, H) pixels; required for .afdt sources
    layer_config: LayerConfig | None = None  # overrides dictionary selection

    def __post_init__(self):
        x, y, w, h = self.initial_box
        if w <= 0 or h <= 0:
            raise TrackerError(f"initial box must have positive size, got {self.initial_box}")
        if self.solver not in ("eco", "bacf"):
            raise TrackerError(f"solver must be 'eco' or 'bacf', got {self.solver!r}")


def _hann2(grid) -> np.ndarray:
    h, w = grid
    wy = 0.5 - 0.5 * np.cos(2.0 * np.pi * (np.arange(h) + 0.5) / h)
    wx = 0.5 - 0.5 * np.cos(2.0 * np.pi * (np.arange(w) + 0.5) / w)
    return wy[:, None] * wx[None, :]


class BuiltinFeatureSource:
    """Gradient-orientation features extracted from grayscale frames."""

    def __init__(self, config: TrackerConfig):
        self.config = config

    def channels(self) -> int:
        return 1 + self.config.n_orientations

    def window(self, frame: np.ndarray, center, side: float, grid) -> FeatureStack:
        cell = self.config.cell_size
        canon = (grid[0] * cell, grid[1] * cell)
        side_px = max(2 * cell, int(round(side)))
        patch = _extract_patch(frame, center, side_px)
        if patch.shape != canon:
            # resample pixels onto the canonical patch so fractional scale
            # steps survive the feature-cell quantization
            patch = fourier_resize(patch, canon)
        return builtin_extract(patch, self.config.n_orientations, cell)


class FileFeatureSource:
    """Feature maps read from an AFDT file, one frame record per video frame.

    Records are treated as full-frame activations; windows are cropped in
    feature space using each layer's stride against the frame pixel size.
    """

    def __init__(self, path, layer_config: LayerConfig, frame_size,
                 config: TrackerConfig):
        self.frames = read_feature_file(path)
        if not self.frames:
            raise TrackerError(f"feature file {path} holds no frames")
        self.layer_config = layer_config
        if frame_size is None:
            raise TrackerError("frame_size (W, H) is required for feature-file sources")
        self.frame_size = tuple(frame_size)
        self.config = config
        self._expected = channel_count(layer_config)
        self._cache = {}

    def __len__(self) -> int:
        return len(self.frames)

    def channels(self) -> int:
        return self._expected

    def _unified(self, index: int) -> np.ndarray:
        # all selected layers of one frame on the reference (largest) grid
        if index in self._cache:
            return self._cache[index]
        if index >= len(self.frames):
            raise TrackerError(f"feature source exhausted at frame {index}")
        frame = self.frames[index]
        records = [frame.layer(label) for label in self.layer_config.layers]
        ref = (max(r.data.shape[0] for r in records),
               max(r.data.shape[1] for r in records))
        maps, labels = [], []
        for rec in records:
            chans = np.moveaxis(rec.data.astype(np.float64), 2, 0)
            if chans.shape[1:] != ref:
                chans = np.stack([fourier_resize(c, ref) for c in chans])
            maps.append(chans)
            labels.extend([rec.label] * chans.shape[0])
        unified = np.concatenate(maps)
        if unified.shape[0] != self._expected:
            raise TrackerError(
                f"frame {index}: {unified.shape[0]} channels, config "
                f"{self.layer_config.label!r} expects {self._expected}"
            )
        self._labels = tuple(labels)
        self._cache = {index: unified}  # keep only the latest frame
        return unified

    def window(self, frame_index: int, center, side: float, grid) -> FeatureStack:
        unified = self._unified(frame_index)
        ref_h, ref_w = unified.shape[1:]
        fw, fh = self.frame_size
        sy, sx = fh / ref_h, fw / ref_w
        cy, cx = center[1] / sy, center[0] / sx
        cells_y = max(2, int(round(side / sy)))
        cells_x = max(2, int(round(side / sx)))
        rows = np.clip(int(round(cy)) - cells_y // 2 + np.arange(cells_y), 0, ref_h - 1)
        cols = np.clip(int(round(cx)) - cells_x // 2 + np.arange(cells_x), 0, ref_w - 1)
        crop = unified[:, rows[:, None], cols[None, :]]
        if crop.shape[1:] != tuple(grid):
            crop = np.stack([fourier_resize(c, grid) for c in crop])
        return FeatureStack(crop, self._labels)


def _extract_patch(frame: np.ndarray, center, side: int) -> np.ndarray:
    """Square pixel patch around `center` with replicated borders."""
    h, w = frame.shape
    cx, cy = center
    rows = np.clip(int(round(cy)) - side // 2 + np.arange(side), 0, h - 1)
    cols = np.clip(int(round(cx)) - side // 2 + np.arange(side), 0, w - 1)
    return frame[rows[:, None], cols[None, :]]


@dataclass
class TrackerState:
    box: tuple                   # (x, y, w, h) pixels
    scale: float
    model: FilterModel
    memory: SampleMemory
    layer_config: LayerConfig | None
    frame_index: int
    spec: SequenceSpec
    config: TrackerConfig
    source: object
    base_target: tuple           # (w, h) at scale 1
    base_window: float           # search window side at scale 1, pixels
    grid: tuple                  # canonical feature grid (cells)
    label: object
    regularizer: object
    frame_bounds: tuple          # (W, H) pixels
    bias: tuple = (0.0, 0.0)     # response peak offset on the training sample
    frames_since_train: int = 0
    frames: list | None = None   # decoded frames (None for feature-file mode)
    window_taper: np.ndarray | None = None

    @property
    def center(self) -> tuple:
        x, y, w, h = self.box
        return (x + w / 2.0, y + h / 2.0)


def _wrap_offset(value: float, period: int) -> float:
    return (value + period / 2.0) % period - period / 2.0


def _scale_factors(config: TrackerConfig) -> np.ndarray:
    half = config.num_scales // 2
    return config.scale_step ** np.arange(-half, config.num_scales - half)


def _train(state: TrackerState, warm: bool) -> None:
    cfg = state.config
    if state.spec.solver == "eco":
        state.model = train_eco(state.memory, state.regularizer, state.label,
                                warm_start=state.model if warm else None,
                                cg=cfg.cg)
    else:
        merged = sum(phi * s for phi, s in
                     zip(state.memory.weights, state.memory.samples))
        stack = FeatureStack(np.fft.ifft2(merged, axes=(1, 2)).real,
                             ("model",) * merged.shape[0])
        state.model = train_bacf(stack, state.label, cfg.bacf,
                                 warm_start=state.model if warm else None)
    if state.layer_config is not None:
        state.model.layer_config = state.layer_config
    state.frames_since_train = 0
    # calibrate localization on the freshest training sample
    newest = state.memory.samples[-1]
    sample = FeatureStack(np.fft.ifft2(newest, axes=(1, 2)).real,
                          ("calib",) * newest.shape[0])
    resp = detect(state.model, sample)
    cy, cx = state.label.center
    state.bias = (_wrap_offset(resp.peak[0] - cy, state.grid[0]),
                  _wrap_offset(resp.peak[1] - cx, state.grid[1]))


def _sample_window(state: TrackerState, frame, side: float) -> FeatureStack:
    stack = state.source.window(frame, state.center, side, state.grid)
    channels = stack.channels
    if state.config.feature_normalize:
        # constant sample energy: peak heights stay comparable across scales
        rms = np.sqrt(np.mean(channels ** 2))
        if rms > 0:
            channels = channels / rms
    if state.config.feature_window:
        channels = channels * state.window_taper[None]
    if channels is not stack.channels:
        stack = FeatureStack(channels, stack.channel_layers)
    return stack


def init(spec: SequenceSpec, catalog: DictionaryCatalog | None = None,
         config: TrackerConfig | None = None) -> TrackerState:
    """Select the layer configuration, build the response/penalty grids, and
    train the first filter from frame 0."""
    config = config or TrackerConfig()
    layer_config = spec.layer_config
    if layer_config is None and catalog is not None:
        layer_config = select_config(spec.model, spec.attributes, catalog)

    frames, source, frame_bounds = _open_source(spec, layer_config, config)

    x, y, w, h = spec.initial_box
    base_window = float(np.sqrt(w * h * config.search_area_scale))
    if isinstance(source, FileFeatureSource):
        unified = source._unified(0)
        fw, fh = source.frame_size
        stride = min(fw / unified.shape[2], fh / unified.shape[1])
    else:
        stride = float(config.cell_size)
    side_cells = max(config.min_grid, int(round(base_window / stride)))
    side_cells += side_cells % 2
    grid = (side_cells, side_cells)

    cells_w, cells_h = w / stride, h / stride
    sigma = max(config.sigma_factor * float(np.sqrt(cells_w * cells_h)), 0.25)
    label = make_gaussian_label(grid, sigma)
    extent = (min(grid[0], cells_h), min(grid[1], cells_w))
    regularizer = make_spatial_regularizer(grid, extent, config.reg_min_weight,
                                           config.reg_slope)

    state = TrackerState(
        box=tuple(float(v) for v in spec.initial_box),
        scale=1.0,
        model=None,
        memory=SampleMemory(1 if spec.solver == "bacf" else config.sample_capacity),
        layer_config=layer_config,
        frame_index=0,
        spec=spec,
        config=config,
        source=source,
        base_target=(float(w), float(h)),
        base_window=base_window,
        grid=grid,
        label=label,
        regularizer=regularizer,
        frame_bounds=frame_bounds,
        frames=frames,
        window_taper=_hann2(grid),
    )

    first = frames[0] if frames is not None else 0
    stack = _sample_window(state, first, base_window)
    state.memory = update_memory(state.memory, np.fft.fft2(stack.channels, axes=(1, 2)), 1.0)
    _train(state, warm=False)
    return state


def _open_source(spec: SequenceSpec, layer_config, config: TrackerConfig):
    """Returns (frames, source, frame_bounds); frames is None for file mode."""
    src = spec.source
    if isinstance(src, (str, Path)):
        path = Path(src)
        if path.suffix == ".afdt":
            if layer_config is None:
                raise TrackerError("feature-file tracking needs a dictionary catalog")
            source = FileFeatureSource(path, layer_config, spec.frame_size, config)
            return None, source, tuple(spec.frame_size)
        seq = dataset.read_sequence(path)
        arrays = [seq.load_frame(i) for i in range(len(seq))]
        src = arrays
    frames = [np.asarray(f, dtype=np.float64) for f in src]
    if not frames:
        raise TrackerError("sequence has no frames")
    h, w = frames[0].shape
    return frames, BuiltinFeatureSource(config), (w, h)


def step(state: TrackerState, frame) -> tuple:
    """Advance one frame: multi-scale detection, box update, model update."""
    cfg = state.config
    cy, cx = state.label.center
    window = state.base_window * state.scale

    best = None
    for s in _scale_factors(cfg):
        stack = _sample_window(state, frame, window * s)
        resp = detect(state.model, stack)
        key = (resp.peak_value, -abs(np.log(s)))
        if best is None or key > best[0]:
            best = (key, s, resp)
    _, s_best, resp = best

    dy = _wrap_offset(resp.peak[0] - cy, state.grid[0]) - state.bias[0]
    dx = _wrap_offset(resp.peak[1] - cx, state.grid[1]) - state.bias[1]
    stride = window * s_best / state.grid[0]

    ccx, ccy = state.center
    ccx += dx * stride
    ccy += dy * stride
    state.scale *= s_best
    tw = state.base_target[0] * state.scale
    th = state.base_target[1] * state.scale
    fw, fh = state.frame_bounds
    ccx = float(np.clip(ccx, 0.0, fw - 1.0))
    ccy = float(np.clip(ccy, 0.0, fh - 1.0))
    state.box = (ccx - tw / 2.0, ccy - th / 2.0, tw, th)

    sample = _sample_window(state, frame, state.base_window * state.scale)
    eta = cfg.learning_rate(state.spec.solver)
    state.memory = update_memory(
        state.memory, np.fft.fft2(sample.channels, axes=(1, 2)), eta)
    state.frames_since_train += 1
    state.frame_index += 1
    if state.frames_since_train >= cfg.train_interval:
        _train(state, warm=True)
    return state, state.box


def run_sequence(spec: SequenceSpec, catalog: DictionaryCatalog | None = None,
                 config: TrackerConfig | None = None) -> list:
    """Track a whole sequence; the first box is the initial box verbatim."""
    state = init(spec, catalog, config)
    boxes = [tuple(float(v) for v in spec.initial_box)]
    if state.frames is not None:
        frame_iter = state.frames[1:]
    else:
        frame_iter = range(1, len(state.source))
    for frame in frame_iter:
        _, box = step(state, frame)
        boxes.append(box)
    return boxes
