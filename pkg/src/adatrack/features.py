"""Feature stacks for the filter solvers.

Sources are either AFDT files (CNN activations captured offline) or the
built-in gradient-orientation extractor, which needs no network and keeps
end-to-end tests self-contained. Multi-resolution layers are unified on a
common grid by exact band-limited (Fourier zero-padding) interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .afdt import FeatureFrame
from .dictionaries import LayerConfig, channel_count


class FeatureError(Exception):
    """Invalid feature data or resampling request."""


@dataclass
class FeatureStack:
    """Multi-channel feature maps on one spatial grid."""

    channels: np.ndarray   # (K, H, W) float64
    channel_layers: tuple  # source layer label per channel

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.float64)
        if self.channels.ndim != 3:
            raise FeatureError(f"channels must be (K, H, W), got {self.channels.shape}")
        if len(self.channel_layers) != self.channels.shape[0]:
            raise FeatureError("one source label required per channel")

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def grid(self) -> tuple:
        return self.channels.shape[1:]


def _stretch_spectrum_axis(spec: np.ndarray, m: int, axis: int) -> np.ndarray:
    """Pad or truncate an FFT spectrum along one axis.

    An even source length has its Nyquist bin split in half on upsampling;
    an even target length folds the two source bins at +-Nyquist together on
    downsampling. Both rules keep real signals exactly real.
    """
    n = spec.shape[axis]
    if m == n:
        return spec
    s = np.moveaxis(spec, axis, 0)
    out = np.zeros((m,) + s.shape[1:], dtype=complex)
    if m > n:
        pos = (n + 1) // 2
        neg = n - pos - (1 if n % 2 == 0 else 0)
        out[:pos] = s[:pos]
        if neg:
            out[m - neg:] = s[n - neg:]
        if n % 2 == 0:
            half = 0.5 * s[n // 2]
            out[n // 2] = half
            out[m - n // 2] = half
    else:
        pos = (m + 1) // 2
        neg = m - pos - (1 if m % 2 == 0 else 0)
        out[:pos] = s[:pos]
        if neg:
            out[m - neg:] = s[n - neg:]
        if m % 2 == 0:
            out[m // 2] = s[m // 2] + s[n - m // 2]
    return np.moveaxis(out, 0, axis)


def fourier_resize(channel: np.ndarray, target) -> np.ndarray:
    """Resample a real 2-D map to `target` by spectrum padding/truncation.

    Linear, and preserves the mean exactly in both directions.
    """
    channel = np.asarray(channel, dtype=np.float64)
    th, tw = target
    h, w = channel.shape
    if th < 1 or tw < 1:
        raise FeatureError(f"bad target size {target}")
    if (th, tw) == (h, w):
        return channel.copy()
    spec = np.fft.fft2(channel)
    spec = _stretch_spectrum_axis(spec, th, 0)
    spec = _stretch_spectrum_axis(spec, tw, 1)
    return np.fft.ifft2(spec).real * (th * tw / (h * w))


def resample_to_common_grid(stack: FeatureStack, target) -> FeatureStack:
    """Upsample every channel of a stack onto one common grid."""
    th, tw = target
    h, w = stack.grid
    if th < h or tw < w:
        raise FeatureError(
            f"target grid {target} smaller than source grid {(h, w)}"
        )
    resized = np.stack([fourier_resize(c, (th, tw)) for c in stack.channels])
    return FeatureStack(resized, stack.channel_layers)


def builtin_extract(patch: np.ndarray, n_orientations: int = 8,
                    cell_size: int = 4) -> FeatureStack:
    """Gradient-orientation energy features from a grayscale patch.

    Channel 0 is the mean-subtracted intensity averaged per cell; channels
    1..n are per-cell sums of squared gradient magnitude, binned by gradient
    orientation over [0, pi).
    """
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim != 2 or patch.size == 0:
        raise FeatureError(f"patch must be a non-empty 2-D array, got {patch.shape}")
    if n_orientations < 1:
        raise FeatureError("n_orientations must be >= 1")
    hc, wc = patch.shape[0] // cell_size, patch.shape[1] // cell_size
    if hc < 1 or wc < 1:
        raise FeatureError(
            f"patch {patch.shape} smaller than one {cell_size}x{cell_size} cell"
        )
    cropped = patch[:hc * cell_size, :wc * cell_size]

    gy, gx = np.gradient(cropped)
    energy = gx * gx + gy * gy
    theta = np.arctan2(gy, gx) % np.pi
    bins = np.minimum((theta / np.pi * n_orientations).astype(int), n_orientations - 1)

    def pool(values):
        return values.reshape(hc, cell_size, wc, cell_size).sum(axis=(1, 3))

    channels = np.empty((1 + n_orientations, hc, wc))
    channels[0] = pool(cropped - cropped.mean()) / cell_size ** 2
    for b in range(n_orientations):
        channels[1 + b] = pool(np.where(bins == b, energy, 0.0))
    labels = ("intensity",) + tuple(f"grad{b}" for b in range(n_orientations))
    return FeatureStack(channels, labels)


def stack_from_frame(frame: FeatureFrame, config: LayerConfig,
                     target=None) -> FeatureStack:
    """Assemble a frame's records for a layer configuration on one grid.

    The common grid defaults to the largest selected layer's grid. The total
    channel count must match the configuration's catalog value.
    """
    records = [frame.layer(label) for label in config.layers]
    if target is None:
        target = (max(rec.data.shape[0] for rec in records),
                  max(rec.data.shape[1] for rec in records))
    channels, labels = [], []
    for rec in records:
        maps = np.moveaxis(rec.data.astype(np.float64), 2, 0)
        sub = FeatureStack(maps, (rec.label,) * maps.shape[0])
        sub = resample_to_common_grid(sub, target)
        channels.append(sub.channels)
        labels.extend(sub.channel_layers)
    stack = FeatureStack(np.concatenate(channels), tuple(labels))
    expected = channel_count(config)
    if stack.num_channels != expected:
        raise FeatureError(
            f"frame {frame.index}: {stack.num_channels} channels for config "
            f"{config.label!r}, catalog expects {expected}"
        )
    return stack
