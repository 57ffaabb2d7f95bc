"""Correlation-filter building blocks: labels, regularizers, sample memory,
filter models, and frequency-domain detection with sub-cell peak refinement.

FFT convention: unnormalized numpy transforms. A filter bank h acts on a
sample x through per-channel spectrum products summed over channels, so the
response is the circular convolution of x with h (equivalently, circular
correlation with the flipped template).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FeatureStack


class DcfError(Exception):
    """Invalid solver input or detection mismatch."""


@dataclass
class GaussianLabel:
    """Desired response: a Gaussian bump with peak exactly 1 at the grid center."""

    grid: tuple
    sigma: float
    values: np.ndarray = field(init=False)
    freq: np.ndarray = field(init=False)

    def __post_init__(self):
        h, w = self.grid
        if h < 1 or w < 1:
            raise DcfError(f"bad label grid {self.grid}")
        if self.sigma <= 0:
            raise DcfError(f"sigma must be positive, got {self.sigma}")
        cy, cx = h // 2, w // 2
        ys = (np.arange(h)[:, None] - cy) ** 2
        xs = (np.arange(w)[None, :] - cx) ** 2
        vals = np.exp(-(ys + xs) / (2.0 * self.sigma ** 2))
        # guard against underflow at far corners; keeps values strictly positive
        self.values = np.maximum(vals, np.finfo(np.float64).tiny)
        self.freq = np.fft.fft2(self.values)

    @property
    def center(self) -> tuple:
        return (self.grid[0] // 2, self.grid[1] // 2)


def make_gaussian_label(size, sigma: float) -> GaussianLabel:
    return GaussianLabel(tuple(size), float(sigma))


@dataclass
class SpatialRegularizer:
    """Penalty weights over the filter grid: a flat plateau of `min_weight`
    covering the target extent, rising quadratically with the normalized
    distance outside it."""

    grid: tuple
    target_extent: tuple
    min_weight: float
    slope: float
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        h, w = self.grid
        th, tw = self.target_extent
        if self.min_weight <= 0:
            raise DcfError("min_weight must be positive")
        if self.slope < 0:
            raise DcfError("slope must be non-negative")
        if th > h or tw > w:
            raise DcfError(
                f"target extent {self.target_extent} exceeds grid {self.grid}"
            )
        cy, cx = h // 2, w // 2
        dy = np.maximum(0.0, np.abs(np.arange(h) - cy) - th / 2.0) / (h / 2.0)
        dx = np.maximum(0.0, np.abs(np.arange(w) - cx) - tw / 2.0) / (w / 2.0)
        self.weights = self.min_weight + self.slope * (
            dy[:, None] ** 2 + dx[None, :] ** 2
        )

    @property
    def mean_square(self) -> float:
        """Diagonal of the frequency-domain penalty operator (constant)."""
        return float(np.mean(self.weights ** 2))


def make_spatial_regularizer(grid, target_extent, min_w: float,
                             slope: float) -> SpatialRegularizer:
    return SpatialRegularizer(tuple(grid), tuple(target_extent), float(min_w),
                              float(slope))


class SampleMemory:
    """Weighted store of frequency-domain samples, at most `capacity` entries.

    Weights are kept normalized to sum 1.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise DcfError("capacity must be >= 1")
        self.capacity = capacity
        self.samples = []   # list of (K, H, W) complex spectra
        self.weights = np.empty(0)

    def __len__(self) -> int:
        return len(self.samples)

    def validate(self):
        assert len(self.samples) <= self.capacity
        if self.samples:
            np.testing.assert_allclose(self.weights.sum(), 1.0, rtol=0, atol=1e-12)

    def copy(self) -> "SampleMemory":
        out = SampleMemory(self.capacity)
        out.samples = [s.copy() for s in self.samples]
        out.weights = self.weights.copy()
        return out


def update_memory(memory: SampleMemory, new_sample_hat: np.ndarray,
                  learning_rate: float) -> SampleMemory:
    """Insert a sample: old weights shrink by (1 - lr), the new one gets lr.

    Over capacity, the two most similar samples merge into their weighted
    average carrying the summed weight.
    """
    if not 0.0 < learning_rate <= 1.0:
        raise DcfError(f"learning rate must be in (0, 1], got {learning_rate}")
    out = memory.copy()
    if learning_rate == 1.0:
        out.samples = [np.asarray(new_sample_hat, dtype=complex)]
        out.weights = np.ones(1)
        return out
    out.samples.append(np.asarray(new_sample_hat, dtype=complex))
    out.weights = np.append(out.weights * (1.0 - learning_rate), learning_rate)
    if len(out.samples) > out.capacity:
        n = len(out.samples)
        best, best_d = None, np.inf
        for i in range(n):
            for j in range(i + 1, n):
                d = float(np.linalg.norm(out.samples[i] - out.samples[j]))
                if d < best_d:
                    best, best_d = (i, j), d
        i, j = best
        wi, wj = out.weights[i], out.weights[j]
        merged = (wi * out.samples[i] + wj * out.samples[j]) / (wi + wj)
        keep = [k for k in range(n) if k not in (i, j)]
        out.samples = [out.samples[k] for k in keep] + [merged]
        out.weights = np.append(out.weights[keep], wi + wj)
    out.weights = out.weights / out.weights.sum()
    return out


@dataclass
class FilterModel:
    """Learned frequency-domain filter bank plus its training context."""

    filters_hat: np.ndarray        # (K, H, W) complex
    label: GaussianLabel
    regularizer: SpatialRegularizer | None
    solver: str                    # 'eco' | 'bacf'
    layer_config: object = None
    info: object = None            # solver diagnostics

    def __post_init__(self):
        k, h, w = self.filters_hat.shape
        if (h, w) != self.label.grid:
            raise DcfError(
                f"filter grid {(h, w)} does not match label grid {self.label.grid}"
            )

    @property
    def num_channels(self) -> int:
        return self.filters_hat.shape[0]

    @property
    def grid(self) -> tuple:
        return self.filters_hat.shape[1:]

    def spatial_filters(self) -> np.ndarray:
        return np.fft.ifft2(self.filters_hat, axes=(1, 2)).real

    def correlation_templates(self) -> np.ndarray:
        """Templates whose circular correlation with a sample reproduces
        detect(); each is the spatially flipped filter."""
        return np.fft.ifft2(np.conj(self.filters_hat), axes=(1, 2)).real


@dataclass
class ResponseMap:
    values: np.ndarray
    peak: tuple        # sub-cell (row, col), may be fractional
    peak_value: float


def _fourier_peak_refine(spectrum: np.ndarray, start: tuple, max_steps: int = 5):
    """Newton refinement of the response peak on its Fourier series."""
    h, w = spectrum.shape
    t = h * w
    ky = np.fft.fftfreq(h, 1.0 / h)[:, None]   # integer frequencies
    kx = np.fft.fftfreq(w, 1.0 / w)[None, :]
    wy, wx = 2.0 * np.pi * ky / h, 2.0 * np.pi * kx / w

    def series(p):
        phase = np.exp(1j * (wy * p[0] + wx * p[1]))
        base = spectrum * phase
        val = base.sum().real / t
        g = np.array([(base * 1j * wy).sum().real, (base * 1j * wx).sum().real]) / t
        hess = np.array([
            [(base * -wy * wy).sum().real, (base * -wy * wx).sum().real],
            [(base * -wx * wy).sum().real, (base * -wx * wx).sum().real],
        ]) / t
        return val, g, hess

    p = np.asarray(start, dtype=float)
    for _ in range(max_steps):
        val, g, hess = series(p)
        # require a solidly negative-definite Hessian (a relative margin on
        # the determinant rejects flat ridges and saddles that round-off
        # would otherwise let through); otherwise keep the discrete peak
        det = hess[0, 0] * hess[1, 1] - hess[0, 1] * hess[1, 0]
        scale = hess[0, 0] ** 2 + hess[1, 1] ** 2 + hess[0, 1] ** 2
        if not (hess[0, 0] < 0 and det > 1e-9 * scale):
            return np.asarray(start, dtype=float), series(np.asarray(start, float))[0]
        step = np.linalg.solve(hess, -g)
        if np.abs(step).max() > 1.0:
            step = step / np.abs(step).max()
        p = p + step
        if np.abs(step).max() < 1e-8:
            break
    if np.abs(p - np.asarray(start, float)).max() > 1.5:
        return np.asarray(start, dtype=float), series(np.asarray(start, float))[0]
    return p, series(p)[0]


def detect(model: FilterModel, x: FeatureStack) -> ResponseMap:
    """Correlation response of a sample under a filter model.

    The response spectrum is the channel sum of the sample spectra times the
    filter spectra; the peak is refined to sub-cell accuracy by Newton steps
    on the truncated Fourier series.
    """
    if x.num_channels != model.num_channels:
        raise DcfError(
            f"sample has {x.num_channels} channels, model has {model.num_channels}"
        )
    if x.grid != model.grid:
        raise DcfError(f"sample grid {x.grid} does not match model grid {model.grid}")
    x_hat = np.fft.fft2(x.channels, axes=(1, 2))
    spectrum = (x_hat * model.filters_hat).sum(axis=0)
    values = np.fft.ifft2(spectrum).real
    flat = int(np.argmax(values))
    start = np.unravel_index(flat, values.shape)
    peak, peak_value = _fourier_peak_refine(spectrum, start)
    return ResponseMap(values, (float(peak[0]), float(peak[1])), float(peak_value))
