import numpy as np
import pytest


def controlled_field(rng, shape, lo=1.0, hi=2.0):
    """Real field whose spectrum magnitudes lie in [lo, hi] at every bin.

    Keeps elementwise frequency-domain oracles well conditioned.
    """
    base = np.fft.fft2(rng.standard_normal(shape))
    mag = np.abs(np.fft.fft2(rng.standard_normal(shape)))
    mag = lo + (mag - mag.min()) / (mag.max() - mag.min()) * (hi - lo)
    spec = base / np.abs(base) * mag
    return np.fft.ifft2(spec).real


def synthetic_sequence(n_frames=100, speed=2, noise=0.0, seed=7,
                       frame_size=(320, 160), target=48):
    """Textured square translating `speed` px/frame over a textured
    background, with optional additive Gaussian noise. Returns
    (frames, ground-truth boxes)."""
    rng = np.random.default_rng(seed)
    w, h = frame_size
    bg = rng.uniform(0.35, 0.55, (h, w))
    tex = rng.uniform(0.0, 1.0, (target, target))
    y0 = (h - target) // 2
    frames, gt = [], []
    for t in range(n_frames):
        x = 24 + speed * t
        if x + target > w - 8:
            break
        f = bg.copy()
        f[y0:y0 + target, x:x + target] = tex
        if noise:
            f = np.clip(f + rng.normal(0.0, noise, f.shape), 0.0, 1.0)
        frames.append(f)
        gt.append((float(x), float(y0), float(target), float(target)))
    return frames, gt


def dense_dft(n):
    """Unnormalized DFT matrix, D[j, k] = exp(-2i pi j k / n)."""
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(-2j * np.pi * j * k / n)


@pytest.fixture
def catalog():
    from adatrack import load_dictionaries
    return load_dictionaries()
