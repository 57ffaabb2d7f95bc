"""Filter learning.

Two solvers produce a FilterModel on the same grid as the desired response:

* train_eco: normal equations of the spatially regularized least-squares
  objective over a weighted sample memory, solved by preconditioned
  conjugate gradient entirely in the frequency domain.
* train_bacf: background-aware formulation with the filter constrained to a
  central crop of the search grid, split by ADMM into a per-bin linear
  solve, a cropped spatial shrinkage, and a dual update.

Both use unnormalized FFTs; the data term carries a 1/T factor so that
frequency-domain objective values equal their spatial-domain counterparts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dcf import (DcfError, FilterModel, GaussianLabel, SampleMemory,
                  SpatialRegularizer)
from .features import FeatureStack


class SolverDivergence(DcfError):
    """Iterative solve diverged; carries the residual trace."""

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = list(residuals)


@dataclass
class CgSettings:
    max_iters: int = 100
    tol: float = 1e-6
    precondition: bool = True


@dataclass
class CgInfo:
    iterations: int
    residuals: list
    converged: bool


@dataclass
class BacfConfig:
    """ADMM settings for the background-aware solver.

    `lam` and `mu` follow the scaling convention of the published
    background-aware baseline, whose data term carries a factor of the
    signal length T; internally both are divided by T so the minimized
    objective matches the plain spatial-domain sum.
    """

    lam: float = 0.01          # filter energy penalty
    crop_ratio: float = 0.5    # target-to-search extent of the filter support
    iterations: int = 15
    mu: float = 1.0            # initial penalty parameter
    mu_scale: float = 10.0
    mu_max: float = 1e3
    signal_length: int | None = None  # set from the sample grid when None

    def __post_init__(self):
        if self.lam < 0:
            raise DcfError("lam must be >= 0")
        if not 0.0 < self.crop_ratio <= 1.0:
            raise DcfError("crop_ratio must be in (0, 1]")
        if self.iterations < 1:
            raise DcfError("iterations must be >= 1")


@dataclass
class AdmmInfo:
    iterations: int
    constraint_residuals: list
    lagrangian: list
    mu_trace: list


def filter_aligned(mask: np.ndarray) -> np.ndarray:
    """Roll a center-origin spatial map into the filter's wrapped layout.

    A filter synthesizing a center-peaked response from center-aligned
    content carries its spatial mass around the grid origin (consider an
    impulse sample: the convolution shifts the filter by the grid center),
    so penalty and support masks built around the center must be rolled to
    the origin before they multiply the filter.
    """
    return np.fft.ifftshift(mask)


def _memory_spectra(memory: SampleMemory):
    if len(memory) == 0:
        raise DcfError("sample memory is empty")
    grids = {s.shape for s in memory.samples}
    if len(grids) != 1:
        raise DcfError(f"samples disagree on shape: {grids}")
    return memory.samples, memory.weights


def _normal_operator(samples, weights, reg_sq):
    def apply(h_hat):
        out = np.zeros_like(h_hat)
        for phi, x_hat in zip(weights, samples):
            resp = (x_hat * h_hat).sum(axis=0)
            out += phi * np.conj(x_hat) * resp[None]
        out += np.fft.fft2(reg_sq[None] * np.fft.ifft2(h_hat, axes=(1, 2)),
                           axes=(1, 2))
        return out
    return apply


def train_eco(memory: SampleMemory, regularizer: SpatialRegularizer,
              label: GaussianLabel, warm_start: FilterModel | None = None,
              cg: CgSettings | None = None) -> FilterModel:
    """Solve the regularized normal equations over the sample memory by
    preconditioned conjugate gradient.

    Every stored sample must already live on the label grid. A warm start
    reuses a previous model's filters as the initial iterate.
    """
    cg = cg or CgSettings()
    samples, weights = _memory_spectra(memory)
    k, h, w = samples[0].shape
    if (h, w) != label.grid:
        raise DcfError(f"sample grid {(h, w)} does not match label {label.grid}")
    if regularizer.weights.shape != label.grid:
        raise DcfError("regularizer grid does not match label grid")

    reg_sq = filter_aligned(regularizer.weights) ** 2
    apply_a = _normal_operator(samples, weights, reg_sq)
    b = np.zeros((k, h, w), dtype=complex)
    for phi, x_hat in zip(weights, samples):
        b += phi * np.conj(x_hat) * label.freq[None]

    if cg.precondition:
        diag = np.zeros((k, h, w))
        for phi, x_hat in zip(weights, samples):
            diag += phi * (x_hat.real ** 2 + x_hat.imag ** 2)
        diag += regularizer.mean_square
        precond = lambda r: r / diag
    else:
        precond = lambda r: r

    if warm_start is not None and warm_start.filters_hat.shape != (k, h, w):
        raise DcfError("warm start shape mismatch")
    x0 = (warm_start.filters_hat.copy() if warm_start is not None
          else np.zeros((k, h, w), dtype=complex))
    x, info = _pcg(apply_a, b, x0, cg, precond)
    return FilterModel(x, label, regularizer, "eco", info=info)


def _pcg(apply_a, b, x0, cg: CgSettings, precond):
    """Preconditioned conjugate gradient on a Hermitian positive system.

    Stops on the relative-residual tolerance or on max_iters. Raises
    SolverDivergence when the residual grows five consecutive iterations
    beyond the problem scale, which a positive-definite system cannot
    sustain. Transient residual oscillations below that scale are normal
    on ill-conditioned systems and are left to run.
    """
    x = x0
    b_norm = np.linalg.norm(b)
    r = b - apply_a(x)
    residuals = [float(np.linalg.norm(r))]
    converged = b_norm == 0 or residuals[-1] <= cg.tol * b_norm
    iterations = 0
    if not converged:
        z = precond(r)
        p = z.copy()
        rz = np.vdot(r, z).real
        grow = 0
        for iterations in range(1, cg.max_iters + 1):
            ap = apply_a(p)
            alpha = rz / np.vdot(p, ap).real
            x = x + alpha * p
            r = r - alpha * ap
            res = float(np.linalg.norm(r))
            residuals.append(res)
            if res > residuals[-2]:
                grow += 1
                if grow >= 5 and res > max(residuals[0], b_norm):
                    raise SolverDivergence(
                        f"conjugate gradient diverged after {iterations} "
                        f"iterations", residuals)
            else:
                grow = 0
            if res <= cg.tol * b_norm:
                converged = True
                break
            z = precond(r)
            rz_next = np.vdot(r, z).real
            p = z + (rz_next / rz) * p
            rz = rz_next
    return x, CgInfo(iterations, residuals, converged)


def _crop_mask(grid, crop_ratio):
    h, w = grid
    ph = max(1, int(round(h * crop_ratio)))
    pw = max(1, int(round(w * crop_ratio)))
    cy, cx = h // 2, w // 2
    y0 = max(0, cy - ph // 2)
    x0 = max(0, cx - pw // 2)
    mask = np.zeros((h, w), dtype=bool)
    mask[y0:y0 + ph, x0:x0 + pw] = True
    return mask


def _merge_samples(samples, weights):
    if isinstance(samples, FeatureStack):
        return samples.channels
    stacks = list(samples)
    if not stacks:
        raise DcfError("no samples given")
    if weights is None:
        weights = np.full(len(stacks), 1.0 / len(stacks))
    weights = np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    return sum(wt * st.channels for wt, st in zip(weights, stacks))


def train_bacf(samples, label: GaussianLabel, cfg: BacfConfig,
               weights=None, warm_start: FilterModel | None = None) -> FilterModel:
    """Learn a background-aware filter by ADMM.

    `samples` is a FeatureStack or a list of them (merged by `weights` into
    one model sample). The filter support is the central crop of the grid;
    the auxiliary full-grid spectrum is driven to the padded filter's
    spectrum as the penalty parameter grows. A warm start resumes from a
    previous model's filters.
    """
    x = _merge_samples(samples, weights)
    k, hgrid, wgrid = x.shape
    if (hgrid, wgrid) != label.grid:
        raise DcfError(f"sample grid {(hgrid, wgrid)} != label grid {label.grid}")
    t = cfg.signal_length or hgrid * wgrid
    lam = cfg.lam / t
    mask = filter_aligned(_crop_mask((hgrid, wgrid), cfg.crop_ratio))

    x_hat = np.fft.fft2(x, axes=(1, 2))
    y_hat = label.freq
    sx = (x_hat.real ** 2 + x_hat.imag ** 2).sum(axis=0) / t
    data_rhs = np.conj(x_hat) * y_hat[None] / t

    if warm_start is not None:
        h_spat = np.where(mask[None],
                          warm_start.spatial_filters(), 0.0)
        g_hat = np.fft.fft2(h_spat, axes=(1, 2))
    else:
        g_hat = np.zeros((k, hgrid, wgrid), dtype=complex)
        h_spat = np.zeros((k, hgrid, wgrid))
    dual = np.zeros((k, hgrid, wgrid), dtype=complex)
    mu = cfg.mu / t

    residuals, lagrangian, mu_trace = [], [], []
    mh = np.fft.fft2(h_spat, axes=(1, 2))
    for it in range(1, cfg.iterations + 1):
        # per-bin K x K solve via the matrix inversion lemma
        v = mh - dual
        rhs = data_rhs + mu * v
        xt_rhs = (x_hat * rhs).sum(axis=0)
        g_hat = (rhs - np.conj(x_hat) * (xt_rhs / (t * (mu + sx)))[None]) / mu

        # cropped spatial shrinkage
        spat = np.fft.ifft2(g_hat + dual, axes=(1, 2)).real
        h_spat = np.where(mask[None], mu * t * spat / (lam + mu * t), 0.0)
        mh = np.fft.fft2(h_spat, axes=(1, 2))

        constraint = g_hat - mh
        res = float(np.linalg.norm(constraint))
        if not np.isfinite(res):
            raise SolverDivergence(
                f"non-finite ADMM state at iteration {it}", residuals)
        residuals.append(res)

        data = float((np.abs(y_hat - (x_hat * g_hat).sum(axis=0)) ** 2).sum())
        lag = (0.5 / t * data
               + 0.5 * lam * float((h_spat ** 2).sum())
               + 0.5 * mu * float((np.abs(constraint + dual) ** 2).sum())
               - 0.5 * mu * float((np.abs(dual) ** 2).sum()))
        lagrangian.append(lag)
        mu_trace.append(mu)

        dual = dual + constraint
        mu = min(cfg.mu_max / t, cfg.mu_scale * mu)

    info = AdmmInfo(cfg.iterations, residuals, lagrangian, mu_trace)
    return FilterModel(mh, label, None, "bacf", info=info)


def bacf_objective(model_or_filters, samples, label: GaussianLabel,
                   lam: float, weights=None) -> float:
    """Background-aware objective with the constraint substituted, evaluated
    in the frequency domain. Matches the direct spatial-domain sum."""
    if isinstance(model_or_filters, FilterModel):
        h_hat = model_or_filters.filters_hat
    else:
        h_hat = np.fft.fft2(np.asarray(model_or_filters), axes=(1, 2))
    x = _merge_samples(samples, weights)
    t = h_hat.shape[1] * h_hat.shape[2]
    x_hat = np.fft.fft2(x, axes=(1, 2))
    resid = label.freq - (x_hat * h_hat).sum(axis=0)
    h_spat = np.fft.ifft2(h_hat, axes=(1, 2)).real
    return float(0.5 / t * (np.abs(resid) ** 2).sum()
                 + 0.5 * lam * (h_spat ** 2).sum())


def eco_objective(model_or_filters, memory: SampleMemory,
                  regularizer: SpatialRegularizer, label: GaussianLabel) -> float:
    """Weighted data term plus spatial penalty, frequency-domain evaluation."""
    if isinstance(model_or_filters, FilterModel):
        h_hat = model_or_filters.filters_hat
    else:
        h_hat = np.fft.fft2(np.asarray(model_or_filters), axes=(1, 2))
    t = h_hat.shape[1] * h_hat.shape[2]
    total = 0.0
    for phi, x_hat in zip(memory.weights, memory.samples):
        resid = label.freq - (x_hat * h_hat).sum(axis=0)
        total += phi / t * (np.abs(resid) ** 2).sum()
    h_spat = np.fft.ifft2(h_hat, axes=(1, 2)).real
    total += ((filter_aligned(regularizer.weights)[None] * h_spat) ** 2).sum()
    return float(total)
