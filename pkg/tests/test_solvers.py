import numpy as np
import pytest

from adatrack.dcf import (SampleMemory, make_gaussian_label,
                          make_spatial_regularizer, update_memory)
from adatrack.features import FeatureStack
from adatrack.solvers import (BacfConfig, CgSettings, SolverDivergence,
                              bacf_objective, filter_aligned, train_bacf,
                              train_eco)
from conftest import controlled_field, dense_dft


def make_memory(rng, n_samples, k, grid, controlled=False):
    mem = SampleMemory(max(n_samples, 1))
    for i in range(n_samples):
        if controlled:
            x = np.stack([controlled_field(rng, grid) for _ in range(k)])
        else:
            x = rng.standard_normal((k,) + grid)
        mem = update_memory(mem, np.fft.fft2(x, axes=(1, 2)),
                            1.0 if i == 0 else 1.0 / (i + 1))
    return mem


def dense_normal_solve(memory, regularizer, label):
    """Oracle: materialize the full normal-equation matrix and solve it.

    Unknowns are stacked channel-major; the data blocks are per-bin outer
    products, the penalty block applies the squared aligned weights in the
    spatial domain via explicit DFT matrices.
    """
    k, h, w = memory.samples[0].shape
    t = h * w
    n = k * t
    big_g = np.kron(dense_dft(h), dense_dft(w))        # 2-D DFT, row-major
    m = np.diag(filter_aligned(regularizer.weights).ravel() ** 2)
    reg_block = big_g @ m @ np.conj(big_g).T / t
    a = np.zeros((n, n), dtype=complex)
    b = np.zeros(n, dtype=complex)
    y = label.freq.ravel()
    for phi, x_hat in zip(memory.weights, memory.samples):
        diags = [np.diag(x_hat[c].ravel()) for c in range(k)]
        for c1 in range(k):
            for c2 in range(k):
                block = phi * np.conj(diags[c1]) @ diags[c2]
                a[c1 * t:(c1 + 1) * t, c2 * t:(c2 + 1) * t] += block
        for c in range(k):
            b[c * t:(c + 1) * t] += phi * np.conj(x_hat[c].ravel()) * y
    for c in range(k):
        a[c * t:(c + 1) * t, c * t:(c + 1) * t] += reg_block
    return np.linalg.solve(a, b).reshape(k, h, w)


class TestTrainEco:
    def test_ridge_case_matches_elementwise(self):
        # single sample, constant weights: closed-form per-bin division
        rng = np.random.default_rng(0)
        grid = (8, 8)
        lam = 0.3
        x = controlled_field(rng, grid)
        x_hat = np.fft.fft2(x)
        label = make_gaussian_label(grid, 1.0)
        reg = make_spatial_regularizer(grid, (4, 4), np.sqrt(lam), 0.0)
        mem = SampleMemory(1)
        mem = update_memory(mem, x_hat[None], 1.0)
        model = train_eco(mem, reg, label, cg=CgSettings(max_iters=50, tol=1e-12))
        oracle = np.conj(x_hat) * label.freq / (np.abs(x_hat) ** 2 + lam)
        err = np.abs(model.filters_hat[0] - oracle).max() / np.abs(oracle).max()
        assert err < 1e-8

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_dense_solve(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 4))
        grid = (int(rng.integers(4, 9)), int(rng.integers(4, 9)))
        mem = make_memory(rng, 3, k, grid)
        label = make_gaussian_label(grid, 1.0)
        reg = make_spatial_regularizer(grid, (grid[0] // 2, grid[1] // 2),
                                       0.2, 1.5)
        model = train_eco(mem, reg, label,
                          cg=CgSettings(max_iters=2000, tol=1e-12))
        dense = dense_normal_solve(mem, reg, label)
        err = np.linalg.norm(model.filters_hat - dense) / np.linalg.norm(dense)
        assert err < 1e-6

    def test_warm_start_with_solution_converges_immediately(self):
        rng = np.random.default_rng(5)
        grid = (8, 8)
        mem = make_memory(rng, 2, 2, grid)
        label = make_gaussian_label(grid, 1.0)
        reg = make_spatial_regularizer(grid, (4, 4), 0.2, 1.0)
        first = train_eco(mem, reg, label, cg=CgSettings(max_iters=500, tol=1e-10))
        again = train_eco(mem, reg, label, warm_start=first,
                          cg=CgSettings(max_iters=500, tol=1e-8))
        assert again.info.iterations <= 1

    def test_reports_iterations_and_residuals(self):
        rng = np.random.default_rng(6)
        mem = make_memory(rng, 1, 1, (8, 8))
        label = make_gaussian_label((8, 8), 1.0)
        reg = make_spatial_regularizer((8, 8), (4, 4), 0.2, 1.0)
        model = train_eco(mem, reg, label, cg=CgSettings(max_iters=3, tol=1e-14))
        assert model.info.iterations == 3
        assert not model.info.converged
        assert len(model.info.residuals) == 4

    def test_empty_memory_rejected(self):
        label = make_gaussian_label((4, 4), 1.0)
        reg = make_spatial_regularizer((4, 4), (2, 2), 0.2, 1.0)
        with pytest.raises(Exception, match="empty"):
            train_eco(SampleMemory(1), reg, label)

    def test_divergence_raises_with_trace(self):
        # feed the solver core an operator violating its Hermitian contract:
        # residuals must grow and trip the divergence guard
        from adatrack.solvers import _pcg
        rng = np.random.default_rng(7)
        n = 16
        q = np.diag(np.ones(n - 1), -1) * 4.0
        q[0, -1] = 4.0  # amplifying cyclic shift
        apply_a = lambda v: q @ v
        b = rng.standard_normal(n) + 0j
        with pytest.raises(SolverDivergence) as excinfo:
            _pcg(apply_a, b, np.zeros(n, dtype=complex),
                 CgSettings(max_iters=100, tol=1e-14), lambda r: r)
        trace = excinfo.value.residuals
        assert len(trace) > 5
        assert trace[-1] > trace[0]


def spatial_bacf_objective(h_spat, x, label, lam):
    """Direct spatial-domain sum: responses from explicit circular
    convolution over every shift."""
    k, gh, gw = x.shape
    resp = np.zeros((gh, gw))
    for c in range(k):
        for py in range(gh):
            for px in range(gw):
                if h_spat[c, py, px] == 0.0:
                    continue
                resp += h_spat[c, py, px] * np.roll(
                    np.roll(x[c], py, axis=0), px, axis=1)
    return 0.5 * ((label.values - resp) ** 2).sum() \
        + 0.5 * lam * (h_spat ** 2).sum()


class TestTrainBacf:
    def test_unregularized_full_crop_matches_elementwise(self):
        rng = np.random.default_rng(0)
        grid = (8, 8)
        x = controlled_field(rng, grid)
        x_hat = np.fft.fft2(x)
        label = make_gaussian_label(grid, 1.0)
        cfg = BacfConfig(lam=0.0, crop_ratio=1.0, iterations=15,
                         mu=0.1, mu_scale=1.0, mu_max=0.1)
        model = train_bacf(FeatureStack(x[None], ("c",)), label, cfg)
        oracle = np.conj(x_hat) * label.freq / (np.abs(x_hat) ** 2)
        err = np.abs(model.filters_hat[0] - oracle).max() / np.abs(oracle).max()
        assert err < 1e-6
        assert model.info.constraint_residuals[-1] < 1e-6

    def test_zero_sample_zero_filter(self):
        label = make_gaussian_label((8, 8), 1.0)
        model = train_bacf(FeatureStack(np.zeros((2, 8, 8)), ("a", "b")),
                           label, BacfConfig())
        np.testing.assert_allclose(model.filters_hat, 0.0)
        assert bacf_objective(model, FeatureStack(np.zeros((2, 8, 8)),
                                                  ("a", "b")), label, 0.01) \
            == pytest.approx(0.5 * (label.values ** 2).sum())

    @pytest.mark.parametrize("seed", range(3))
    def test_objective_decreases_and_residual_shrinks(self, seed):
        rng = np.random.default_rng(seed)
        grid = (16, 16)
        x = rng.standard_normal((2,) + grid)
        label = make_gaussian_label(grid, 1.5)
        cfg = BacfConfig()
        stack = FeatureStack(x, ("a", "b"))
        model = train_bacf(stack, label, cfg)
        start = bacf_objective(np.zeros((2,) + grid), stack, label, cfg.lam)
        end = bacf_objective(model, stack, label, cfg.lam)
        assert end <= start
        res = model.info.constraint_residuals
        assert res[-1] <= res[0] / 10.0
        assert all(np.isfinite(res))

    def test_objective_spatial_equals_frequency(self):
        rng = np.random.default_rng(3)
        grid = (8, 8)
        x = rng.standard_normal((2,) + grid)
        label = make_gaussian_label(grid, 1.0)
        cfg = BacfConfig(iterations=10)
        stack = FeatureStack(x, ("a", "b"))
        model = train_bacf(stack, label, cfg)
        h_spat = model.spatial_filters()
        freq_val = bacf_objective(model, stack, label, cfg.lam)
        spat_val = spatial_bacf_objective(h_spat, x, label, cfg.lam)
        assert freq_val == pytest.approx(spat_val, abs=1e-8)

    def test_filter_supported_on_aligned_crop(self):
        rng = np.random.default_rng(4)
        grid = (16, 16)
        x = rng.standard_normal((1,) + grid)
        label = make_gaussian_label(grid, 1.0)
        model = train_bacf(FeatureStack(x, ("a",)), label,
                           BacfConfig(crop_ratio=0.5))
        h = model.spatial_filters()[0]
        # support is the centered box rolled to the origin; viewed back in
        # centered layout it must vanish outside the central crop (up to
        # transform round-off)
        centered = np.fft.fftshift(np.abs(h))
        assert centered[4:12, 4:12].max() > 1e-3
        outside = centered.copy()
        outside[4:12, 4:12] = 0.0
        assert outside.max() < 1e-12 * centered.max()

    def test_lagrangian_logged_per_iteration(self):
        rng = np.random.default_rng(5)
        label = make_gaussian_label((8, 8), 1.0)
        model = train_bacf(FeatureStack(rng.standard_normal((1, 8, 8)), ("a",)),
                           label, BacfConfig(iterations=7))
        assert len(model.info.lagrangian) == 7
        assert len(model.info.mu_trace) == 7

    def test_signal_length_and_validation(self):
        with pytest.raises(Exception):
            BacfConfig(crop_ratio=0.0)
        with pytest.raises(Exception):
            BacfConfig(iterations=0)
        with pytest.raises(Exception):
            BacfConfig(lam=-1.0)
