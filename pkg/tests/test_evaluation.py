import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from adatrack.dataset import DatasetError, read_sequence
from adatrack.evaluation import (OPEResult, center_error, evaluate_boxes, iou,
                                 precision_curve, run_ope, success_curve,
                                 write_report)
from conftest import synthetic_sequence

boxes_strategy = st.lists(
    st.tuples(st.floats(-50, 50), st.floats(-50, 50),
              st.floats(0.1, 40), st.floats(0.1, 40)),
    min_size=1, max_size=30)


class TestIou:
    def test_identical(self):
        assert iou((1, 2, 10, 5), (1, 2, 10, 5)) == 1.0

    def test_disjoint(self):
        assert iou((0, 0, 10, 10), (20, 20, 5, 5)) == 0.0

    def test_half_overlap_arithmetic(self):
        assert iou((0, 0, 10, 10), (5, 0, 10, 10)) == pytest.approx(1 / 3)

    def test_zero_union(self):
        assert iou((0, 0, 0, 0), (0, 0, 0, 0)) == 0.0

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            a = tuple(rng.uniform(0, 20, 2)) + tuple(rng.uniform(1, 20, 2))
            b = tuple(rng.uniform(0, 20, 2)) + tuple(rng.uniform(1, 20, 2))
            v = iou(a, b)
            assert v == iou(b, a)
            assert 0.0 <= v <= 1.0

    def test_brute_force_grid_oracle(self):
        # pixel-counting oracle on integer boxes
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = (int(rng.integers(0, 10)), int(rng.integers(0, 10)),
                 int(rng.integers(1, 12)), int(rng.integers(1, 12)))
            b = (int(rng.integers(0, 10)), int(rng.integers(0, 10)),
                 int(rng.integers(1, 12)), int(rng.integers(1, 12)))
            grid = np.zeros((40, 40, 2), dtype=bool)
            grid[a[1]:a[1] + a[3], a[0]:a[0] + a[2], 0] = True
            grid[b[1]:b[1] + b[3], b[0]:b[0] + b[2], 1] = True
            inter = (grid[..., 0] & grid[..., 1]).sum()
            union = (grid[..., 0] | grid[..., 1]).sum()
            assert iou(a, b) == pytest.approx(inter / union)


class TestCenterError:
    def test_identical(self):
        assert center_error((3, 4, 5, 6), (3, 4, 5, 6)) == 0.0

    def test_three_four_five(self):
        assert center_error((0, 0, 10, 10), (3, 4, 10, 10)) == pytest.approx(5.0)

    def test_symmetric(self):
        a, b = (1, 2, 3, 4), (9, 8, 7, 6)
        assert center_error(a, b) == center_error(b, a)


class TestSuccessCurve:
    def make_fixture(self):
        # overlaps exactly {1, 0.6, 0.4, 0.2, 0}
        gt = [(0.0, 0.0, 10.0, 10.0)] * 5
        est = [(0.0, 0.0, 10.0, 10.0),
               (2.5, 0.0, 10.0, 10.0),
               (30.0 / 7.0, 0.0, 10.0, 10.0),
               (20.0 / 3.0, 0.0, 10.0, 10.0),
               (50.0, 0.0, 10.0, 10.0)]
        return est, gt

    def test_fixture_success_at_half(self):
        est, gt = self.make_fixture()
        _, _, at_half = success_curve(est, gt)
        assert at_half == pytest.approx(0.4)

    def test_perfect_tracking(self):
        est = [(0, 0, 5, 5)] * 8
        curve, auc, at_half = success_curve(est, est)
        assert at_half == 1.0
        assert (curve[:-1] == 1.0).all()
        assert abs(auc - 1.0) <= 0.05  # one grid step

    def test_all_disjoint(self):
        gt = [(0, 0, 5, 5)] * 4
        est = [(100, 100, 5, 5)] * 4
        curve, auc, at_half = success_curve(est, gt)
        assert (curve == 0).all() and auc == 0 and at_half == 0


class TestPrecisionCurve:
    def make_fixture(self):
        gt = [(0.0, 0.0, 10.0, 10.0)] * 5
        est = [(d, 0.0, 10.0, 10.0) for d in (0.0, 10.0, 19.0, 21.0, 100.0)]
        return est, gt

    def test_fixture_precision_at_20(self):
        est, gt = self.make_fixture()
        _, at20 = precision_curve(est, gt)
        assert at20 == pytest.approx(0.6)

    def test_perfect_tracking(self):
        est = [(2, 3, 4, 5)] * 6
        curve, at20 = precision_curve(est, est)
        assert at20 == 1.0
        assert (curve[1:] == 1.0).all()  # every threshold >= 1 px

    def test_doubling_errors_halves_crossing_threshold(self):
        gt = [(0.0, 0.0, 4.0, 4.0)] * 3
        est1 = [(d, 0.0, 4.0, 4.0) for d in (4.0, 8.0, 12.0)]
        est2 = [(2 * d, 0.0, 4.0, 4.0) for d in (4.0, 8.0, 12.0)]
        c1, _ = precision_curve(est1, gt)
        c2, _ = precision_curve(est2, gt)
        for t in range(0, 25):
            assert c2[2 * t] == c1[t]


class TestCurveProperties:
    @settings(max_examples=40, deadline=None)
    @given(boxes_strategy, st.integers(0, 2 ** 31 - 1))
    def test_monotone_and_bounded(self, gt, seed):
        rng = np.random.default_rng(seed)
        est = [tuple(np.asarray(b) + rng.uniform(-30, 30, 4) * [1, 1, 0, 0])
               for b in gt]
        result = evaluate_boxes("x", est, gt)
        assert np.all(np.diff(result.precision) >= 0)
        assert np.all(np.diff(result.success) <= 0)
        assert result.precision.min() >= 0 and result.precision.max() <= 1
        assert result.success.min() >= 0 and result.success.max() <= 1


def write_sequence_dir(root, name, frames, boxes, tags=("SV",)):
    seq = root / name
    (seq / "img").mkdir(parents=True)
    for i, f in enumerate(frames):
        img = Image.fromarray((np.clip(f, 0, 1) * 255).astype(np.uint8))
        img.save(seq / "img" / f"{i + 1:04d}.png")
    lines = [",".join(f"{v:.2f}" for v in (b[0] + 1, b[1] + 1, b[2], b[3]))
             for b in boxes]
    (seq / "groundtruth_rect.txt").write_text("\n".join(lines) + "\n")
    (seq / "attrs.txt").write_text("\n".join(tags) + "\n")
    return seq


class TestDataset:
    def test_round_trip(self, tmp_path):
        frames, gt = synthetic_sequence(n_frames=4, frame_size=(64, 48),
                                        target=16)
        write_sequence_dir(tmp_path, "seq01", frames, gt, tags=("OCC", "SV"))
        seq = read_sequence(tmp_path / "seq01")
        assert len(seq) == 4
        assert seq.ground_truth.tags == ("OCC", "SV")
        np.testing.assert_allclose(seq.ground_truth.boxes[0], gt[0], atol=0.01)

    def test_mismatched_counts_truncate_and_flag(self, tmp_path):
        frames, gt = synthetic_sequence(n_frames=4, frame_size=(64, 48),
                                        target=16)
        write_sequence_dir(tmp_path, "seq01", frames, gt + [gt[-1]] * 2)
        seq = read_sequence(tmp_path / "seq01")
        assert len(seq) == 4
        assert seq.truncated

    def test_unknown_tag_rejected(self, tmp_path):
        frames, gt = synthetic_sequence(n_frames=2, frame_size=(64, 48),
                                        target=16)
        d = write_sequence_dir(tmp_path, "seq01", frames, gt)
        (d / "attrs.txt").write_text("NOT_A_TAG\n")
        with pytest.raises(DatasetError):
            read_sequence(d)


class TestRunOpe:
    def test_two_sequences_with_attribute_breakdown(self, tmp_path, catalog):
        frames, gt = synthetic_sequence(n_frames=6, frame_size=(96, 72),
                                        target=20, speed=1, seed=1)
        write_sequence_dir(tmp_path, "alpha", frames, gt, tags=("SV",))
        frames2, gt2 = synthetic_sequence(n_frames=6, frame_size=(96, 72),
                                          target=20, speed=0, seed=2)
        write_sequence_dir(tmp_path, "beta", frames2, gt2, tags=("SV", "OCC"))
        (tmp_path / "broken").mkdir()
        (tmp_path / "broken" / "img").mkdir()  # no frames: skipped

        report = run_ope(tmp_path, catalog, jobs=2)
        assert [r.name for r in report.results] == ["alpha", "beta"]
        assert len(report.skipped) == 1
        agg = report.aggregate()
        assert agg["sequences"] == 2
        assert 0 <= agg["success_auc"] <= 1
        by_attr = report.by_attribute()
        assert by_attr["OCC"]["sequences"] == 1
        beta = next(r for r in report.results if r.name == "beta")
        assert by_attr["OCC"]["success_auc"] == pytest.approx(beta.success_auc)
        assert by_attr["SV"]["success_auc"] == pytest.approx(
            (report.results[0].success_auc + beta.success_auc) / 2)

    def test_report_files(self, tmp_path, catalog):
        frames, gt = synthetic_sequence(n_frames=4, frame_size=(64, 48),
                                        target=16, speed=0)
        write_sequence_dir(tmp_path / "data", "solo", frames, gt)
        report = run_ope(tmp_path / "data", catalog, jobs=1)
        payload = write_report(report, tmp_path / "out")
        results = json.loads((tmp_path / "out" / "results.json").read_text())
        assert results["aggregate"]["sequences"] == 1
        assert "solo" in results["sequences"]
        assert len(results["sequences"]["solo"]["boxes"]) == 4
        csv_text = (tmp_path / "out" / "success_curves.csv").read_text()
        assert csv_text.splitlines()[0].startswith("sequence,0,0.05")
        assert (tmp_path / "out" / "precision_curves.csv").exists()
        assert payload["aggregate"] == results["aggregate"]

    def test_single_sequence_attribute_equals_own_metric(self, tmp_path, catalog):
        frames, gt = synthetic_sequence(n_frames=4, frame_size=(64, 48),
                                        target=16, speed=0)
        write_sequence_dir(tmp_path, "only", frames, gt, tags=("LR",))
        report = run_ope(tmp_path, catalog, jobs=1)
        only = report.results[0]
        attr = report.by_attribute()["LR"]
        assert attr["precision_at_20"] == pytest.approx(only.precision_at_20)
        assert attr["success_at_0.5"] == pytest.approx(only.success_at_half)


class TestValidation:
    def test_monotonicity_enforced(self):
        bad = OPEResult("x", [], np.array([0.5, 0.4]), np.array([1.0, 1.0]),
                        0.5, 1.0, 1.0)
        with pytest.raises(ValueError, match="monotone"):
            bad.validate()

    def test_negative_size_rejected(self):
        with pytest.raises(ValueError):
            iou((0, 0, -1, 5), (0, 0, 4, 4))

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError, match="nothing to evaluate"):
            evaluate_boxes("x", [], [(0, 0, 1, 1)])
