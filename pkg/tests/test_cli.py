import csv
import json

import numpy as np
import pytest

from adatrack.cli import main
from test_evaluation import write_sequence_dir
from conftest import synthetic_sequence


class TestSelect:
    def test_occ_resnet(self, capsys):
        assert main(["select", "--model", "resnet50", "--attrs", "OCC"]) == 0
        out = capsys.readouterr().out
        assert "selected:  D3" in out
        assert "channels:  512" in out

    def test_empty_attrs_uses_uniform_average(self, capsys):
        assert main(["select", "--model", "vggm", "--attrs", ""]) == 0
        first = capsys.readouterr().out
        assert main(["select", "--model", "vggm",
                     "--attrs", ",".join(
                         ["SV", "DEF", "OPR", "IPR", "FM", "MB", "LR", "OV",
                          "BC", "OCC", "IV"])]) == 0
        second = capsys.readouterr().out
        pick = [l for l in first.splitlines() if l.startswith("selected")]
        assert pick == [l for l in second.splitlines() if l.startswith("selected")]

    def test_score_table_lists_all_configs(self, capsys):
        main(["select", "--model", "vgg16", "--attrs", "SV,LR"])
        out = capsys.readouterr().out
        header = next(i for i, l in enumerate(out.splitlines())
                      if l.startswith("configuration"))
        rows = [l for l in out.splitlines()[header + 1:] if l.strip()]
        assert len(rows) == 29
        assert sum(1 for l in rows if l.rstrip().endswith("*")) == 1

    def test_unknown_attr_fails(self, capsys):
        assert main(["select", "--model", "vggm", "--attrs", "XX"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_flag_rejected(self):
        with pytest.raises(SystemExit) as e:
            main(["select", "--nonsense", "1"])
        assert e.value.code == 2


class TestTrack:
    def test_writes_boxes_file(self, tmp_path, capsys):
        frames, gt = synthetic_sequence(n_frames=5, frame_size=(64, 48),
                                        target=16, speed=0)
        write_sequence_dir(tmp_path, "seq", frames, gt)
        rc = main(["track", "--dataset", str(tmp_path / "seq"),
                   "--out", str(tmp_path / "out"), "--scales", "1"])
        assert rc == 0
        lines = (tmp_path / "out" / "boxes.txt").read_text().splitlines()
        assert len(lines) == 5
        assert all(len(l.split(",")) == 4 for l in lines)

    def test_feature_file_mode(self, tmp_path, capsys):
        from adatrack.afdt import FeatureFrame, LayerRecord, write_feature_file
        rng = np.random.default_rng(0)
        depths = {"D1": 96, "D2": 256, "D3": 512}
        frames = []
        for i in range(3):
            layers = [LayerRecord(lbl, rng.standard_normal(
                (16, 16, d)).astype(np.float32)) for lbl, d in depths.items()]
            frames.append(FeatureFrame(i, layers))
        afdt = tmp_path / "seq.afdt"
        write_feature_file(frames, afdt)
        rc = main(["track", "--features", str(afdt), "--model", "vggm",
                   "--box", "24,24,16,16", "--frame-size", "64x64",
                   "--out", str(tmp_path / "out"), "--scales", "1"])
        assert rc == 0
        lines = (tmp_path / "out" / "boxes.txt").read_text().splitlines()
        assert len(lines) == 3


class TestEvaluate:
    def test_end_to_end_report(self, tmp_path, capsys):
        frames, gt = synthetic_sequence(n_frames=5, frame_size=(64, 48),
                                        target=16, speed=0)
        write_sequence_dir(tmp_path / "data", "seq", frames, gt)
        rc = main(["evaluate", "--dataset", str(tmp_path / "data"),
                   "--out", str(tmp_path / "out"), "--jobs", "1"])
        assert rc == 0
        payload = json.loads((tmp_path / "out" / "results.json").read_text())
        assert payload["aggregate"]["sequences"] == 1
        out = capsys.readouterr().out
        assert "success@0.5" in out

    def test_missing_dataset_is_error_exit(self, tmp_path, capsys):
        rc = main(["evaluate", "--dataset", str(tmp_path / "nope"),
                   "--out", str(tmp_path / "out")])
        assert rc == 1


class TestAnalyze:
    def test_one_column_per_config_in_unit_range(self, tmp_path, capsys):
        frames, gt = synthetic_sequence(n_frames=4, frame_size=(64, 48),
                                        target=16, speed=0)
        write_sequence_dir(tmp_path / "data", "seq", frames, gt, tags=("SV",))
        rc = main(["analyze", "--dataset", str(tmp_path / "data"),
                   "--model", "vggm", "--out", str(tmp_path / "out"),
                   "--scales", "1", "--cg-iters", "30"])
        assert rc == 0
        for metric in ("success", "precision"):
            path = tmp_path / "out" / f"analysis_vggm_{metric}.csv"
            rows = list(csv.reader(path.read_text().splitlines()))
            assert len(rows[0]) == 1 + 7  # attribute column + 7 configs
            assert rows[-1][0] == "Overall"
            overall = [float(v) for v in rows[-1][1:]]
            assert all(0.0 <= v <= 1.0 for v in overall)
            sv_row = next(r for r in rows if r[0] == "SV")
            assert all(0.0 <= float(v) <= 1.0 for v in sv_row[1:])
