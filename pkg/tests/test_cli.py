"""End-to-end command-line exercises on small datasets."""

import csv
import json
import subprocess

import pytest

from loct.cli import main
from loct.synth import make_two_gaussians, save_csv

from lp_reader import parse_lp


@pytest.fixture
def blob_csv(tmp_path):
    data = make_two_gaussians(n=16, p=2, separation=6.0, seed=3)
    path = tmp_path / "blobs.csv"
    save_csv(data, str(path))
    return str(path)


def train_args(blob_csv, out_dir, *extra):
    return ["train", "--data", blob_csv, "--depth", "1", "--C", "1",
            "--time-limit", "60", "--out", str(out_dir), *extra]


@pytest.fixture
def trained(blob_csv, tmp_path):
    out = tmp_path / "run"
    assert main(train_args(blob_csv, out)) == 0
    return {
        "model": str(out / "model.json"),
        "report": str(out / "report.json"),
        "data": blob_csv,
    }


class TestTrain:
    def test_writes_model_and_report(self, trained, capsys):
        with open(trained["report"]) as fh:
            report = json.load(fh)
        assert report["big_m"] == 100.0
        assert report["epsilon"] == 1e-5
        assert report["depth"] == 1
        assert report["loss_kind"] == "logistic_pwl"
        assert report["standardized"] is True
        assert report["mip_status"] == "optimal"
        assert report["routing_mismatches"] == 0
        with open(trained["model"]) as fh:
            model = json.load(fh)
        assert model["depth"] == 1
        assert len(model["nodes"]) == 1
        assert len(model["nodes"][0]["weights"]) == 2

    def test_flags_reach_the_report(self, blob_csv, tmp_path):
        out = tmp_path / "run2"
        args = train_args(blob_csv, out, "--no-standardize", "--no-refine",
                          "--big-m", "50", "--epsilon", "1e-4", "--reg", "none")
        assert main(args) == 0
        with open(out / "report.json") as fh:
            report = json.load(fh)
        assert report["standardized"] is False
        assert report["big_m"] == 50.0
        assert report["epsilon"] == 1e-4
        assert report["reg_kind"] == "none"

    def test_misclass_with_l1(self, blob_csv, tmp_path):
        out = tmp_path / "mis"
        args = train_args(blob_csv, out, "--loss", "misclass")
        assert main(args) == 0
        with open(out / "report.json") as fh:
            report = json.load(fh)
        assert report["loss_kind"] == "misclassification"
        assert report["mip_status"] == "optimal"

    def test_depth_zero_is_a_usage_error(self, blob_csv, tmp_path, capsys):
        args = ["train", "--data", blob_csv, "--depth", "0",
                "--out", str(tmp_path)]
        assert main(args) == 2
        assert "usage error" in capsys.readouterr().err

    def test_bad_flag_combinations(self, blob_csv, tmp_path):
        base = ["train", "--data", blob_csv, "--out", str(tmp_path)]
        bad = [
            ["--depth", "1", "--loss", "hinge", "--tangents", "v1"],
            ["--depth", "1", "--loss", "misclass", "--C", "1,2"],
            ["--depth", "1", "--reg", "hfs"],
            ["--depth", "1", "--reg", "sfs"],
            ["--depth", "1", "--reg", "l1", "--alpha", "0.5"],
            ["--depth", "1", "--C", "a,b"],
            ["--depth", "2", "--C", "1,2,3"],
        ]
        for extra in bad:
            assert main(base + extra) == 2, extra

    def test_missing_data_file(self, tmp_path):
        args = ["train", "--data", str(tmp_path / "nope.csv"), "--depth", "1",
                "--out", str(tmp_path)]
        assert main(args) == 1

    def test_unknown_synth_name(self, tmp_path):
        args = ["train", "--data", "synth:iris", "--depth", "1",
                "--out", str(tmp_path)]
        assert main(args) == 1


class TestPredictEvaluate:
    def test_predict_round_trip(self, trained, tmp_path):
        out = tmp_path / "pred.csv"
        args = ["predict", "--model", trained["model"],
                "--data", trained["data"], "--out", str(out)]
        assert main(args) == 0
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["row", "label", "probability", "path", "conf_1"]
        assert len(rows) == 17
        labels = {r[1] for r in rows[1:]}
        assert labels <= {"-1", "1"}
        for r in rows[1:]:
            assert 0.0 <= float(r[2]) <= 1.0
            assert r[3] == "0"

    def test_evaluate_to_stdout(self, trained, capsys):
        args = ["evaluate", "--model", trained["model"],
                "--data", trained["data"]]
        assert main(args) == 0
        doc = json.loads(capsys.readouterr().out)
        # well-separated blobs solved to optimality classify perfectly
        assert doc["bacc"] == 1.0
        assert doc["n"] == 16
        assert doc["tp"] + doc["tn"] == 16
        assert doc["sparsity"] <= 2.0

    def test_evaluate_to_file(self, trained, tmp_path):
        out = tmp_path / "metrics.json"
        args = ["evaluate", "--model", trained["model"],
                "--data", trained["data"], "--out", str(out)]
        assert main(args) == 0
        with open(out) as fh:
            doc = json.load(fh)
        assert set(doc) == {"bacc", "tp", "tn", "fp", "fn", "n", "sparsity"}

    def test_evaluate_on_synth_reference(self, trained, capsys):
        # a p=2 model applies to the synthetic xor set; accuracy is
        # whatever it is, the point is the synth: path decodes
        args = ["evaluate", "--model", trained["model"], "--data", "synth:xor"]
        assert main(args) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["n"] == 40

    def test_feature_width_mismatch(self, trained, tmp_path):
        wide = make_two_gaussians(n=8, p=5, seed=0)
        path = tmp_path / "wide.csv"
        save_csv(wide, str(path))
        args = ["evaluate", "--model", trained["model"], "--data", str(path)]
        assert main(args) == 1


class TestExportLp:
    def test_export_matches_printed_size(self, blob_csv, tmp_path, capsys):
        out = tmp_path / "model.lp"
        args = ["export-lp", "--data", blob_csv, "--depth", "1",
            "--out", str(out)]
        assert main(args) == 0
        msg = capsys.readouterr().out
        assert "LP written to" in msg
        rows = int(msg.split("(")[1].split(" rows")[0])
        cols = int(msg.split(", ")[1].split(" columns")[0])
        parsed = parse_lp(str(out))
        assert len(parsed.constraints) == rows
        assert len(parsed.variables) == cols
        # width: n z-binaries + 3p weights + 1 bias + n slacks at depth 1
        assert cols == 16 + 3 * 2 + 1 + 16


class TestCv:
    def test_grid_search_outputs(self, blob_csv, tmp_path):
        out = tmp_path / "cv"
        args = ["cv", "--data", blob_csv, "--depth", "1", "--time-limit", "20",
                "--grid-c", "0.1,1", "--folds", "2", "--out", str(out)]
        assert main(args) == 0
        with open(out / "best_config.json") as fh:
            best = json.load(fh)
        assert best["depth"] == 1
        assert best["folds"] == 2
        assert best["slack_costs"] in ([0.1], [1.0])
        with open(out / "cv_table.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["grid_index", "params", "fold", "bacc", "time_s"]
        assert len(rows) == 1 + 2 * 2
        for r in rows[1:]:
            assert 0.0 <= float(r[3]) <= 1.0

    def test_cv_without_grid_is_a_usage_error(self, blob_csv, tmp_path):
        args = ["cv", "--data", blob_csv, "--depth", "1", "--out", str(tmp_path)]
        assert main(args) == 2


class TestBenchmark:
    def test_two_config_run(self, blob_csv, tmp_path):
        configs = tmp_path / "configs.json"
        configs.write_text(json.dumps([
            {"name": "pwl_d1", "depth": 1, "loss": "logistic", "C": 1.0},
            {"name": "mis_d1", "depth": 1, "loss": "misclass", "C": 1.0},
        ]))
        out = tmp_path / "bench"
        args = ["benchmark", "--datasets", blob_csv, "--configs", str(configs),
                "--seeds", "0", "--test-fraction", "0.25",
                "--time-limit", "60", "--out-dir", str(out)]
        assert main(args) == 0
        with open(out / "results.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 3
        assert {r[2] for r in rows[1:]} == {"pwl_d1", "mis_d1"}
        assert all(r[0] == "blobs" for r in rows[1:])
        assert (out / "profiles.csv").exists()
        assert (out / "gap_curves.csv").exists()

    def test_configs_need_unique_names(self, blob_csv, tmp_path):
        configs = tmp_path / "configs.json"
        configs.write_text(json.dumps([
            {"name": "a", "depth": 1}, {"name": "a", "depth": 1},
        ]))
        args = ["benchmark", "--datasets", blob_csv, "--configs", str(configs),
                "--out-dir", str(tmp_path / "b")]
        assert main(args) == 2

    def test_empty_datasets_rejected(self, tmp_path):
        configs = tmp_path / "configs.json"
        configs.write_text(json.dumps([{"name": "a", "depth": 1}]))
        args = ["benchmark", "--datasets", " , ", "--configs", str(configs),
                "--out-dir", str(tmp_path / "b")]
        assert main(args) == 2


class TestEntryPoint:
    def test_console_script_help(self):
        proc = subprocess.run(["loct", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "train" in proc.stdout and "benchmark" in proc.stdout

    def test_subcommand_required(self):
        proc = subprocess.run(["loct"], capture_output=True, text=True)
        assert proc.returncode == 2
