import json
import subprocess
import sys

import numpy as np
import pytest

from mlcluster import cli
from mlcluster.data import load_bundle_dir
from mlcluster.errors import NumericalError

FAST = ["--hidden", "16", "--max-steps", "100", "--restarts", "3", "--quiet"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    assert cli.main(["--quiet", "synth", "--n", "60", "--k", "3", "--s", "2", "--knn-k", "6", "--out", str(out)]) == 0
    return out


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestSynth:
    def test_table_scale_bundle(self, tmp_path, capsys):
        code, out, _ = run(capsys, "synth", "--n", 2000, "--k", 5, "--s", 4, "--d", 2, "--seed", 7, "--out", tmp_path)
        assert code == 0
        manifest = json.loads(out)
        assert manifest["m"] == 8 and manifest["s"] == 4 and manifest["n"] == 2000

    def test_small_bundle(self, tmp_path, capsys):
        code, _, _ = run(capsys, "synth", "--n", 100, "--k", 4, "--s", 3, "--d", 2, "--out", tmp_path)
        b = load_bundle_dir(tmp_path)
        assert code == 0 and b.features.shape == (100, 6) and b.k_true == 4

    def test_missing_out(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["synth", "--n", "10"])
        assert info.value.code == 2

    def test_degenerate_spec(self, tmp_path, capsys):
        code, _, err = run(capsys, "synth", "--n", 3, "--k", 4, "--out", tmp_path)
        assert code == 2 and "n_points" in err


class TestPipeline:
    @pytest.mark.parametrize("method", ["geometric", "arithmetic"])
    def test_writes_artifacts(self, dataset, tmp_path, capsys, method):
        code, _, _ = run(capsys, "pipeline", dataset, "--method", method, "--out", tmp_path, *FAST)
        assert code == 0
        report = json.loads((tmp_path / "metrics.json").read_text())
        assert set(report["metrics"]) == {"purity", "nmi", "ari", "n", "k_pred", "k_true"}
        assert report["k"] == 3 and report["settings"]["method"] == method
        for name in ("assignments.csv", "centers.csv", "model.json"):
            assert (tmp_path / name).exists()
        assert (tmp_path / "assignments.csv").read_text().startswith("node_index,cluster_id\n")

    def test_byte_identical_reruns(self, dataset, tmp_path, capsys):
        for name in ("a", "b"):
            assert run(capsys, "pipeline", dataset, "--seed", 5, "--out", tmp_path / name, *FAST)[0] == 0
        for name in ("metrics.json", "assignments.csv", "centers.csv", "model.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_generalization_report(self, dataset, tmp_path, capsys):
        code, _, _ = run(capsys, "pipeline", dataset, "--train-fraction", 0.7, "--repeats", 3, "--out", tmp_path, *FAST)
        assert code == 0
        summary = json.loads((tmp_path / "generalization.json").read_text())
        assert summary["repeats"] == 3 and len(summary["runs"]) == 3
        assert 0 <= summary["nmi_mean"] <= 1 and summary["nmi_std"] >= 0

    def test_config_file_and_override(self, dataset, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"method": "arithmetic", "max_steps": 20, "hidden": [8], "seed": 3}))
        code, _, _ = run(capsys, "pipeline", dataset, "--config", cfg, "--seed", 4, "--quiet", "--out", tmp_path / "o")
        settings = json.loads((tmp_path / "o" / "metrics.json").read_text())["settings"]
        assert code == 0
        assert settings["method"] == "arithmetic" and settings["max_steps"] == 20 and settings["seed"] == 4

    def test_unknown_config_key(self, dataset, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"learning_rate": 0.1}')
        code, _, err = run(capsys, "pipeline", dataset, "--config", cfg, "--out", tmp_path / "o")
        assert code == 2 and "learning_rate" in err

    def test_spectral_and_feature_graph(self, dataset, tmp_path, capsys):
        code, _, _ = run(capsys, "pipeline", dataset, "--clusterer", "spectral", "--graph", "features-knn",
                         "--knn-k", 5, "--export-aggregate", "--quiet", "--out", tmp_path)
        assert code == 0
        assert not (tmp_path / "model.json").exists()
        assert np.loadtxt(tmp_path / "aggregate.csv", delimiter=",").shape == (60, 60)

    def test_bad_fraction(self, dataset, tmp_path, capsys):
        assert run(capsys, "pipeline", dataset, "--train-fraction", 1.5, "--out", tmp_path)[0] == 2

    def test_unknown_flag(self, dataset, tmp_path):
        with pytest.raises(SystemExit) as info:
            cli.main(["pipeline", str(dataset), "--out", str(tmp_path), "--bogus"])
        assert info.value.code == 2

    def test_numerical_failure_exit_code(self, dataset, tmp_path, capsys, monkeypatch):
        def boom(*a, **k):
            raise NumericalError("diverged", step=3)

        monkeypatch.setattr(cli, "run_pipeline", boom)
        code, _, err = run(capsys, "pipeline", dataset, "--out", tmp_path, "--quiet")
        assert code == 1 and "diverged" in err

    def test_missing_dataset(self, tmp_path, capsys):
        assert run(capsys, "pipeline", tmp_path / "nope", "--out", tmp_path / "o")[0] == 2


@pytest.fixture(scope="module")
def trained(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert cli.main(["pipeline", str(dataset), "--out", str(out), *FAST]) == 0
    return out


class TestPredictEvaluate:
    def test_reproduces_training_assignments(self, dataset, trained, tmp_path, capsys):
        code, _, _ = run(capsys, "predict", "--model", trained / "model.json", "--centers", trained / "centers.csv",
                         "--features", dataset / "features.csv", "--out", tmp_path / "p.csv")
        assert code == 0
        assert (tmp_path / "p.csv").read_text() == (trained / "assignments.csv").read_text()

    def test_stdout_and_empty_input(self, trained, tmp_path, capsys):
        (tmp_path / "empty.csv").write_text("")
        code, out, _ = run(capsys, "predict", "--model", trained / "model.json", "--centers",
                           trained / "centers.csv", "--features", tmp_path / "empty.csv")
        assert code == 0 and out == "node_index,cluster_id\n"

    def test_dimension_mismatch(self, trained, tmp_path, capsys):
        (tmp_path / "x.csv").write_text("1,2,3\n")
        code, _, err = run(capsys, "predict", "--model", trained / "model.json", "--centers",
                           trained / "centers.csv", "--features", tmp_path / "x.csv")
        assert code == 2 and "M=4" in err

    def test_evaluate(self, tmp_path, capsys):
        (tmp_path / "p.csv").write_text("0\n0\n1\n1\n")
        (tmp_path / "t.csv").write_text("node_index,cluster_id\n0,0\n1,1\n2,0\n3,1\n")
        code, out, _ = run(capsys, "evaluate", tmp_path / "p.csv", tmp_path / "t.csv")
        assert code == 0 and json.loads(out)["ari"] == pytest.approx(-0.5, abs=1e-12)
        code, out, _ = run(capsys, "evaluate", tmp_path / "p.csv", tmp_path / "p.csv")
        report = json.loads(out)
        assert report["purity"] == report["nmi"] == report["ari"] == 1.0

    def test_evaluate_length_mismatch(self, tmp_path, capsys):
        (tmp_path / "p.csv").write_text("0\n1\n")
        (tmp_path / "t.csv").write_text("0\n1\n1\n")
        assert run(capsys, "evaluate", tmp_path / "p.csv", tmp_path / "t.csv")[0] == 2


@pytest.mark.parametrize("command", ["synth", "pipeline", "predict", "evaluate"])
def test_help_lists_flags(command):
    out = subprocess.run([sys.executable, "-m", "mlcluster.cli", command, "--help"],
                         capture_output=True, text=True, check=True).stdout
    parser = cli.build_parser()
    sub = parser._subparsers._group_actions[0].choices[command]
    for action in sub._actions:
        for opt in action.option_strings:
            assert opt in out
