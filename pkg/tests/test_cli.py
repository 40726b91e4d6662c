import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from lbdn import io
from lbdn.cli import main
from lbdn.sandwich import ExplicitWeights


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), (json.loads(err) if err.strip() else None)


@pytest.fixture
def model_path(tmp_path, capsys):
    path = tmp_path / "model.json"
    code, _, _ = run(capsys, "init", "--random", "--gamma", 3, "--width", 6, "--depth", 3, "--inputs", 2,
                     "--outputs", 2, "--seed", 1, "--out", path)
    assert code == 0
    return path


class TestCertify:
    def test_realized_model_passes(self, capsys, model_path):
        code, doc, _ = run(capsys, "certify", "--model", model_path)
        assert code == 0 and doc["psd"] is True and doc["format_version"] == io.FORMAT_VERSION
        assert doc["weighted_product"] <= 3.0 * (1 + 1e-8)

    def test_infeasible_weights_exit_one(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        io.save_weights(path, ExplicitWeights(gamma=1.0, W=[np.array([[2.0]]), np.array([[2.0]])],
                                              b=[np.zeros(1), np.zeros(1)], Lambda=[np.ones(1)]))
        code, doc, _ = run(capsys, "certify", "--model", path)
        assert code == 1 and doc["psd"] is False

    def test_export_then_certify_agrees(self, capsys, tmp_path, model_path):
        weights = tmp_path / "w.json"
        assert run(capsys, "export", "--model", model_path, "--out", weights)[0] == 0
        _, direct, _ = run(capsys, "certify", "--model", model_path)
        _, exported, _ = run(capsys, "certify", "--model", weights)
        assert direct["psd"] == exported["psd"] is True
        assert exported["source"] == "weights"
        assert exported["H_min_eig"] == pytest.approx(direct["H_min_eig"], abs=1e-12)

    def test_report_file(self, capsys, tmp_path, model_path):
        out = tmp_path / "report.json"
        run(capsys, "certify", "--model", model_path, "--out", out)
        assert json.loads(out.read_text())["psd"] is True


class TestRoundtrip:
    def test_exported_weights(self, capsys, tmp_path, model_path):
        weights = tmp_path / "w.json"
        run(capsys, "export", "--model", model_path, "--out", weights)
        recovered = tmp_path / "rec.json"
        code, doc, _ = run(capsys, "roundtrip", "--model", weights, "--out", recovered)
        assert code == 0 and doc["max_residual"] < 1e-7
        assert len(doc["layer_residuals"]) == 4
        _, cert, _ = run(capsys, "certify", "--model", recovered)
        assert cert["psd"] is True

    def test_linear_report_skips_large_norms(self, capsys, model_path):
        _, doc, _ = run(capsys, "roundtrip", "--model", model_path)
        for row in doc["linear"]:
            assert "skipped" in row or row["residual"] < 1e-8


class TestDeterminism:
    @pytest.mark.parametrize("argv", [
        ("lipest", "--restarts", 2, "--iters", 20, "--seed", 3),
        ("roundtrip", "--seed", 4),
        ("certify",),
        ("export",),
    ])
    def test_same_seed_same_output(self, capsys, model_path, argv):
        first = run(capsys, argv[0], "--model", model_path, *argv[1:])
        second = run(capsys, argv[0], "--model", model_path, *argv[1:])
        assert first == second

    def test_init_is_seeded(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for path in (a, b):
            run(capsys, "init", "--width", 4, "--depth", 2, "--seed", 9, "--out", path)
        assert a.read_text() == b.read_text()


class TestLipestAndFigures:
    def test_lipest_report(self, capsys, model_path):
        code, doc, _ = run(capsys, "lipest", "--model", model_path, "--restarts", 4, "--iters", 50)
        assert code == 0 and 0.0 <= doc["tightness"] <= 1.0
        assert doc["lower_bound"] <= 3.0 * (1 + 1e-6)
        assert len(doc["per_layer"]) == 4

    def test_figures(self, capsys, tmp_path, model_path):
        out = tmp_path / "figs"
        code, _, _ = run(capsys, "figures", "--model", model_path, "--model", model_path, "--restarts", 2,
                         "--iters", 10, "--out", out)
        assert code == 0
        rows = io.read_csv(out / "tightness.csv")
        assert len(rows) == 2 and {"tightness", "naive_product", "weighted_product"} <= set(rows[0])
        norms = io.read_csv(out / "layer_norms.csv")
        assert len(norms) == 8 and float(norms[0]["weighted_bound"]) <= np.sqrt(3.0) + 1e-8

    def test_small_fit(self, capsys, tmp_path):
        out = tmp_path / "fit.json"
        code, doc, _ = run(capsys, "fit", "--gamma", 2, "--width", 8, "--depth", 2, "--epochs", 3, "--restarts", 2,
                           "--iters", 10, "--out", out)
        assert code == 0 and out.exists()
        rows = io.read_csv(doc["metrics"])
        assert len(rows) == 3 and list(rows[0]) == list(io.METRIC_COLUMNS)
        assert 0.0 <= doc["final"]["tightness"] <= 1.0


class TestErrors:
    def test_unknown_flag(self, capsys, model_path):
        code, _, err = run(capsys, "certify", "--model", model_path, "--bogus")
        assert code == 2 and err["error"] == "UsageError"

    def test_missing_subcommand(self, capsys):
        assert run(capsys)[0] == 2

    def test_unreadable_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "certify", "--model", tmp_path / "missing.json")
        assert code == 3 and err["error"] == "FileNotFoundError"

    def test_version_mismatch(self, capsys, tmp_path, model_path):
        doc = json.loads(model_path.read_text())
        doc["format_version"] = "9.0"
        path = tmp_path / "future.json"
        path.write_text(json.dumps(doc))
        code, _, err = run(capsys, "certify", "--model", path)
        assert code == 3 and err["error"] == "FormatVersionError"

    def test_lipest_needs_model_document(self, capsys, tmp_path, model_path):
        weights = tmp_path / "w.json"
        run(capsys, "export", "--model", model_path, "--out", weights)
        code, _, err = run(capsys, "lipest", "--model", weights)
        assert code == 2 and "explicit weights" in err["message"]


@pytest.mark.skipif(shutil.which("lbdn") is None, reason="console script not installed")
def test_console_script(tmp_path):
    path = tmp_path / "m.json"
    subprocess.run(["lbdn", "init", "--width", "3", "--depth", "1", "--out", str(path)], check=True,
                   capture_output=True)
    proc = subprocess.run(["lbdn", "certify", "--model", str(path)], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["psd"] is True


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lbdn.cli", "nonsense"], capture_output=True, text=True)
    assert proc.returncode == 2 and json.loads(proc.stderr)["error"] == "UsageError"


@pytest.mark.slow
def test_full_fit_then_lipest(capsys, tmp_path):
    model = tmp_path / "sq10.json"
    code, doc, _ = run(capsys, "fit", "--gamma", 10, "--width", 86, "--depth", 8, "--epochs", 200, "--out", model)
    assert code == 0 and doc["final"]["test_mse"] < 0.05
    code, rep, _ = run(capsys, "lipest", "--model", model, "--no-per-layer")
    assert code == 0 and rep["tightness"] >= 0.85
    assert rep["lower_bound"] <= 10.0 * (1 + 1e-6)
