import json
import os
import subprocess
import sys


def _cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "kdltrainer.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


def test_cli_train_infer_parity(toy_data, tmp_path):
    model = tmp_path / "model.pt"
    curve = tmp_path / "curve.csv"
    out = _cli("train", toy_data["dataset_path"], "-o", str(model),
               "--curve", str(curve), "--steps", "8", "--batch", "16",
               "--n-model", "32", "--n-heads", "2", "--seed", "3")
    assert out.returncode == 0, out.stderr
    assert "mean sum rate" in out.stdout
    assert model.exists()
    assert curve.read_text().startswith("step,loss")

    solutions = tmp_path / "sols.json"
    out = _cli("infer", str(model), toy_data["dataset_path"],
               "-o", str(solutions))
    assert out.returncode == 0, out.stderr
    assert "ms/batch" in out.stdout
    payload = json.loads(solutions.read_text())
    assert payload["schema_version"] == 1
    assert len(payload["solutions"]) == 128
    assert payload["solutions"][0]["kind"] == "placement_beam"

    out = _cli("parity", str(model), toy_data["dataset_path"],
               toy_data["scenarios"],
               "--solutions", str(tmp_path / "psol.json"),
               "--eval-csv", str(tmp_path / "pe.csv"))
    assert out.returncode == 0, out.stderr
    assert "worst relative difference" in out.stdout


def test_cli_transposed_orientation(toy_data, tmp_path):
    model = tmp_path / "model_t.pt"
    out = _cli("train", toy_data["dataset_path"], "-o", str(model),
               "--steps", "3", "--batch", "8", "--n-model", "32",
               "--n-heads", "2", "--orientation", "transposed")
    assert out.returncode == 0, out.stderr


def test_cli_bad_dataset(tmp_path):
    bad = tmp_path / "nope.csv"
    out = _cli("train", str(bad), "-o", str(tmp_path / "m.pt"))
    assert out.returncode == 2
