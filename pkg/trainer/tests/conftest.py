import os
import subprocess
import sys

import pytest

from kdltrainer import load_dataset


def generate_dataset(tmpdir, count, master_seed, n_users=2, pas=4):
    """Produce (scenario_json, dataset_csv) through the evaluator CLI."""
    scen = os.path.join(tmpdir, f"scen_{master_seed}.json")
    data = os.path.join(tmpdir, f"data_{master_seed}.csv")
    subprocess.run([sys.executable, "-m", "passopt.cli", "gen",
                    "--count", str(count), "--users", str(n_users),
                    "--pas", str(pas), "--master-seed", str(master_seed),
                    "-o", scen], check=True, capture_output=True)
    subprocess.run([sys.executable, "-m", "passopt.cli", "dataset", scen,
                    "-o", data], check=True, capture_output=True)
    return scen, data


@pytest.fixture(scope="session")
def toy_data(tmp_path_factory):
    tmpdir = tmp_path_factory.mktemp("toy")
    scen, data = generate_dataset(str(tmpdir), count=128, master_seed=77)
    return {"scenarios": scen, "dataset_path": data,
            "dataset": load_dataset(data)}
