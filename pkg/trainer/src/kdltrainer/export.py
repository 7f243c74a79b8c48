"""Inference and interchange with the evaluator package.

Exports decoded (X, D) solutions in the evaluator's solution-file schema
and can invoke its `eval` CLI to score them, which is the parity contract
between the two implementations.
"""

from __future__ import annotations

import json
import subprocess
import sys
import time

import torch

from .data import Dataset
from .model import DualParameterTransformer
from .physics import decode_and_rate


def infer(model: DualParameterTransformer, data: Dataset,
          batch_size: int = 256):
    """Forward passes over a dataset; returns (rates (B, K), positions,
    beams, wall_ms_per_batch)."""
    rates, positions, beams = [], [], []
    timings = []
    with torch.no_grad():
        for i in range(0, len(data), batch_size):
            users = data.users[i:i + batch_size]
            z = torch.cat([users[:, :, 0], users[:, :, 1]], dim=1)
            start = time.perf_counter()
            raw = model(z)
            r, x, d = decode_and_rate(model.split_raw(raw), users,
                                      data.constants)
            timings.append((time.perf_counter() - start) * 1e3)
            rates.append(r)
            positions.append(x)
            beams.append(d)
    return (torch.cat(rates), torch.cat(positions), torch.cat(beams), timings)


def export_solutions(data: Dataset, positions: torch.Tensor,
                     beams: torch.Tensor, path) -> None:
    solutions = []
    for i, sid in enumerate(data.scenario_ids):
        d = beams[i].numpy()
        solutions.append({
            "kind": "placement_beam",
            "scenario_id": sid,
            "x": positions[i].numpy().tolist(),
            "d_re": d.real.tolist(),
            "d_im": d.imag.tolist(),
        })
    with open(path, "w") as fh:
        json.dump({"schema_version": 1, "solutions": solutions}, fh, indent=1)
        fh.write("\n")


def evaluate_with_primary(scenario_file, solution_file, output_csv) -> dict:
    """Score exported solutions with the evaluator CLI; returns
    {scenario_id: sum_rate}."""
    subprocess.run([sys.executable, "-m", "passopt.cli", "eval",
                    str(scenario_file), str(solution_file),
                    "-o", str(output_csv)],
                   check=True, capture_output=True, text=True)
    import csv

    out = {}
    with open(output_csv, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["error"]:
                raise RuntimeError(f"evaluator rejected {row['scenario_id']}: "
                                   f"{row['error']}")
            out[row["scenario_id"]] = float(row["sum_rate"])
    return out
