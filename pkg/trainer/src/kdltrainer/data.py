"""Reader for the evaluator's dataset CSV (its documented trainer format).

Each record carries the scenario constants followed by the 2K feature
values: user x-coordinates in ascending user index, then y-coordinates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import torch

from .physics import DTYPE, ScenarioConstants

CONSTANT_FIELDS = ["n_waveguides", "n_users", "pas_per_waveguide", "span_x",
                   "span_y", "pass_height", "carrier_freq",
                   "refractive_index", "max_power_w", "noise_power_w",
                   "min_spacing"]


@dataclass
class Dataset:
    constants: ScenarioConstants
    scenario_ids: list
    seeds: list
    users: torch.Tensor          # (B, K, 2)

    def __len__(self):
        return len(self.scenario_ids)

    @property
    def features(self) -> torch.Tensor:
        """(B, 2K) flat CSI sequence: x-coordinates then y-coordinates."""
        return torch.cat([self.users[:, :, 0], self.users[:, :, 1]], dim=1)


def load_dataset(path) -> Dataset:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if int(row["schema_version"]) != 1:
                raise ValueError("unsupported dataset schema version")
            rows.append(row)
    if not rows:
        raise ValueError("empty dataset")
    first = {c: float(rows[0][c]) for c in CONSTANT_FIELDS}
    for row in rows[1:]:
        for c in CONSTANT_FIELDS:
            if float(row[c]) != first[c]:
                raise ValueError("dataset mixes scenario constants; "
                                 "train on one parameter setting at a time")
    const = ScenarioConstants.from_record({**first,
                                           "max_power_w": first["max_power_w"],
                                           "noise_power_w": first["noise_power_w"]})
    k = const.n_users
    users = np.array([[[float(row[f"x_u_{i}"]), float(row[f"y_u_{i}"])]
                       for i in range(k)] for row in rows])
    return Dataset(constants=const,
                   scenario_ids=[row["scenario_id"] for row in rows],
                   seeds=[int(row["seed"]) for row in rows],
                   users=torch.as_tensor(users, dtype=DTYPE))
