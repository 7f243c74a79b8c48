"""Scenario generation and all on-disk formats.

Formats (all self-describing with a schema_version field):
  * scenario sets: JSON, one record per scenario with every physical
    constant inlined plus the drawn user positions;
  * results: flat CSV, one RunRecord per row, floats written with repr()
    so reruns are byte-identical;
  * trainer datasets: flat CSV, per record the scenario constants followed
    by the user x-coordinates in ascending user index and then the
    y-coordinates;
  * solution interchange: JSON holding either an explicit (X, D) pair or
    raw/decoded reconstruction parameters.

Randomness: user positions are drawn from numpy's counter-based Philox
generator.  The per-scenario seed is the first 8 bytes of
sha256("<master_seed>:<index>"), so regeneration is order-independent.
Draw order: all x-coordinates, then all y-coordinates.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .scenario import (Placement, Scenario, TransmitBeam, dbm_to_watts,
                       default_waveguide_y)

SCHEMA_VERSION = 1

VALID_METHODS = ("mmpdd", "kdl_search", "fd_mimo", "uniform", "oracle",
                 "transformer")


def subseed(master_seed: int, index: int) -> int:
    digest = hashlib.sha256(f"{master_seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def scenario_user_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


DEFAULT_PARAMS = {
    "n_users": 2,
    "pas_per_waveguide": 8,
    "span_x": 20.0,
    "span_y": 10.0,
    "pass_height": 2.5,
    "carrier_freq": 30e9,
    "refractive_index": 1.4,
    "max_power_dbm": 10.0,
    "noise_power_dbm": -90.0,
    "min_spacing": None,        # None -> half a wavelength
    "beta_convention": "paper_linear",
}


def gen_scenarios(count: int, params: dict | None = None,
                  master_seed: int = 0) -> dict:
    """Scenario-set payload with `count` i.i.d. uniform user draws."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    merged = dict(DEFAULT_PARAMS)
    merged.update(params or {})
    unknown = set(merged) - set(DEFAULT_PARAMS)
    if unknown:
        raise ValueError(f"unknown scenario parameters: {sorted(unknown)}")
    if int(merged["n_users"]) < 1:
        raise ValueError("n_users must be at least 1")
    if int(merged["pas_per_waveguide"]) < 1:
        raise ValueError("pas_per_waveguide must be at least 1")
    if merged["carrier_freq"] <= 0:
        raise ValueError("carrier_freq must be positive")
    if merged["min_spacing"] is None:
        merged["min_spacing"] = 0.5 * 3.0e8 / merged["carrier_freq"]

    records = []
    for i in range(count):
        seed = subseed(master_seed, i)
        rng = scenario_user_rng(seed)
        k = int(merged["n_users"])
        xs = rng.uniform(0.0, merged["span_x"], k)
        ys = rng.uniform(0.0, merged["span_y"], k)
        rec = {
            "id": f"s{i:04d}",
            "seed": seed,
            "n_waveguides": k,
            "n_users": k,
            "pas_per_waveguide": int(merged["pas_per_waveguide"]),
            "span_x": float(merged["span_x"]),
            "span_y": float(merged["span_y"]),
            "pass_height": float(merged["pass_height"]),
            "carrier_freq": float(merged["carrier_freq"]),
            "refractive_index": float(merged["refractive_index"]),
            "max_power_w": dbm_to_watts(float(merged["max_power_dbm"])),
            "noise_power_w": dbm_to_watts(float(merged["noise_power_dbm"])),
            "min_spacing": float(merged["min_spacing"]),
            "beta_convention": merged["beta_convention"],
            "waveguide_y": default_waveguide_y(k, merged["span_y"]).tolist(),
            "users": np.stack([xs, ys], axis=1).tolist(),
        }
        # Validate eagerly so bad parameters are rejected at generation time.
        record_to_scenario(rec)
        records.append(rec)
    return {"schema_version": SCHEMA_VERSION, "master_seed": master_seed,
            "params": merged, "scenarios": records}


def record_to_scenario(rec: dict) -> Scenario:
    return Scenario(
        n_waveguides=int(rec["n_waveguides"]),
        n_users=int(rec["n_users"]),
        pas_per_waveguide=int(rec["pas_per_waveguide"]),
        span_x=float(rec["span_x"]),
        span_y=float(rec["span_y"]),
        pass_height=float(rec["pass_height"]),
        carrier_freq=float(rec["carrier_freq"]),
        refractive_index=float(rec["refractive_index"]),
        max_power=float(rec["max_power_w"]),
        noise_power=float(rec["noise_power_w"]),
        min_spacing=float(rec["min_spacing"]),
        waveguide_y=np.array(rec["waveguide_y"], dtype=float),
        user_positions=np.array(rec["users"], dtype=float),
        beta_convention=rec.get("beta_convention", "paper_linear"),
    )


def write_json(payload: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version!r}")
    return payload


# -- run records ------------------------------------------------------------

@dataclass
class RunRecord:
    scenario_id: str
    seed: int
    method: str
    sum_rate: float
    per_user_rates: list
    wall_time_s: float
    converged: bool
    residual_inf: float
    iterations: int
    error: str = ""

    def __post_init__(self):
        if self.method not in VALID_METHODS:
            raise ValueError(f"unknown method {self.method!r}")


RECORD_FIELDS = ["scenario_id", "seed", "method", "sum_rate", "per_user_rates",
                 "wall_time_s", "converged", "residual_inf", "iterations",
                 "error"]


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_FIELDS)
        for rec in records:
            writer.writerow([
                rec.scenario_id, rec.seed, rec.method, repr(float(rec.sum_rate)),
                ";".join(repr(float(r)) for r in rec.per_user_rates),
                repr(float(rec.wall_time_s)), int(rec.converged),
                repr(float(rec.residual_inf)), rec.iterations, rec.error,
            ])


def read_records_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORD_FIELDS:
            raise ValueError(f"unexpected results schema in {path}")
        for row in reader:
            rates = [float(x) for x in row["per_user_rates"].split(";") if x]
            out.append(RunRecord(
                scenario_id=row["scenario_id"], seed=int(row["seed"]),
                method=row["method"], sum_rate=float(row["sum_rate"]),
                per_user_rates=rates, wall_time_s=float(row["wall_time_s"]),
                converged=bool(int(row["converged"])),
                residual_inf=float(row["residual_inf"]),
                iterations=int(row["iterations"]), error=row["error"]))
    return out


# -- trainer dataset ---------------------------------------------------------

DATASET_CONSTANTS = ["n_waveguides", "n_users", "pas_per_waveguide", "span_x",
                     "span_y", "pass_height", "carrier_freq",
                     "refractive_index", "max_power_w", "noise_power_w",
                     "min_spacing"]


def write_dataset_csv(payload: dict, path) -> None:
    """Flat per-scenario feature records for the learning component."""
    records = payload["scenarios"]
    if not records:
        header = ["schema_version", "scenario_id", "seed"] + DATASET_CONSTANTS
    else:
        k = records[0]["n_users"]
        header = (["schema_version", "scenario_id", "seed"] + DATASET_CONSTANTS
                  + [f"x_u_{i}" for i in range(k)]
                  + [f"y_u_{i}" for i in range(k)])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in records:
            users = np.array(rec["users"], dtype=float)
            row = [SCHEMA_VERSION, rec["id"], rec["seed"]]
            row += [repr(float(rec[c])) for c in DATASET_CONSTANTS]
            row += [repr(float(x)) for x in users[:, 0]]
            row += [repr(float(y)) for y in users[:, 1]]
            writer.writerow(row)


def read_dataset_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if int(row["schema_version"]) != SCHEMA_VERSION:
                raise ValueError("unsupported dataset schema version")
            k = int(float(row["n_users"]))
            rec = {c: float(row[c]) for c in DATASET_CONSTANTS}
            rec["id"] = row["scenario_id"]
            rec["seed"] = int(row["seed"])
            rec["users"] = [[float(row[f"x_u_{i}"]), float(row[f"y_u_{i}"])]
                            for i in range(k)]
            out.append(rec)
    return out


def dataset_record_to_scenario(rec: dict) -> Scenario:
    k = int(rec["n_users"])
    full = dict(rec)
    full.setdefault("waveguide_y",
                    default_waveguide_y(k, rec["span_y"]).tolist())
    full.setdefault("beta_convention", "paper_linear")
    return record_to_scenario(full)


# -- solution interchange ----------------------------------------------------

def solution_from_placement_beam(scenario_id: str, placement: Placement,
                                 beam: TransmitBeam) -> dict:
    return {"kind": "placement_beam", "scenario_id": scenario_id,
            "x": placement.x.tolist(),
            "d_re": beam.d.real.tolist(), "d_im": beam.d.imag.tolist()}


def solution_from_raw_params(scenario_id: str, raw: np.ndarray,
                             n_users: int, n_waveguides: int,
                             pas_per_waveguide: int) -> dict:
    raw = np.asarray(raw, dtype=float)
    k, n, l = n_users, n_waveguides, pas_per_waveguide
    return {"kind": "kkt_params", "raw": True, "scenario_id": scenario_id,
            "lambda_raw": raw[:k].tolist(),
            "mu_raw": raw[k:2 * k].tolist(),
            "x_end_raw": raw[2 * k:2 * k + n].tolist(),
            "omega_raw": raw[2 * k + n:].reshape(n, l).tolist()}


def write_solutions(solutions: list, path) -> None:
    write_json({"schema_version": SCHEMA_VERSION, "solutions": solutions}, path)


def read_solutions(path) -> list:
    payload = read_json(path)
    if "solutions" in payload:
        return payload["solutions"]
    return [payload]


def solution_to_placement_beam(sol: dict, scenario: Scenario):
    """Decode one interchange entry into a concrete (Placement, TransmitBeam)."""
    from .kktdual import (decode_raw_params, normalize_power, reconstruct_beam)
    from .channel import effective_channel

    kind = sol.get("kind")
    if kind == "placement_beam":
        placement = Placement(np.array(sol["x"], dtype=float))
        d = np.array(sol["d_re"], dtype=float) + 1j * np.array(sol["d_im"], dtype=float)
        return placement, TransmitBeam(d)
    if kind == "kkt_params":
        if sol.get("raw", False):
            raw = np.concatenate([
                np.asarray(sol["lambda_raw"], dtype=float),
                np.asarray(sol["mu_raw"], dtype=float),
                np.asarray(sol["x_end_raw"], dtype=float),
                np.asarray(sol["omega_raw"], dtype=float).reshape(-1),
            ])
            _, placement, beam = decode_raw_params(raw, scenario)
            return placement, beam
        lam = np.asarray(sol["lambda"], dtype=float)
        mu = np.asarray(sol["mu"], dtype=float)
        omega = np.asarray(sol["omega"], dtype=float)
        placement = Placement(np.cumsum(omega, axis=1))
        eff = effective_channel(scenario, placement)
        beam = reconstruct_beam(eff.h_tilde, lam, mu)
        beam, _ = normalize_power(beam, mu, scenario.max_power)
        return placement, beam
    raise ValueError(f"unknown solution kind {kind!r}")
