"""Weighted-MMSE quantities for the sum-rate problem.

The sum-rate maximization is equivalent to minimizing
sum_k (alpha_k e_k - log2 alpha_k) over the beamformers, the scalar
equalizers v_k and the positive weights alpha_k.  With v and alpha at their
per-user optima the objective collapses to K - sum_rate, which is the main
identity the tests lean on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import EffectiveChannel, crosslink_gains
from .scenario import Scenario, TransmitBeam


@dataclass
class WmmseState:
    v: np.ndarray        # (K,) complex equalizers
    alpha: np.ndarray    # (K,) positive weights
    e: np.ndarray        # (K,) MSE values at (v, current beam)
    j_cov: np.ndarray    # (K,) received-signal covariances


def received_covariances(gains: np.ndarray, noise_power: float) -> np.ndarray:
    """J_k = sum_j |h_k^H d_j|^2 + sigma^2 from the (K, K) gain matrix."""
    return np.sum(np.abs(gains) ** 2, axis=1) + noise_power


def mse_from_gains(gains_row: np.ndarray, v: complex, noise_power: float,
                   user: int) -> float:
    """MSE of one user given its row of crosslink gains and equalizer v."""
    j = np.sum(np.abs(gains_row) ** 2) + noise_power
    return float(np.abs(v) ** 2 * j + 1.0 - 2.0 * np.real(v * gains_row[user]))


def mse(eff: EffectiveChannel, beam: TransmitBeam, v: complex,
        scenario: Scenario, user: int) -> float:
    gains = crosslink_gains(eff, beam)
    return mse_from_gains(gains[user], v, scenario.noise_power, user)


def optimal_equalizer(eff: EffectiveChannel, beam: TransmitBeam,
                      scenario: Scenario, user: int) -> complex:
    """Scalar MMSE receiver v_k = conj(h_k^H d_k) / J_k."""
    gains = crosslink_gains(eff, beam)
    j = np.sum(np.abs(gains[user]) ** 2) + scenario.noise_power
    return complex(np.conj(gains[user, user]) / j)


def optimal_weight(eff: EffectiveChannel, beam: TransmitBeam,
                   scenario: Scenario, user: int) -> float:
    """alpha_k = 1 / e_k at the MMSE receiver, which equals 1 + SINR_k."""
    gains = crosslink_gains(eff, beam)
    j = np.sum(np.abs(gains[user]) ** 2) + scenario.noise_power
    e_min = 1.0 - np.abs(gains[user, user]) ** 2 / j
    if e_min <= 0.0:
        raise ValueError("nonpositive minimum MSE; channel state is corrupt")
    return float(1.0 / e_min)


def equalizers_from_gains(gains: np.ndarray, noise_power: float):
    """Vectorized (v, alpha, e, J) at the MMSE point for a (K, K) gain matrix."""
    j = received_covariances(gains, noise_power)
    diag = np.diag(gains)
    v = np.conj(diag) / j
    e = 1.0 - np.abs(diag) ** 2 / j
    if np.any(e <= 0.0):
        raise ValueError("nonpositive minimum MSE; channel state is corrupt")
    alpha = 1.0 / e
    return v, alpha, e, j


def build_wmmse_state(eff: EffectiveChannel, beam: TransmitBeam,
                      scenario: Scenario) -> WmmseState:
    gains = crosslink_gains(eff, beam)
    v, alpha, e, j = equalizers_from_gains(gains, scenario.noise_power)
    return WmmseState(v=v, alpha=alpha, e=e, j_cov=j)


def wmmse_objective(eff: EffectiveChannel, beam: TransmitBeam,
                    scenario: Scenario, state: WmmseState) -> float:
    """sum_k (alpha_k e_k(beam, v_k) - log2 alpha_k), with e_k recomputed
    from the current beam (the stored state.e may be stale)."""
    gains = crosslink_gains(eff, beam)
    total = 0.0
    for k in range(gains.shape[0]):
        e_k = mse_from_gains(gains[k], state.v[k], scenario.noise_power, k)
        total += state.alpha[k] * e_k - np.log2(state.alpha[k])
    return float(total)


def objective_from_gains(gains: np.ndarray, v: np.ndarray, alpha: np.ndarray,
                         noise_power: float) -> float:
    """Same objective evaluated directly on a (K, K) gain matrix."""
    j = received_covariances(gains, noise_power)
    diag = np.diag(gains)
    e = np.abs(v) ** 2 * j + 1.0 - 2.0 * np.real(v * diag)
    return float(np.sum(alpha * e - np.log2(alpha)))
