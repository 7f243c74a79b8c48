"""Channel model: waveguide feed response, free-space user links, SINR/rate.

All functions are pure and deterministic.  The per-PA link to user k is a
line-of-sight spherical wavefront sqrt(beta) * exp(-i*kappa*r) / r, and the
in-waveguide feed-to-PA response adds the guided phase kappa * n_eff * x
with a 1/sqrt(L) amplitude split across the L PAs of a waveguide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Placement, Scenario, TransmitBeam


def pa_user_distances(scenario: Scenario, placement: Placement) -> np.ndarray:
    """(K, N, L) distances between every PA and every user."""
    x = placement.x[None, :, :]
    xu = scenario.user_positions[:, 0][:, None, None]
    psi = scenario.transverse_offsets[:, :, None]
    return np.sqrt((x - xu) ** 2 + psi**2)


def guided_response(scenario: Scenario, placement: Placement) -> np.ndarray:
    """Block-diagonal (M, N) feed-to-PA response; entry (n,l) of block n is
    exp(-i * kappa * n_eff * x[n,l]) / sqrt(L)."""
    n, l = scenario.n_waveguides, scenario.pas_per_waveguide
    phase = np.exp(-1j * scenario.wavenumber * scenario.refractive_index * placement.x)
    g = np.zeros((n * l, n), dtype=complex)
    for i in range(n):
        g[i * l:(i + 1) * l, i] = phase[i] / np.sqrt(l)
    return g


def user_channel(scenario: Scenario, placement: Placement, user: int) -> np.ndarray:
    """Conjugated channel row h_k^H as a flat (M,) vector, PA-major by waveguide."""
    r = pa_user_distances(scenario, placement)[user]
    if np.any(r <= 0.0):
        raise ValueError("user co-located with PA")
    amp = np.sqrt(scenario.path_gain_beta)
    return (amp * np.exp(-1j * scenario.wavenumber * r) / r).reshape(-1)


@dataclass
class EffectiveChannel:
    """Feed-level channels h_tilde (N, K) plus the geometry they came from.

    pinch_coeffs[k, n, l] = phi * exp(-i * theta) / r is the contribution of
    PA (n, l) to conj(h_tilde[n, k]); theta = kappa * (r + n_eff * x).
    """

    h_tilde: np.ndarray             # (N, K), column k is G^H h_k
    pa_positions: np.ndarray        # (N, L) placement this channel was built from
    distances: np.ndarray           # (K, N, L)
    transverse_offsets: np.ndarray  # (K, N)
    pinch_coeffs: np.ndarray        # (K, N, L)


def pinch_coefficients(scenario: Scenario, placement: Placement,
                       distances: np.ndarray | None = None) -> np.ndarray:
    """(K, N, L) per-PA effective coefficients phi * exp(-i theta) / r."""
    r = pa_user_distances(scenario, placement) if distances is None else distances
    theta = scenario.wavenumber * (r + scenario.refractive_index * placement.x[None, :, :])
    return scenario.pinch_amplitude * np.exp(-1j * theta) / r


def effective_channel(scenario: Scenario, placement: Placement) -> EffectiveChannel:
    """Compose user channels with the feed response: h_tilde_k = G^H h_k."""
    r = pa_user_distances(scenario, placement)
    if np.any(r <= 0.0):
        raise ValueError("user co-located with PA")
    u = pinch_coefficients(scenario, placement, r)
    h_tilde = np.conj(u).sum(axis=2).T
    return EffectiveChannel(h_tilde=h_tilde, pa_positions=placement.x.copy(),
                            distances=r,
                            transverse_offsets=scenario.transverse_offsets.copy(),
                            pinch_coeffs=u)


def crosslink_gains(eff: EffectiveChannel, beam: TransmitBeam) -> np.ndarray:
    """(K, K) matrix of h_tilde_k^H d_j: row k holds user k's received gains."""
    return eff.h_tilde.conj().T @ beam.d


@dataclass
class RateReport:
    sinr: np.ndarray             # (K,)
    rates: np.ndarray            # (K,) bits/s/Hz
    sum_rate: float
    effective_gain: np.ndarray   # (K,) desired-signal powers
    interference: np.ndarray     # (K, K) cross powers, diagonal = effective_gain


def sinr_and_rate(eff: EffectiveChannel, beam: TransmitBeam,
                  scenario: Scenario) -> RateReport:
    """Per-user SINR and rate.

    The signal/interference powers are also recomputed from the raw
    geometry double sum (beta/L) |sum exp(-i kappa (r + n_eff x)) / r * d|^2
    and must agree with the matrix form to 1e-10 relative.
    """
    gains = crosslink_gains(eff, beam)
    powers = np.abs(gains) ** 2
    signal = np.diag(powers).copy()
    interference = powers.sum(axis=1) - signal
    sinr = signal / (interference + scenario.noise_power)
    rates = np.log2(1.0 + sinr)

    kappa, neff = scenario.wavenumber, scenario.refractive_index
    r = eff.distances
    phase = np.exp(-1j * kappa * (r + neff * eff.pa_positions[None, :, :]))
    link_sum = np.einsum("knl,nj->kj", phase / r, beam.d)
    beta_over_l = scenario.path_gain_beta / scenario.pas_per_waveguide
    powers_direct = beta_over_l * np.abs(link_sum) ** 2
    # Tolerance scale: the squared sum of term magnitudes, so that links
    # cancelled down to rounding noise do not trip the check.
    amp = beta_over_l * np.einsum("knl,nj->kj", 1.0 / r, np.abs(beam.d)) ** 2
    scale = np.maximum(np.maximum(powers, powers_direct), amp * 1e-10)
    scale = np.maximum(scale, 1e-300)
    if np.any(np.abs(powers - powers_direct) > 1e-10 * scale):
        raise FloatingPointError("matrix and summation link powers disagree")

    return RateReport(sinr=sinr, rates=rates, sum_rate=float(rates.sum()),
                      effective_gain=signal, interference=powers)


def sum_rate(scenario: Scenario, placement: Placement, beam: TransmitBeam) -> float:
    return sinr_and_rate(effective_channel(scenario, placement), beam, scenario).sum_rate
