"""Differentiable decode pipeline: raw parameters -> feasible (X, D) -> rate.

Re-implements, in torch and batched form, the same formulas the evaluator
uses: sigmoid range projection for the last-PA positions, the
simplex-with-floor projection for spacings, the line-of-sight effective
channels, the dual-form beam reconstruction, power normalization, and the
per-user SINR/rate.  Everything runs in float64 so the reported rates
match the evaluator to well below 1e-6 relative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

DTYPE = torch.float64
CDTYPE = torch.complex128
SPEED_OF_LIGHT = 3.0e8


@dataclass
class ScenarioConstants:
    """The physical constants shared by every record of a dataset."""

    n_users: int
    n_waveguides: int
    pas_per_waveguide: int
    span_x: float
    span_y: float
    pass_height: float
    carrier_freq: float
    refractive_index: float
    max_power: float
    noise_power: float
    min_spacing: float

    @classmethod
    def from_record(cls, rec: dict) -> "ScenarioConstants":
        return cls(n_users=int(rec["n_users"]),
                   n_waveguides=int(rec["n_waveguides"]),
                   pas_per_waveguide=int(rec["pas_per_waveguide"]),
                   span_x=float(rec["span_x"]),
                   span_y=float(rec["span_y"]),
                   pass_height=float(rec["pass_height"]),
                   carrier_freq=float(rec["carrier_freq"]),
                   refractive_index=float(rec["refractive_index"]),
                   max_power=float(rec["max_power_w"]),
                   noise_power=float(rec["noise_power_w"]),
                   min_spacing=float(rec["min_spacing"]))

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi * self.carrier_freq / SPEED_OF_LIGHT

    @property
    def path_gain_beta(self) -> float:
        return SPEED_OF_LIGHT / (4.0 * np.pi * self.carrier_freq)

    @property
    def pinch_amplitude(self) -> float:
        return float(np.sqrt(self.path_gain_beta / self.pas_per_waveguide))

    @property
    def waveguide_y(self) -> np.ndarray:
        lane = self.span_y / self.n_waveguides
        return (np.arange(self.n_waveguides) + 0.5) * lane


def project_x_end(raw: torch.Tensor, const: ScenarioConstants) -> torch.Tensor:
    lo = const.pas_per_waveguide * const.min_spacing
    return lo + torch.sigmoid(raw) * (const.span_x - lo)


def project_spacings(z: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    """Batched over (..., L): entries >= eps, rows sum to one.

    The clamp floor sits far above the softplus underflow point, so the
    ratio stays in [0, 1] and no branch ever produces the inf-gradient
    that a where()-based fallback would leak.
    """
    ll = z.shape[-1]
    total = z.sum(dim=-1, keepdim=True)
    frac = z / torch.clamp(total, min=1e-280)
    return eps[..., None] + (1.0 - ll * eps[..., None]) * frac


def decode_placement(x_end_raw: torch.Tensor, omega_raw: torch.Tensor,
                     const: ScenarioConstants):
    """Raw head outputs -> (x_end, spacings, positions), all feasible."""
    x_end = project_x_end(x_end_raw, const)             # (B, N)
    z = torch.nn.functional.softplus(omega_raw)         # (B, N, L)
    eps = const.min_spacing / x_end
    omega = x_end[..., None] * project_spacings(z, eps)
    positions = torch.cumsum(omega, dim=-1)
    return x_end, omega, positions


def effective_channels(positions: torch.Tensor, users: torch.Tensor,
                       const: ScenarioConstants) -> torch.Tensor:
    """(B, N, L) positions, (B, K, 2) users -> (B, N, K) channels h_tilde."""
    wy = torch.as_tensor(const.waveguide_y, dtype=DTYPE,
                         device=positions.device)
    dy = wy[None, None, :] - users[:, :, 1][:, :, None]          # (B, K, N)
    psi2 = dy**2 + const.pass_height**2
    dx = positions[:, None, :, :] - users[:, :, 0][:, :, None, None]
    r = torch.sqrt(dx**2 + psi2[..., None])                      # (B, K, N, L)
    theta = const.wavenumber * (r + const.refractive_index
                                * positions[:, None, :, :])
    coeff = const.pinch_amplitude * torch.exp(
        torch.complex(torch.zeros_like(theta), -theta)) / r.to(CDTYPE)
    # h_tilde[b, n, k] = conj(sum_l coeff[b, k, n, l])
    return coeff.sum(dim=-1).conj().permute(0, 2, 1)


def reconstruct_beam(h_tilde: torch.Tensor, lam: torch.Tensor,
                     mu: torch.Tensor) -> torch.Tensor:
    """(B, N, K), (B, K), (B, K) -> (B, N, K) pre-normalization beams."""
    b, n, k = h_tilde.shape
    eye = torch.eye(n, dtype=CDTYPE, device=h_tilde.device)[None]
    gram = torch.einsum("bnk,bk,bmk->bnm", h_tilde, lam.to(CDTYPE),
                        h_tilde.conj())
    sol = torch.linalg.solve(eye + gram, h_tilde)
    return sol * mu.to(CDTYPE)[:, None, :]


def normalize_power(beam: torch.Tensor, mu: torch.Tensor,
                    max_power: float) -> torch.Tensor:
    mu_n = mu * max_power / mu.sum(dim=-1, keepdim=True)
    d = beam * torch.sqrt(mu_n).to(CDTYPE)[:, None, :]
    total = torch.sum(torch.abs(d) ** 2, dim=(1, 2), keepdim=True)
    scale = torch.sqrt(max_power / torch.clamp(total, min=1e-300))
    return d * scale.to(CDTYPE)


def rates_from_beam(h_tilde: torch.Tensor, d: torch.Tensor,
                    noise_power: float) -> torch.Tensor:
    """(B, N, K) channels and beams -> (B, K) per-user rates."""
    gains = torch.einsum("bnk,bnj->bkj", h_tilde.conj(), d)
    powers = torch.abs(gains) ** 2
    signal = torch.diagonal(powers, dim1=1, dim2=2)
    interference = powers.sum(dim=2) - signal
    return torch.log2(1.0 + signal / (interference + noise_power))


def decode_and_rate(raw_slices, users: torch.Tensor,
                    const: ScenarioConstants):
    """Full pipeline from raw head slices to per-user rates.

    raw_slices = (x_end_raw (B,N), omega_raw (B,N,L), lam_raw (B,K),
    mu_raw (B,K)); returns (rates (B,K), positions, beams)."""
    x_end_raw, omega_raw, lam_raw, mu_raw = raw_slices
    _, _, positions = decode_placement(x_end_raw, omega_raw, const)
    lam = torch.nn.functional.softplus(lam_raw)
    mu = torch.nn.functional.softplus(mu_raw)
    h_tilde = effective_channels(positions, users, const)
    beam = reconstruct_beam(h_tilde, lam, mu)
    beam = normalize_power(beam, mu, const.max_power)
    rates = rates_from_beam(h_tilde, beam, const.noise_power)
    return rates, positions, beam
