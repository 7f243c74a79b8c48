"""KKT-structured beam reconstruction from a handful of dual parameters.

At a stationary point of the weighted-MMSE problem with fixed placement the
precoder columns take the form
    d_k  proportional to  (I + sum_i lam_i h_i h_i^H)^{-1} h_k,
so a full (X, D) solution can be rebuilt from just K positive duals, K
power scalars, and a feasible placement.  The placement itself is encoded
as a last-PA position per waveguide plus positive spacings, pushed through
projections that enforce the range and minimum-spacing constraints by
construction.  dual_search demonstrates the pipeline with a derivative-free
cross-entropy search over the raw parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import effective_channel, sinr_and_rate
from .scenario import Placement, Scenario, TransmitBeam


@dataclass
class KktParams:
    """Decoded (feasible) reconstruction parameters."""

    lam: np.ndarray      # (K,) positive per-user duals
    mu: np.ndarray       # (K,) nonnegative power scalars
    x_end: np.ndarray    # (N,) last-PA position per waveguide
    omega: np.ndarray    # (N, L) spacings; omega[:, 0] is the feed offset


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def raw_param_dim(scenario: Scenario) -> int:
    k, n, l = scenario.n_users, scenario.n_waveguides, scenario.pas_per_waveguide
    return 2 * k + n + n * l


def reconstruct_beam(h_tilde: np.ndarray, lam: np.ndarray,
                     mu: np.ndarray) -> TransmitBeam:
    """d_k = mu_k (I + H diag(lam) H^H)^{-1} h_k, one factorization per call."""
    n = h_tilde.shape[0]
    a_mat = np.eye(n, dtype=complex) + (h_tilde * lam[None, :]) @ h_tilde.conj().T
    sol = np.linalg.solve(a_mat, h_tilde)
    return TransmitBeam(sol * mu[None, :])


def project_x_end(raw: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Squash raw values into (L * d_min, span_x)."""
    lo = scenario.pas_per_waveguide * scenario.min_spacing
    return lo + sigmoid(raw) * (scenario.span_x - lo)


def project_spacings(z: np.ndarray, eps: float) -> np.ndarray:
    """eps * 1 + (1 - L*eps) z / sum(z): entries >= eps, exact unit sum."""
    z = np.asarray(z, dtype=float)
    ll = z.size
    if not 0.0 < eps <= 1.0 / ll:
        raise ValueError("eps must lie in (0, 1/L]")
    total = z.sum()
    # subnormal totals would overflow the ratio; treat them as zero input
    tiny = np.finfo(float).tiny
    if total < max(abs(1.0 - ll * eps) * tiny * 4.0, tiny):
        z = np.full(ll, 1.0 / ll)
        total = 1.0
    return eps + (1.0 - ll * eps) / total * z


def spacings_to_placement(x_end: np.ndarray, omega_raw: np.ndarray,
                          scenario: Scenario) -> tuple[np.ndarray, Placement]:
    """Scale unit-sum spacings by x_end and accumulate into PA positions."""
    n, l = omega_raw.shape
    omega = np.empty_like(omega_raw)
    for i in range(n):
        omega[i] = x_end[i] * project_spacings(omega_raw[i],
                                               scenario.min_spacing / x_end[i])
    return omega, Placement(np.cumsum(omega, axis=1))


def normalize_power(beam: TransmitBeam, mu: np.ndarray,
                    max_power: float) -> tuple[TransmitBeam, np.ndarray]:
    """Share the budget across columns by mu, then rescale so the total
    transmit power equals the budget exactly.  An all-zero beam is returned
    unchanged (rate zero)."""
    mu_n = mu * max_power / mu.sum()
    d = beam.d * np.sqrt(mu_n)[None, :]
    total = np.sum(np.abs(d) ** 2)
    if total == 0.0:
        return TransmitBeam(d), mu_n
    return TransmitBeam(d * np.sqrt(max_power / total)), mu_n


def decode_raw_params(raw: np.ndarray, scenario: Scenario):
    """Raw vector [lam | mu | x_end | omega] -> feasible (params, X, D)."""
    k, n, l = scenario.n_users, scenario.n_waveguides, scenario.pas_per_waveguide
    raw = np.asarray(raw, dtype=float)
    if raw.size != raw_param_dim(scenario):
        raise ValueError("raw parameter vector has the wrong length")
    lam = softplus(raw[:k])
    mu = softplus(raw[k:2 * k])
    x_end = project_x_end(raw[2 * k:2 * k + n], scenario)
    omega_raw = softplus(raw[2 * k + n:]).reshape(n, l)
    omega, placement = spacings_to_placement(x_end, omega_raw, scenario)
    eff = effective_channel(scenario, placement)
    beam = reconstruct_beam(eff.h_tilde, lam, mu)
    beam, mu_n = normalize_power(beam, mu, scenario.max_power)
    params = KktParams(lam=lam, mu=mu_n, x_end=x_end, omega=omega)
    return params, placement, beam


@dataclass
class DualSearchResult:
    params: KktParams
    placement: Placement
    beam: TransmitBeam
    sum_rate: float
    evaluations: int
    best_trace: list    # best-so-far sum rate after each generation


def dual_search(scenario: Scenario, budget: int = 2000, seed: int = 0,
                population: int = 64, n_elite: int = 8,
                smoothing: float = 0.9) -> DualSearchResult:
    """Cross-entropy search over the raw reconstruction parameters.

    Deterministic per (scenario, seed); the decoded initial mean is always
    evaluated first, so the result can never fall below it.
    """
    if budget < 1:
        raise ValueError("budget must allow at least one evaluation")
    rng = np.random.Generator(np.random.Philox(seed))
    dim = raw_param_dim(scenario)
    mean = np.zeros(dim)
    std = np.ones(dim)

    def score(raw):
        params, placement, beam = decode_raw_params(raw, scenario)
        report = sinr_and_rate(effective_channel(scenario, placement), beam, scenario)
        return report.sum_rate, (params, placement, beam)

    best_rate, best_sol = score(mean)
    evals = 1
    best_trace = [best_rate]
    while evals < budget:
        draw = mean + std * rng.standard_normal((population, dim))
        m = min(population, budget - evals)
        rates = np.empty(m)
        sols = []
        for i in range(m):
            rates[i], sol = score(draw[i])
            sols.append(sol)
        evals += m
        top = int(np.argmax(rates))
        if rates[top] > best_rate:
            best_rate = float(rates[top])
            best_sol = sols[top]
        if m >= n_elite:
            elite = draw[np.argsort(rates)[::-1][:n_elite]]
            mean = smoothing * elite.mean(axis=0) + (1.0 - smoothing) * mean
            std = smoothing * np.sqrt(elite.var(axis=0) + 1e-12) \
                + (1.0 - smoothing) * std
        best_trace.append(best_rate)

    params, placement, beam = best_sol
    return DualSearchResult(params=params, placement=placement, beam=beam,
                            sum_rate=best_rate, evaluations=evals,
                            best_trace=best_trace)
