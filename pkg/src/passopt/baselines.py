"""Reference solutions: fully digital WMMSE at the origin, uniform PA
placement, and exhaustive grid oracles for small instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import effective_channel, sinr_and_rate
from .numerics import quad_ball_precoder
from .scenario import Placement, Scenario, TransmitBeam
from .wmmse import equalizers_from_gains


def wmmse_precoder(h_cols: np.ndarray, max_power: float, noise_power: float,
                   tol: float = 1e-8, max_iter: int = 500,
                   return_eta: bool = False):
    """Alternating WMMSE for fixed channels (column k of h_cols serves user k).

    Records the objective once per iteration, right after the equalizer and
    weight refresh; that sampling makes the trace provably non-increasing.
    Returns (D, objective_trace, iterations), plus the final power-ball
    multiplier when return_eta is set.
    """
    nt, k = h_cols.shape
    reg = k * noise_power / max_power
    d = h_cols @ np.linalg.inv(h_cols.conj().T @ h_cols + reg * np.eye(k))
    d *= np.sqrt(max_power / np.sum(np.abs(d) ** 2))

    trace = []
    eta = 0.0
    for it in range(1, max_iter + 1):
        gains = h_cols.conj().T @ d
        v, alpha, e, _ = equalizers_from_gains(gains, noise_power)
        obj = float(k + np.sum(np.log2(e)))
        trace.append(obj)
        if len(trace) > 1 and abs(trace[-2] - obj) <= tol * max(1.0, abs(trace[-2])):
            break
        weights = alpha * np.abs(v) ** 2
        g_mat = (h_cols * weights[None, :]) @ h_cols.conj().T
        m_mat = h_cols * (alpha * np.conj(v))[None, :]
        d, eta = quad_ball_precoder(g_mat, m_mat, max_power)
    if return_eta:
        return d, trace, it, eta
    return d, trace, it


def _rates_from_gains(gains: np.ndarray, noise_power: float):
    powers = np.abs(gains) ** 2
    signal = np.diag(powers).copy()
    interference = powers.sum(axis=1) - signal
    rates = np.log2(1.0 + signal / (interference + noise_power))
    return rates


@dataclass
class BaselineResult:
    placement: Placement | None
    beam: TransmitBeam
    sum_rate: float
    per_user_rates: np.ndarray
    iterations: int
    objective_trace: list


def fd_array_positions(scenario: Scenario) -> np.ndarray:
    """(M, 3) half-wavelength array packed at x = 0, centered at span_y / 2."""
    m = scenario.n_pas_total
    spacing = scenario.wavelength / 2.0
    y = scenario.span_y / 2.0 + (np.arange(m) - (m - 1) / 2.0) * spacing
    pts = np.zeros((m, 3))
    pts[:, 1] = y
    pts[:, 2] = scenario.pass_height
    return pts


def fd_channels(scenario: Scenario) -> np.ndarray:
    """(M, K) columns h_k for the fixed fully-digital array."""
    pts = fd_array_positions(scenario)
    diff = pts[None, :, :] - np.concatenate(
        [scenario.user_positions, np.zeros((scenario.n_users, 1))], axis=1)[:, None, :]
    r = np.linalg.norm(diff, axis=2)                     # (K, M)
    amp = np.sqrt(scenario.path_gain_beta)
    rows = amp * np.exp(-1j * scenario.wavenumber * r) / r   # h_k^H rows
    return rows.conj().T


def fd_wmmse(scenario: Scenario, tol: float = 1e-8,
             max_iter: int = 500) -> BaselineResult:
    """Fully digital WMMSE baseline: M = N*L dedicated antennas at the feed
    region, no waveguide response, same power and noise budget."""
    h_cols = fd_channels(scenario)
    d, trace, iters = wmmse_precoder(h_cols, scenario.max_power,
                                     scenario.noise_power, tol, max_iter)
    rates = _rates_from_gains(h_cols.conj().T @ d, scenario.noise_power)
    return BaselineResult(placement=None, beam=TransmitBeam(d),
                          sum_rate=float(rates.sum()), per_user_rates=rates,
                          iterations=iters, objective_trace=trace)


def uniform_placement(scenario: Scenario) -> Placement:
    l = scenario.pas_per_waveguide
    if l == 1:
        row = np.array([scenario.span_x / 2.0])
    else:
        row = np.arange(l) * scenario.span_x / (l - 1)
    return Placement(np.tile(row, (scenario.n_waveguides, 1)))


def uniform_pass(scenario: Scenario, tol: float = 1e-8,
                 max_iter: int = 500) -> BaselineResult:
    """PAs spread evenly over each waveguide, beam by WMMSE on the resulting
    effective channels."""
    placement = uniform_placement(scenario)
    eff = effective_channel(scenario, placement)
    d, trace, iters = wmmse_precoder(eff.h_tilde, scenario.max_power,
                                     scenario.noise_power, tol, max_iter)
    beam = TransmitBeam(d)
    report = sinr_and_rate(eff, beam, scenario)
    return BaselineResult(placement=placement, beam=beam,
                          sum_rate=report.sum_rate, per_user_rates=report.rates,
                          iterations=iters, objective_trace=trace)


class OracleTooLarge(ValueError):
    pass


def _eigh_2x2(g_mat):
    """Closed-form ascending eigendecomposition of batched Hermitian 2x2."""
    a = g_mat[:, 0, 0].real
    c = g_mat[:, 1, 1].real
    b = g_mat[:, 0, 1]
    mid = 0.5 * (a + c)
    span = np.sqrt((0.5 * (a - c)) ** 2 + np.abs(b) ** 2)
    evals = np.stack([mid - span, mid + span], axis=1)
    # eigenvector of the larger eigenvalue; [0, 1] when already diagonal
    scale = np.maximum(np.abs(a) + np.abs(c), 1e-300)
    off = np.abs(b) > 1e-15 * scale
    p_comp = np.where(off, b, np.where(c >= a, 0.0, 1.0))
    q_comp = np.where(off, evals[:, 1] - a, np.where(c >= a, 1.0, 0.0))
    norm = np.sqrt(np.abs(p_comp) ** 2 + np.abs(q_comp) ** 2)
    p_comp, q_comp = p_comp / norm, q_comp / norm
    vecs = np.empty_like(g_mat)
    vecs[:, 0, 1] = p_comp
    vecs[:, 1, 1] = q_comp
    vecs[:, 0, 0] = -np.conj(q_comp)
    vecs[:, 1, 0] = np.conj(p_comp)
    return evals, vecs


def _batched_wmmse(h_cols, max_power, noise_power, tol=1e-8, max_iter=500):
    """wmmse_precoder vectorized over a leading batch axis.

    h_cols: (P, N, K).  Returns (D (P, N, K), rates (P, K)).  Every batch
    entry follows the same update schedule; iteration stops when all
    entries' objectives have settled.
    """
    p, n, k = h_cols.shape
    hh = h_cols.conj()
    gram = np.einsum("pnk,pnj->pkj", hh, h_cols)
    reg = k * noise_power / max_power
    # D0 = H (H^H H + reg I)^{-1}, matching the unbatched initialization
    d = np.linalg.solve(gram + reg * np.eye(k)[None],
                        hh.transpose(0, 2, 1)).conj().transpose(0, 2, 1)
    d *= np.sqrt(max_power / np.einsum("pnk->p", np.abs(d) ** 2))[:, None, None]

    prev = None
    for _ in range(max_iter):
        gains = np.einsum("pnk,pnj->pkj", hh, d)
        j_cov = np.sum(np.abs(gains) ** 2, axis=2) + noise_power
        diag = np.einsum("pkk->pk", gains)
        v = np.conj(diag) / j_cov
        e = 1.0 - np.abs(diag) ** 2 / j_cov
        alpha = 1.0 / e
        obj = k + np.sum(np.log2(e), axis=1)
        if prev is not None and np.all(np.abs(prev - obj)
                                       <= tol * np.maximum(1.0, np.abs(prev))):
            break
        prev = obj
        w = alpha * np.abs(v) ** 2
        g_mat = np.einsum("pk,pnk,pmk->pnm", w, h_cols, hh)
        m_mat = h_cols * (alpha * np.conj(v))[:, None, :]
        if n == 2:
            evals, vecs = _eigh_2x2(g_mat)
        else:
            evals, vecs = np.linalg.eigh(g_mat)
        evals = np.maximum(evals, 0.0)
        c = np.einsum("pnm,pnk->pmk", vecs.conj(), m_mat)
        driven = np.abs(c) ** 2
        # minimum-norm unconstrained candidate
        cutoff = np.maximum(evals.max(axis=1), 1e-280)[:, None] * 1e-14
        live = evals > cutoff
        inv = np.where(live, 1.0 / np.where(live, evals, 1.0), 0.0)
        coef = c * inv[:, :, None]
        pw0 = np.sum(driven * inv[:, :, None] ** 2, axis=(1, 2))
        null_drive = np.any(~live & (driven.max(axis=2) > 0), axis=1)
        need = null_drive | (pw0 > max_power)
        if np.any(need):
            # Newton on 1/sqrt(power(eta)) = 1/sqrt(P): concave increasing
            # in eta, so iterating from eta = 0 converges monotonically.
            target = 1.0 / np.sqrt(max_power)
            ev_n = evals[need][:, :, None]
            dr_n = driven[need]
            eta_n = np.zeros(ev_n.shape[0])
            for _ in range(15):
                den = ev_n + eta_n[:, None, None]
                pw = np.maximum(np.sum(dr_n / den**2, axis=(1, 2)), 1e-300)
                slope = np.sum(dr_n / den**3, axis=(1, 2)) * pw**-1.5
                step = (target - 1.0 / np.sqrt(pw)) / np.maximum(slope, 1e-300)
                eta_n = np.maximum(eta_n + step, 0.0)
                if np.all(np.abs(step) <= 1e-13 * (1.0 + eta_n)):
                    break
            eta = np.zeros(p)
            eta[need] = eta_n
            coef_b = c / (evals[:, :, None] + eta[:, None, None])
            coef = np.where(need[:, None, None], coef_b, coef)
        d = np.einsum("pnm,pmk->pnk", vecs, coef)

    gains = np.einsum("pnk,pnj->pkj", hh, d)
    powers = np.abs(gains) ** 2
    sig = np.einsum("pkk->pk", powers)
    interf = powers.sum(axis=2) - sig
    rates = np.log2(1.0 + sig / (interf + noise_power))
    return d, rates


def _grid_axis(span_x: float, resolution: float) -> np.ndarray:
    n = int(np.floor(span_x / resolution + 1e-9)) + 1
    return np.arange(n) * resolution


def grid_oracle(scenario: Scenario, resolution: float = 1e-3,
                max_points: float = 5e8,
                max_solver_points: float = 1e6) -> BaselineResult:
    """Exhaustive search over grid-snapped feasible placements.

    Guarded to N*L <= 3 and K <= 2; refuses (OracleTooLarge) when the
    combination count would exceed max_points (vectorized single-user
    paths) or max_solver_points (the two-user path, where every grid point
    runs a WMMSE solve).  Single-user beamforming is the matched filter at
    full power; two users use the WMMSE precoder.  Ties break toward the
    lexicographically first grid point.
    """
    n, l, k = scenario.n_waveguides, scenario.pas_per_waveguide, scenario.n_users
    if n * l > 3 or k > 2:
        raise OracleTooLarge(
            f"grid oracle limited to N*L <= 3 and K <= 2, got N*L={n * l}, K={k}")
    axis = _grid_axis(scenario.span_x, resolution)
    g = axis.size

    if k == 1:
        phi = scenario.pinch_amplitude
        kappa = scenario.wavenumber
        neff = scenario.refractive_index
        xu = scenario.user_positions[0, 0]
        psi = float(scenario.transverse_offsets[0, 0])
        r = np.sqrt((axis - xu) ** 2 + psi**2)
        a = phi * np.exp(-1j * kappa * (r + neff * axis)) / r
        gap = int(np.ceil(scenario.min_spacing / resolution - 1e-9))

        if l == 1:
            mag2 = np.abs(a) ** 2
            idx = int(np.argmax(mag2))
            best_x = np.array([[axis[idx]]])
            best_gain = mag2[idx]
        elif l == 2:
            if g * g > max_points:
                raise OracleTooLarge(f"{g}^2 pair grid exceeds {max_points:g} points")
            best_gain = -1.0
            best_pair = (0, gap)
            chunk = 128
            for i0 in range(0, g, chunk):
                i1 = min(i0 + chunk, g)
                block = a[i0:i1, None] + a[None, :]
                mag2 = np.abs(block) ** 2
                cols = np.arange(g)[None, :]
                valid = cols >= (np.arange(i0, i1)[:, None] + gap)
                mag2 = np.where(valid, mag2, -np.inf)
                flat = int(np.argmax(mag2))
                ii, jj = divmod(flat, g)
                if mag2[ii, jj] > best_gain:
                    best_gain = float(mag2[ii, jj])
                    best_pair = (i0 + ii, jj)
            best_x = np.array([[axis[best_pair[0]], axis[best_pair[1]]]])
        else:  # l == 3
            if float(g) ** 3 > max_points:
                raise OracleTooLarge(f"{g}^3 triple grid exceeds {max_points:g} points")
            best_gain = -1.0
            best_triple = (0, gap, 2 * gap)
            for i in range(g):
                for j in range(i + gap, g - gap):
                    rest = a[i] + a[j] + a[j + gap:]
                    mag2 = np.abs(rest) ** 2
                    kk = int(np.argmax(mag2))
                    if mag2[kk] > best_gain:
                        best_gain = float(mag2[kk])
                        best_triple = (i, j, j + gap + kk)
            best_x = np.array([axis[list(best_triple)]])

        placement = Placement(best_x)
        eff = effective_channel(scenario, placement)
        h = eff.h_tilde[:, 0]
        d = np.sqrt(scenario.max_power) * h[:, None] / np.linalg.norm(h)
        beam = TransmitBeam(d)
        report = sinr_and_rate(eff, beam, scenario)
        return BaselineResult(placement=placement, beam=beam,
                              sum_rate=report.sum_rate,
                              per_user_rates=report.rates,
                              iterations=g, objective_trace=[])

    # K = 2 (one PA per waveguide): batched WMMSE over all position pairs.
    if float(g) ** 2 > max_solver_points:
        raise OracleTooLarge(f"{g}^2 two-user grid exceeds {max_solver_points:g} "
                             "beamformer solves; coarsen the resolution")
    phi = scenario.pinch_amplitude
    kappa = scenario.wavenumber
    neff = scenario.refractive_index
    xu = scenario.user_positions[:, 0]
    psi = scenario.transverse_offsets                    # (K, N)
    # per-waveguide tables of conj(pinch coefficient) = h_tilde contribution
    tables = np.empty((2, 2, g), dtype=complex)          # [k, n, grid]
    for kk in range(2):
        for nn in range(2):
            r = np.sqrt((axis - xu[kk]) ** 2 + psi[kk, nn] ** 2)
            tables[kk, nn] = np.conj(phi * np.exp(-1j * kappa * (r + neff * axis)) / r)
    ii, jj = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
    ii, jj = ii.reshape(-1), jj.reshape(-1)
    h_cols = np.empty((g * g, 2, 2), dtype=complex)      # (P, N, K)
    h_cols[:, 0, 0] = tables[0, 0][ii]
    h_cols[:, 1, 0] = tables[0, 1][jj]
    h_cols[:, 0, 1] = tables[1, 0][ii]
    h_cols[:, 1, 1] = tables[1, 1][jj]
    d_all, rates_all = _batched_wmmse(h_cols, scenario.max_power,
                                      scenario.noise_power, tol=1e-8)
    totals = rates_all.sum(axis=1)
    best = int(np.argmax(totals))
    placement = Placement(np.array([[axis[ii[best]]], [axis[jj[best]]]]))
    return BaselineResult(placement=placement, beam=TransmitBeam(d_all[best]),
                          sum_rate=float(totals[best]),
                          per_user_rates=rates_all[best],
                          iterations=g * g, objective_trace=[])
