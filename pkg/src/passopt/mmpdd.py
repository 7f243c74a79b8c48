"""Penalty-dual-decomposition solver for joint transmit + pinching beamforming.

The sum-rate problem is lifted with auxiliary variables
    theta[k,n,l] = kappa * (r + n_eff * x)        (radiated phase seen by user k)
    u[k,n,l]     = phi * exp(-i theta) / r        (per-PA effective coefficient)
    q[k,j]       = h_tilde_k^H d_j                (crosslink gains)
whose defining equalities are penalized and dualized.  The inner loop is a
block-coordinate descent over (v, alpha), (D, Q), X, U, theta, where the
nonconvex x- and theta-dependences are handled by tight majorizing
surrogates (CCCP linearization, a Jensen bound for the x*r(x) cross term,
and a Lipschitz-gradient bound for the complex exponential).  The outer
loop runs the usual dual-ascent / penalty-shrink schedule until the
largest equality residual falls below eps_final.

Surrogate bookkeeping: writing w = rho*lam_u - phi*exp(-i theta) and
a = theta + rho*lam_theta, the x-dependent part of the augmented
Lagrangian for one (k, n, l) expands exactly as

    (|u|^2 + kappa^2)/(2 rho) * (x - xu)^2  +  kappa^2 n_eff^2/(2 rho) * x^2
    - kappa n_eff (lam_th + theta/rho) * x
    + Omega * r(x)  +  kappa^2 n_eff / rho * x * r(x)  +  const,

with Omega = Re{u^H (lam_u - phi e^{-i theta}/rho)} - kappa (lam_th + theta/rho).
The Omega * r(x) term is linearized when Omega <= 0 (tangent of a concave
function) and kept exactly when Omega > 0 (convex); x * r(x) is majorized
by the Jensen bound on sqrt composed with a tangent bound on -x^2.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import effective_channel, pa_user_distances, sinr_and_rate
from .numerics import quad_ball_precoder, solve_ordered_box
from .scenario import Placement, Scenario, TransmitBeam
from .wmmse import equalizers_from_gains, objective_from_gains


@dataclass
class SolverConfig:
    rho0: float = 1e-4
    gamma: float = 0.9
    sigma_shrink: float = 0.85
    eps_final: float = 1e-6
    max_outer: int = 200
    max_inner: int = 30
    inner_tol: float = 1e-4
    rho_floor: float = 1e-16


@dataclass
class AuxState:
    theta: np.ndarray    # (K, N, L) radiated phases
    u: np.ndarray        # (K, N, L) effective pinching coefficients
    q: np.ndarray        # (K, K) crosslink gains
    s: np.ndarray        # (K, N, L) PA-user distances for the current placement

    def copy(self) -> "AuxState":
        return AuxState(self.theta.copy(), self.u.copy(), self.q.copy(), self.s.copy())


@dataclass
class PddDuals:
    lam_u: np.ndarray        # (K, N, L) complex
    lam_theta: np.ndarray    # (K, N, L) real
    lam_q: np.ndarray        # (K, K) complex
    rho: float

    def copy(self) -> "PddDuals":
        return PddDuals(self.lam_u.copy(), self.lam_theta.copy(),
                        self.lam_q.copy(), self.rho)


@dataclass
class Residuals:
    b_u: np.ndarray
    b_theta: np.ndarray
    b_q: np.ndarray

    @property
    def inf_norm(self) -> float:
        return float(max(np.abs(self.b_u).max(), np.abs(self.b_theta).max(),
                         np.abs(self.b_q).max()))


def collapsed_coeffs(u: np.ndarray) -> np.ndarray:
    """(K, N) waveguide-collapsed coefficients; row k is u_k^T Sigma."""
    return u.sum(axis=2)


def init_solver(scenario: Scenario, seed: int = 0):
    """Consistent starting point: per-waveguide PA combs centered on user
    x-coordinates, beam by regularized zero-forcing at full power,
    auxiliaries chosen so that all equality residuals start at zero.

    Comb spacing is max(d_min, min(5 guided wavelengths, span_x / L)); an
    integer number of guided wavelengths keeps the feed phases of a comb
    aligned, so a comb at broadside of its user radiates coherently.  Each
    waveguide's comb is centered on the x-coordinate of the user matched to
    it by y-order (users sorted by y against the ascending waveguide
    lanes); with the placement block pinned by the phase-equality penalty,
    the starting placement decides the basin, and the mean-x cluster is a
    poor basin for K > 1.  For a single user this reduces to a comb at the
    user's own x.  Deterministic; seed is kept for interface stability.
    """
    del seed
    n, l, k = scenario.n_waveguides, scenario.pas_per_waveguide, scenario.n_users
    spacing = max(scenario.min_spacing,
                  min(5.0 * scenario.guided_wavelength, scenario.span_x / l))
    if l > 1:
        spacing = min(spacing, scenario.span_x / (l - 1))
    offsets = (np.arange(l) - (l - 1) / 2.0) * spacing
    half = (l - 1) / 2.0 * spacing
    order = np.argsort(scenario.user_positions[:, 1], kind="stable")
    centers = np.clip(scenario.user_positions[order, 0], half,
                      scenario.span_x - half)
    placement = Placement(centers[:, None] + offsets[None, :])

    eff = effective_channel(scenario, placement)
    ht = eff.h_tilde
    reg = k * scenario.noise_power / scenario.max_power
    d0 = ht @ np.linalg.inv(ht.conj().T @ ht + reg * np.eye(k))
    d0 *= np.sqrt(scenario.max_power / np.sum(np.abs(d0) ** 2))
    beam = TransmitBeam(d0)

    r = eff.distances
    theta = scenario.wavenumber * (r + scenario.refractive_index * placement.x[None, :, :])
    u = eff.pinch_coeffs.copy()
    q = collapsed_coeffs(u) @ beam.d
    aux = AuxState(theta=theta, u=u, q=q, s=r.copy())
    duals = PddDuals(lam_u=np.zeros((k, n, l), dtype=complex),
                     lam_theta=np.zeros((k, n, l)),
                     lam_q=np.zeros((k, k), dtype=complex),
                     rho=SolverConfig().rho0)
    return placement, beam, aux, duals


def residuals(scenario: Scenario, placement: Placement, beam: TransmitBeam,
              aux: AuxState) -> Residuals:
    """Equality residuals evaluated exactly at the current variables."""
    r = pa_user_distances(scenario, placement)
    phase = scenario.pinch_amplitude * np.exp(-1j * aux.theta)
    b_u = aux.u * r - phase
    b_theta = aux.theta - scenario.wavenumber * (r + scenario.refractive_index
                                                 * placement.x[None, :, :])
    b_q = aux.q - collapsed_coeffs(aux.u) @ beam.d
    return Residuals(b_u=b_u, b_theta=b_theta, b_q=b_q)


def al_objective(scenario: Scenario, aux: AuxState, v: np.ndarray,
                 alpha: np.ndarray, duals: PddDuals, resid: Residuals) -> float:
    """WMMSE part on the gain variables plus the scaled penalty terms."""
    rho = duals.rho
    base = objective_from_gains(aux.q, v, alpha, scenario.noise_power)
    pen = (np.sum(np.abs(resid.b_u + rho * duals.lam_u) ** 2)
           + np.sum(np.abs(resid.b_theta + rho * duals.lam_theta) ** 2)
           + np.sum(np.abs(resid.b_q + rho * duals.lam_q) ** 2))
    return float(base + pen / (2.0 * rho))


def update_vw(aux: AuxState, noise_power: float):
    """MMSE equalizers and weights from the current gain variables."""
    v, alpha, _, _ = equalizers_from_gains(aux.q, noise_power)
    return v, alpha


def update_DQ(scenario: Scenario, beam: TransmitBeam, aux: AuxState,
              duals: PddDuals, v: np.ndarray, alpha: np.ndarray):
    """Exact minimizers of the gain block: Q entrywise, then the precoder as
    a least-squares fit to the corrected gains over the power ball."""
    rho = duals.rho
    a_mat = collapsed_coeffs(aux.u)                     # (K, N) = U^T Sigma
    num = a_mat @ beam.d - rho * duals.lam_q
    num[np.diag_indices_from(num)] += 2.0 * rho * alpha * np.conj(v)
    den = (2.0 * rho * alpha * np.abs(v) ** 2 + 1.0)[:, None]
    q_new = num / den

    target = q_new + rho * duals.lam_q
    g_mat = a_mat.conj().T @ a_mat
    m_mat = a_mat.conj().T @ target
    d_new, _ = quad_ball_precoder(g_mat, m_mat, scenario.max_power)
    return TransmitBeam(d_new), q_new


def al_x_part(scenario: Scenario, aux: AuxState, duals: PddDuals,
              x: np.ndarray) -> float:
    """x-dependent part of the augmented Lagrangian (u, theta, duals fixed)."""
    rho = duals.rho
    xu = scenario.user_positions[:, 0][:, None, None]
    psi = scenario.transverse_offsets[:, :, None]
    r = np.sqrt((x[None, :, :] - xu) ** 2 + psi**2)
    phase = scenario.pinch_amplitude * np.exp(-1j * aux.theta)
    b_u = aux.u * r - phase
    b_theta = aux.theta - scenario.wavenumber * (r + scenario.refractive_index
                                                 * x[None, :, :])
    pen = (np.sum(np.abs(b_u + rho * duals.lam_u) ** 2)
           + np.sum(np.abs(b_theta + rho * duals.lam_theta) ** 2))
    return float(pen / (2.0 * rho))


class XSurrogate:
    """Tight convex majorizer of the AL x-part around the previous placement.

    Mathematically the surrogate is the term-by-term expansion described in
    the module docstring with Omega * r(x) tangent-linearized where
    Omega <= 0 (kept exactly where convex) and x * r(x) replaced by its
    Jensen + tangent bound.  Numerically it is evaluated in the composed
    form

        AL_x_part(x) + sum_{Omega<=0} Omega * [r0 - r + (t-xu)(x-t)/r0]
                     + nc * sum [x (r-r0)^2 / (2 r0) + xu (x-t)^2 / r0],

    which is algebraically identical but avoids the huge cancellations of
    the raw polynomial (theta/rho terms reach 1e10 while the value is O(1));
    the two gap terms are exactly zero at x = t, making tightness hold to
    machine precision.  Gradients and diagonal Hessians for the Newton
    steps come from the aggregated polynomial coefficients.
    """

    def __init__(self, scenario: Scenario, placement: Placement,
                 aux: AuxState, duals: PddDuals):
        self.scenario = scenario
        kappa = scenario.wavenumber
        neff = scenario.refractive_index
        phi = scenario.pinch_amplitude
        rho = duals.rho
        t = placement.x                                  # (N, L) expansion point
        xu = scenario.user_positions[:, 0][:, None, None]
        psi = scenario.transverse_offsets[:, :, None]
        r0 = np.sqrt((t[None, :, :] - xu) ** 2 + psi**2)

        w = rho * duals.lam_u - phi * np.exp(-1j * aux.theta)
        a_lin = aux.theta + rho * duals.lam_theta
        abs_u2 = np.abs(aux.u) ** 2

        quad_a = (abs_u2 + kappa**2) / (2.0 * rho)
        quad_b = kappa**2 * neff**2 / (2.0 * rho)
        lin_c = -(kappa * neff / rho) * a_lin
        omega = np.real(np.conj(aux.u) * w) / rho - (kappa / rho) * a_lin
        nc = kappa**2 * neff / rho

        # Jensen + tangent majorizer of x * r(x):
        # [x^3 + (xu^2 + (t-xu)^2 + 2 psi^2 - 4 xu t) x + 2 xu t^2] / (2 r0)
        pc = xu**2 + (t[None] - xu) ** 2 + 2.0 * psi**2 - 4.0 * xu * t[None]

        neg = omega <= 0.0
        slope = omega * (t[None] - xu) / r0

        self.expansion = t.copy()
        self.theta = aux.theta.copy()
        self.u = aux.u.copy()
        self.lam_u = duals.lam_u.copy()
        self.lam_theta = duals.lam_theta.copy()
        self.rho = rho
        self.r0 = r0
        self.nc = nc
        self.neg = neg
        self.omega = omega
        self.slope = slope
        self.xu = xu
        self.psi = psi
        self.c3 = nc * (0.5 / r0).sum(axis=0)
        self.c2 = quad_a.sum(axis=0) + scenario.n_users * quad_b
        self.c1 = ((-2.0 * quad_a * xu).sum(axis=0) + lin_c.sum(axis=0)
                   + nc * (pc / (2.0 * r0)).sum(axis=0)
                   + np.where(neg, slope, 0.0).sum(axis=0))
        self.omega_pos = np.where(neg, 0.0, omega)       # (K, N, L)

    def _row_value(self, n: int, x_row: np.ndarray) -> float:
        """Stable surrogate value restricted to waveguide n."""
        scen = self.scenario
        rho = self.rho
        xu = self.xu[:, 0, :]                            # (K, 1)
        psi = self.psi[:, n, :]                          # (K, 1)
        t = self.expansion[n][None, :]
        r0 = self.r0[:, n, :]
        r = np.sqrt((x_row[None, :] - xu) ** 2 + psi**2)
        phase = scen.pinch_amplitude * np.exp(-1j * self.theta[:, n, :])
        b_u = self.u[:, n, :] * r - phase
        b_th = self.theta[:, n, :] - scen.wavenumber * (
            r + scen.refractive_index * x_row[None, :])
        base = (np.sum(np.abs(b_u + rho * self.lam_u[:, n, :]) ** 2)
                + np.sum((b_th + rho * self.lam_theta[:, n, :]) ** 2)) / (2.0 * rho)
        cc_gap = np.where(self.neg[:, n, :],
                          self.omega[:, n, :] * (r0 - r)
                          + self.slope[:, n, :] * (x_row[None, :] - t), 0.0)
        nc_gap = self.nc * (x_row[None, :] * (r - r0) ** 2 / (2.0 * r0)
                            + xu * (x_row[None, :] - t) ** 2 / r0)
        return float(base + cc_gap.sum() + nc_gap.sum())

    def value(self, x: np.ndarray) -> float:
        return sum(self._row_value(n, x[n]) for n in range(x.shape[0]))

    def _waveguide_objective(self, n: int):
        c3, c2, c1 = self.c3[n], self.c2[n], self.c1[n]
        opos = self.omega_pos[:, n, :]                   # (K, L)
        xu = self.xu[:, 0, :]
        psi = self.psi[:, n, :]
        use_pos = np.any(opos > 0.0)

        def objective(x):
            val = self._row_value(n, x)
            grad = 3.0 * c3 * x**2 + 2.0 * c2 * x + c1
            hess = 6.0 * c3 * x + 2.0 * c2
            if use_pos:
                diff = x[None, :] - xu
                r = np.sqrt(diff**2 + psi**2)
                grad = grad + np.sum(opos * diff / r, axis=0)
                hess = hess + np.sum(opos * psi**2 / r**3, axis=0)
            return val, grad, hess

        return objective

    def minimize(self, x_prev: np.ndarray):
        """Per-waveguide interior-point solves; a row is only accepted if it
        does not increase its own surrogate value (MM safety)."""
        scen = self.scenario
        x_new = x_prev.copy()
        all_ok = True
        for n in range(scen.n_waveguides):
            objective = self._waveguide_objective(n)
            row, ok = solve_ordered_box(objective, x_prev[n], scen.min_spacing,
                                        scen.span_x)
            all_ok = all_ok and ok
            if objective(row)[0] <= objective(x_prev[n])[0]:
                x_new[n] = row
        return x_new, all_ok


def update_X(scenario: Scenario, placement: Placement, aux: AuxState,
             duals: PddDuals):
    """One MM step on the placement block."""
    surr = XSurrogate(scenario, placement, aux, duals)
    x_new, ok = surr.minimize(placement.x)
    return Placement(x_new), ok


def update_U(scenario: Scenario, beam: TransmitBeam, aux: AuxState,
             duals: PddDuals) -> np.ndarray:
    """Exact minimizer of the coefficient block: for each user solve the
    Hermitian normal equations of the stacked least-squares system
    ||diag(r) u + zeta||^2 + ||q_row + rho lam_q - u^T Sigma D||^2."""
    k_users, n, l = aux.u.shape
    rho = duals.rho
    phi = scenario.pinch_amplitude
    e_mat = np.repeat(beam.d.conj(), l, axis=0)          # (M, K) = Sigma D*
    gram = e_mat @ e_mat.conj().T                        # (M, M)
    zeta = rho * duals.lam_u - phi * np.exp(-1j * aux.theta)
    u_new = np.empty_like(aux.u)
    for k in range(k_users):
        r_k = aux.s[k].reshape(-1)
        c_k = aux.q[k] + rho * duals.lam_q[k]
        a_mat = gram + np.diag(r_k**2)
        rhs = e_mat @ c_k - r_k * zeta[k].reshape(-1)
        u_new[k] = np.linalg.solve(a_mat, rhs).reshape(n, l)
    return u_new


def lipschitz_theta(scenario: Scenario, aux: AuxState, duals: PddDuals) -> np.ndarray:
    """Curvature bound phi * |lam_u + u r / rho| of the exponential term."""
    c = duals.lam_u + aux.u * aux.s / duals.rho
    return scenario.pinch_amplitude * np.abs(c)


def exp_term_value(theta, c, phi):
    """-phi * Re{c e^{i theta}}, the theta-dependence of the b_u penalty."""
    return -phi * np.real(c * np.exp(1j * theta))


def exp_term_gradient(theta, c, phi):
    return phi * (np.real(c) * np.sin(theta) + np.imag(c) * np.cos(theta))


def exp_term_surrogate(theta, theta0, c, phi):
    """Lipschitz-gradient majorizer of exp_term_value around theta0."""
    rho_l = phi * np.abs(c)
    return (exp_term_value(theta0, c, phi)
            + exp_term_gradient(theta0, c, phi) * (theta - theta0)
            + 0.5 * rho_l * (theta - theta0) ** 2)


def update_theta(scenario: Scenario, placement: Placement, aux: AuxState,
                 duals: PddDuals) -> np.ndarray:
    """Closed-form minimizer of the per-entry quadratic + Lipschitz surrogate."""
    rho = duals.rho
    phi = scenario.pinch_amplitude
    kappa = scenario.wavenumber
    c = duals.lam_u + aux.u * aux.s / rho
    rho_l = phi * np.abs(c)
    grad = exp_term_gradient(aux.theta, c, phi)
    target = aux.s + scenario.refractive_index * placement.x[None, :, :]
    num = rho_l * aux.theta - duals.lam_theta + (kappa / rho) * target - grad
    return num / (rho_l + 1.0 / rho)


def outer_update(duals: PddDuals, resid: Residuals, prev_norm: float,
                 config: SolverConfig) -> tuple[PddDuals, bool]:
    """Dual ascent when the residual beat gamma * previous, else shrink rho."""
    new = duals.copy()
    bn = resid.inf_norm
    if bn <= config.gamma * prev_norm:
        new.lam_u = duals.lam_u + resid.b_u / duals.rho
        new.lam_theta = duals.lam_theta + resid.b_theta / duals.rho
        new.lam_q = duals.lam_q + resid.b_q / duals.rho
        return new, True
    new.rho = duals.rho * config.sigma_shrink
    if new.rho < config.rho_floor:
        raise RuntimeError("penalty collapse: rho underflow below "
                           f"{config.rho_floor:g} without residual convergence")
    return new, False


@dataclass
class TraceRow:
    outer_iter: int
    inner_sweeps: int
    sum_rate: float
    al_value: float
    residual_inf: float
    rho: float


@dataclass
class SolveResult:
    placement: Placement
    beam: TransmitBeam
    trace: list
    converged: bool
    flag: str
    iterations: int
    residual_inf: float
    sum_rate: float
    per_user_rates: np.ndarray
    inner_al: list = field(default_factory=list)


def export_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["outer_iter", "inner_sweeps", "sum_rate", "al_value",
                         "residual_inf", "rho"])
        for row in trace:
            writer.writerow([row.outer_iter, row.inner_sweeps,
                             repr(float(row.sum_rate)), repr(float(row.al_value)),
                             repr(float(row.residual_inf)), repr(float(row.rho))])


def solve(scenario: Scenario, config: SolverConfig | None = None, seed: int = 0,
          collect_inner: bool = False) -> SolveResult:
    """Full solver loop; deterministic per (scenario, seed)."""
    config = config or SolverConfig()
    placement, beam, aux, duals = init_solver(scenario, seed)
    duals.rho = config.rho0
    resid = residuals(scenario, placement, beam, aux)
    prev_norm = resid.inf_norm

    trace = []
    inner_al_log = []
    best = None
    converged = False
    outer_done = 0
    for i in range(1, config.max_outer + 1):
        al_prev = None
        sweeps = 0
        sweep_als = []
        for _ in range(config.max_inner):
            v, alpha = update_vw(aux, scenario.noise_power)
            beam, aux.q = update_DQ(scenario, beam, aux, duals, v, alpha)
            placement, _ = update_X(scenario, placement, aux, duals)
            aux.s = pa_user_distances(scenario, placement)
            aux.u = update_U(scenario, beam, aux, duals)
            aux.theta = update_theta(scenario, placement, aux, duals)
            resid = residuals(scenario, placement, beam, aux)
            al = al_objective(scenario, aux, v, alpha, duals, resid)
            sweeps += 1
            if collect_inner:
                sweep_als.append(al)
            if al_prev is not None and abs(al_prev - al) <= config.inner_tol * max(1.0, abs(al_prev)):
                al_prev = al
                break
            al_prev = al
        if collect_inner:
            inner_al_log.append(sweep_als)

        report = sinr_and_rate(effective_channel(scenario, placement), beam, scenario)
        bn = resid.inf_norm
        trace.append(TraceRow(i, sweeps, report.sum_rate, al_prev, bn, duals.rho))
        outer_done = i
        if best is None or bn < best[0]:
            best = (bn, placement.copy(), beam.copy(), report)
        if bn <= config.eps_final:
            converged = True
            break
        duals, _ = outer_update(duals, resid, prev_norm, config)
        prev_norm = bn

    if converged:
        final_placement, final_beam, final_report, final_bn = placement, beam, report, bn
        flag = "converged"
    else:
        final_bn, final_placement, final_beam, final_report = best
        flag = "max_iterations"
    return SolveResult(placement=final_placement, beam=final_beam, trace=trace,
                       converged=converged, flag=flag, iterations=outer_done,
                       residual_inf=final_bn, sum_rate=final_report.sum_rate,
                       per_user_rates=final_report.rates, inner_al=inner_al_log)
