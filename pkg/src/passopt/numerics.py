"""Small numerical workhorses shared by the solvers.

quad_ball_precoder solves the Tikhonov-over-a-power-ball problem that every
beamformer update in this package reduces to.  solve_ordered_box is a
log-barrier interior-point method for separable convex objectives over the
ordered-spacing polytope of PA positions on one waveguide.
"""

from __future__ import annotations

import numpy as np


def quad_ball_precoder(g_mat: np.ndarray, m_mat: np.ndarray, power: float,
                       power_tol: float = 1e-10):
    """Minimize tr(D^H G D) - 2 Re tr(M^H D) subject to ||D||_F^2 <= power.

    G must be Hermitian PSD.  Solved exactly through the eigenbasis of G:
    the unconstrained (minimum-norm, when G is singular) solution is
    returned if it fits inside the ball, otherwise the ball multiplier eta
    is found by bisection until ||D||_F^2 matches the budget to power_tol
    relative.  Returns (D, eta).
    """
    evals, vecs = np.linalg.eigh(g_mat)
    evals = np.maximum(evals, 0.0)
    c = vecs.conj().T @ m_mat
    cutoff = max(evals.max(initial=0.0) * 1e-14, 1e-300)
    live = evals > cutoff
    driven = np.abs(c) ** 2

    # Unbounded descent directions (null eigenvalue but nonzero drive) force
    # the power constraint to be active.
    unbounded = np.any(driven[~live] > (np.abs(c).max(initial=0.0) * 1e-14) ** 2)
    if not unbounded:
        coef = np.zeros_like(c)
        coef[live] = c[live] / evals[live, None]
        pw = float(np.sum(np.abs(coef) ** 2))
        if pw <= power * (1.0 + 1e-12):
            return vecs @ coef, 0.0

    def ball_power(eta):
        return float(np.sum(driven / (evals[:, None] + eta) ** 2))

    hi = float(np.sqrt(np.sum(driven) / power)) + 1e-300
    lo = 0.0
    eta = hi
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):  # interval exhausted at float resolution
            eta = hi
            break
        pw = ball_power(mid)
        if abs(pw - power) <= power_tol * power:
            eta = mid
            break
        if pw > power:
            lo = mid
        else:
            hi = mid
        eta = hi
    coef = c / (evals[:, None] + eta)
    return vecs @ coef, float(eta)


def _chain_slacks(x, d_min, upper):
    """Slack of each ordering constraint: x0 >= 0, gaps >= d_min, x_last <= upper."""
    s = np.empty(x.size + 1)
    s[0] = x[0]
    s[1:-1] = np.diff(x) - d_min
    s[-1] = upper - x[-1]
    return s


def _interior_start(x0, d_min, upper, floor):
    """Blend x0 toward the maximally-interior comb until all slacks clear floor."""
    ll = x0.size
    s_center = (upper - (ll - 1) * d_min) / (ll + 1)
    center = s_center + np.arange(ll) * (d_min + s_center)
    s0 = _chain_slacks(x0, d_min, upper)
    sc = _chain_slacks(center, d_min, upper)
    if s0.min() >= floor:
        return x0.copy()
    tau = 0.0
    for a, b in zip(s0, sc):
        if a < floor and b > a:
            tau = max(tau, (floor - a) / (b - a))
    tau = min(1.0, tau)
    return (1.0 - tau) * x0 + tau * center


def solve_ordered_box(objective, x0, d_min, upper,
                      gap_tol: float = 1e-9,
                      barrier_shrink: float = 10.0,
                      max_newton: int = 100,
                      armijo: float = 1e-4):
    """Minimize a separable convex objective over the ordered box
    {0 <= x_1, x_l - x_{l-1} >= d_min, x_L <= upper}.

    `objective(x) -> (value, grad, hess_diag)` with a nonnegative diagonal
    Hessian on the feasible set.  Log-barrier outer loop (duality measure
    m/t driven below gap_tol relative to the objective scale), damped Newton
    inner steps with Armijo backtracking.  Returns (x, converged).
    """
    ll = x0.size
    m = ll + 1
    floor = 1e-10 * max(1.0, upper)
    x = _interior_start(np.asarray(x0, dtype=float), d_min, upper, floor)

    f0 = objective(x)[0]
    scale = 1.0 + abs(f0)
    t_final = m / (gap_tol * scale)
    t = max(t_final * barrier_shrink**-8, 1e-8)

    def barrier_value(xv):
        s = _chain_slacks(xv, d_min, upper)
        if s.min() <= 0.0:
            return np.inf, s
        return -np.log(s).sum(), s

    newton_used = 0
    converged = True
    while True:
        for _ in range(40):
            if newton_used >= max_newton:
                converged = False
                break
            fval, grad, hdiag = objective(x)
            bval, s = barrier_value(x)
            inv_s = 1.0 / s
            g = t * grad.copy()
            g += -inv_s[:-1] + inv_s[1:]
            # Barrier Hessian is tridiagonal over the chain constraints.
            hess = np.diag(t * hdiag + inv_s[:-1] ** 2 + inv_s[1:] ** 2)
            off = -inv_s[1:-1] ** 2
            hess += np.diag(off, 1) + np.diag(off, -1)
            try:
                step = np.linalg.solve(hess, -g)
            except np.linalg.LinAlgError:
                step = -g / np.maximum(np.diag(hess), 1e-300)
            newton_used += 1
            decrement = -0.5 * g @ step
            if decrement <= 1e-9 * (1.0 + abs(t * fval + bval)):
                break
            # Largest step keeping all slacks positive.
            ds = np.empty(m)
            ds[0] = step[0]
            ds[1:-1] = np.diff(step)
            ds[-1] = -step[-1]
            shrinking = ds < 0
            alpha_max = 1.0
            if np.any(shrinking):
                alpha_max = min(1.0, 0.99 * np.min(-s[shrinking] / ds[shrinking]))
            alpha = alpha_max
            phi0 = t * fval + bval
            slope = g @ step
            ok = False
            while alpha > 1e-14:
                x_try = x + alpha * step
                b_try, _ = barrier_value(x_try)
                if np.isfinite(b_try):
                    phi_try = t * objective(x_try)[0] + b_try
                    if phi_try <= phi0 + armijo * alpha * slope:
                        ok = True
                        break
                alpha *= 0.5
            if not ok:
                break
            x = x_try
        if not converged or m / t <= gap_tol * scale:
            break
        t *= barrier_shrink
    return x, converged
