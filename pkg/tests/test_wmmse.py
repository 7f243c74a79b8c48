import numpy as np
import pytest

from passopt import (TransmitBeam, build_wmmse_state, effective_channel, mse,
                     optimal_equalizer, optimal_weight, sinr_and_rate,
                     wmmse_objective)
from passopt.channel import crosslink_gains
from passopt.wmmse import WmmseState, equalizers_from_gains

from conftest import random_beam, random_placement, random_scenario


def _instance(rng, n_users=2, pas=3):
    scen = random_scenario(rng, n_users=n_users, pas_per_waveguide=pas)
    placement = random_placement(rng, scen)
    eff = effective_channel(scen, placement)
    beam = random_beam(rng, scen)
    return scen, eff, beam


def test_mse_with_zero_equalizer(rng):
    scen, eff, beam = _instance(rng)
    assert mse(eff, beam, 0.0, scen, 0) == pytest.approx(1.0)


def test_mse_lower_bound_and_minimum(rng):
    scen, eff, beam = _instance(rng)
    gains = crosslink_gains(eff, beam)
    for k in range(scen.n_users):
        j = np.sum(np.abs(gains[k]) ** 2) + scen.noise_power
        floor = 1.0 - np.abs(gains[k, k]) ** 2 / j
        v_opt = optimal_equalizer(eff, beam, scen, k)
        assert mse(eff, beam, v_opt, scen, k) == pytest.approx(floor, rel=1e-12)
        for _ in range(100):
            v = v_opt + 0.1 * (rng.standard_normal() + 1j * rng.standard_normal())
            assert mse(eff, beam, v, scen, k) >= floor - 1e-15


def test_optimal_equalizer_zero_beam(rng):
    scen, eff, _ = _instance(rng)
    zero = TransmitBeam(np.zeros((scen.n_waveguides, scen.n_users)))
    assert optimal_equalizer(eff, zero, scen, 0) == 0.0
    assert optimal_weight(eff, zero, scen, 0) == pytest.approx(1.0)


def test_optimal_equalizer_single_user_scalar_form(rng):
    scen, eff, beam = _instance(rng, n_users=1)
    g = crosslink_gains(eff, beam)[0, 0]
    expected = np.conj(g) / (np.abs(g) ** 2 + scen.noise_power)
    assert optimal_equalizer(eff, beam, scen, 0) == pytest.approx(expected, rel=1e-12)
    # interference-free minimum MSE collapses to 1 / (1 + SINR)
    rep = sinr_and_rate(eff, beam, scen)
    e_min = mse(eff, beam, complex(expected), scen, 0)
    assert e_min == pytest.approx(1.0 / (1.0 + rep.sinr[0]), rel=1e-12)


def test_perturbed_equalizer_increases_mse(rng):
    scen, eff, beam = _instance(rng)
    v = optimal_equalizer(eff, beam, scen, 1)
    e0 = mse(eff, beam, v, scen, 1)
    for delta in (1e-3, -1e-3, 1e-3j, -1e-3j):
        assert mse(eff, beam, v + delta, scen, 1) > e0


def test_weight_equals_one_plus_sinr(rng):
    for _ in range(50):
        scen, eff, beam = _instance(rng)
        rep = sinr_and_rate(eff, beam, scen)
        for k in range(scen.n_users):
            alpha = optimal_weight(eff, beam, scen, k)
            assert alpha - 1.0 == pytest.approx(rep.sinr[k], rel=1e-9)


def test_weight_monotone_in_beam_power(rng):
    scen, eff, beam = _instance(rng, n_users=1)
    alphas = [optimal_weight(eff, TransmitBeam(c * beam.d), scen, 0)
              for c in (0.5, 1.0, 2.0)]
    assert alphas[0] < alphas[1] < alphas[2]


def test_weight_times_mse_is_one(rng):
    scen, eff, beam = _instance(rng)
    state = build_wmmse_state(eff, beam, scen)
    np.testing.assert_allclose(state.alpha * state.e, 1.0, atol=1e-12)


def test_objective_identity(rng):
    """At the per-user optimal (v, alpha) the objective is K - sum_rate."""
    for _ in range(100):
        scen, eff, beam = _instance(rng)
        state = build_wmmse_state(eff, beam, scen)
        obj = wmmse_objective(eff, beam, scen, state)
        rep = sinr_and_rate(eff, beam, scen)
        assert abs(obj - (scen.n_users - rep.sum_rate)) <= 1e-9 * scen.n_users


def test_objective_at_trivial_state(rng):
    scen, eff, beam = _instance(rng)
    k = scen.n_users
    trivial = WmmseState(v=np.zeros(k, dtype=complex), alpha=np.ones(k),
                         e=np.ones(k), j_cov=np.ones(k))
    assert wmmse_objective(eff, beam, scen, trivial) == pytest.approx(k)


def test_objective_decreases_under_block_updates(rng):
    """From the canonical (v=0, alpha=1) start, each of the equalizer and
    weight updates can only push the objective down."""
    for _ in range(20):
        scen, eff, beam = _instance(rng)
        k = scen.n_users
        state = WmmseState(v=np.zeros(k, dtype=complex), alpha=np.ones(k),
                           e=np.ones(k), j_cov=np.ones(k))
        values = [wmmse_objective(eff, beam, scen, state)]
        gains = crosslink_gains(eff, beam)
        v, alpha, e, j = equalizers_from_gains(gains, scen.noise_power)
        state.v = v
        values.append(wmmse_objective(eff, beam, scen, state))
        state.alpha = alpha
        values.append(wmmse_objective(eff, beam, scen, state))
        assert values[1] <= values[0] + 1e-12
        assert values[2] <= values[1] + 1e-12


def test_corrupt_state_rejected():
    # negative noise makes the covariance smaller than the signal power,
    # which drives the minimum MSE nonpositive
    with pytest.raises(ValueError, match="MSE"):
        equalizers_from_gains(np.array([[2.0 + 0j]]), -3.0)
