"""Convergence-constant tests: D assembly, round count, bound inversion."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedcran.convergence import (
    ConvergenceConstants,
    error_constant,
    learning_rate,
    loss_gap_bound,
    rounds_for_accuracy,
)
from fedcran.errors import InvalidConfigError


def defaults(**kw):
    return ConvergenceConstants(**kw)


def test_error_constant_default_scenario_frozen_value():
    # frozen from an exact-rational evaluation of the five-term sum
    c = defaults()
    assert error_constant(c, 16) == pytest.approx(0.08970185804523896, rel=1e-12)


def test_error_constant_term_by_term_oracle():
    # independent plain-float transcription of the five terms
    c = defaults(d=1000, G=0.5, I=3, K=8, K_bar=4, sigma_k=np.full(8, 2.0), mu=0.8)
    b = 2**6 - 1
    var = 8 * 4.0 / 64
    wq = 1000 * 1.0 * 1.0 * 0.2 / (4 * b * b)
    drift = 4 * 4 * 0.25
    uq = 4 * 1000 * 9 * 0.25 / (4 * 4 * b * b)
    samp = 4 * 4 * 9 * 0.25 / (4 * 7)
    assert error_constant(c, 6) == pytest.approx(var + wq + drift + uq + samp, rel=1e-12)


def test_error_constant_reduces_to_variance_floor():
    # I = 1 (no drift), K_bar = K (no sampling), huge precision (no quant error)
    c = defaults(I=1, K_bar=16, K=16)
    floor = float(np.sum(c.sigma_k**2)) / c.K**2
    assert error_constant(c, 60) == pytest.approx(floor, rel=1e-9)


def test_error_constant_strictly_decreasing_in_precision():
    c = defaults()
    vals = [error_constant(c, p) for p in range(1, 33)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_error_constant_single_device_population():
    c = defaults(K=1, K_bar=1, sigma_k=np.array([1.0]))
    # sampling term defined as 0; remaining terms finite
    assert np.isfinite(error_constant(c, 8))


def test_rounds_default_scenario_frozen_value():
    c = defaults()
    assert rounds_for_accuracy(c, 16) == pytest.approx(4.329824923380329, rel=1e-12)


def test_rounds_negative_when_target_trivial():
    c = defaults(eps_target=1e9)
    assert rounds_for_accuracy(c, 16) < 0


def test_rounds_monotone_in_target_and_precision():
    tight = defaults(eps_target=1e-3)
    loose = defaults(eps_target=1e-1)
    assert rounds_for_accuracy(tight, 16) > rounds_for_accuracy(loose, 16)
    c = defaults()
    assert rounds_for_accuracy(c, 2) > rounds_for_accuracy(c, 16)


def test_gap_bound_decays_and_matches_t0_value():
    c = defaults()
    D = error_constant(c, 16)
    t0 = c.L * c.beta**2 * D / (2 * c.gamma * (c.beta * c.mu - 1))
    assert loss_gap_bound(c, 16, 0) == pytest.approx(t0, rel=1e-12)
    assert loss_gap_bound(c, 16, 1e9) < 1e-7
    vals = [loss_gap_bound(c, 16, t) for t in range(0, 50, 5)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_inversion_identity_default():
    c = defaults()
    T = rounds_for_accuracy(c, 16)
    assert loss_gap_bound(c, 16, T) == pytest.approx(c.eps_target, rel=1e-12)


@given(
    mu=st.floats(0.1, 0.99),
    L_scale=st.floats(1.0, 50.0),
    G=st.floats(0.0, 5.0),
    d=st.integers(1, 10**7),
    I=st.integers(1, 20),
    K=st.integers(2, 64),
    frac=st.floats(0.1, 1.0),
    gamma=st.floats(0.1, 10.0),
    eps=st.floats(1e-6, 1e-1),
    c_prec=st.integers(1, 32),
    beta_scale=st.floats(1.01, 10.0),
)
@settings(max_examples=300, deadline=None)
def test_property_rounds_invert_gap_bound(
    mu, L_scale, G, d, I, K, frac, gamma, eps, c_prec, beta_scale
):
    K_bar = max(1, int(frac * K))
    c = ConvergenceConstants(
        L=mu * L_scale,
        mu=mu,
        sigma_k=np.ones(K),
        G=G,
        d=d,
        I=I,
        K=K,
        K_bar=K_bar,
        gamma=gamma,
        eps_target=eps,
        beta=beta_scale / mu,
    )
    T = rounds_for_accuracy(c, c_prec)
    if T > 0:
        assert loss_gap_bound(c, c_prec, T) == pytest.approx(eps, rel=1e-9)


def test_learning_rate_schedule():
    c = defaults()
    assert learning_rate(c, 0) == pytest.approx(2.0 / 0.89)
    assert learning_rate(c, 9) == pytest.approx((2.0 / 0.89) / 10.0)
    with pytest.raises(ValueError):
        learning_rate(c, -1)


def test_validation_rejects_bad_constants():
    with pytest.raises(InvalidConfigError):
        defaults(beta=1.0)  # beta*mu = 0.89 <= 1
    with pytest.raises(InvalidConfigError):
        defaults(eps_skew=1.5)
    with pytest.raises(InvalidConfigError):
        defaults(K_bar=20)
    with pytest.raises(InvalidConfigError):
        defaults(sigma_k=np.ones(3))
    with pytest.raises(InvalidConfigError):
        defaults(mu=2.0, L=1.0)
    with pytest.raises(ValueError):
        error_constant(defaults(), 0)
