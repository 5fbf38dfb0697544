"""FL simulator tests: task construction, local SGD oracles, aggregation law,
convergence behavior, and the theoretical bound hookup."""

import dataclasses

import numpy as np
import pytest

from fedcran import flsim
from fedcran.convergence import loss_gap_bound
from fedcran.errors import InvalidConfigError, SimulationDivergedError
from fedcran.flsim import FLRunConfig


def quad_task(seed=7, K=6, d=8, n=32):
    return flsim.make_task("quadratic", K=K, d=d, samples_per_device=n,
                           mu_reg=0.5, rng=np.random.default_rng(seed))


def d1_task(seed=5, K=4, n=16):
    return flsim.make_task("quadratic", K=K, d=1, samples_per_device=n,
                           mu_reg=0.5, rng=np.random.default_rng(seed))


# ------------------------------------------------------------ task building


def test_zero_data_identity_reg_optimum_at_origin():
    # only the l2 term remains, so F(w) = 0.5 ||w||^2 exactly
    xs = [np.zeros((4, 3))] * 2
    ys = [np.zeros(4)] * 2
    task = flsim.task_from_data("quadratic", xs, ys, mu_reg=1.0)
    assert np.allclose(task.w_star, 0.0, atol=1e-12)
    assert abs(task.f_star) <= 1e-15
    assert task.L == pytest.approx(1.0)
    assert task.mu == 1.0
    w = np.array([0.3, -0.4, 0.1])
    assert task.global_loss(w) == pytest.approx(0.5 * float(w @ w))


def test_smoothness_dominates_strong_convexity():
    for kind in ("quadratic", "l2-logistic"):
        task = flsim.make_task(kind, K=3, d=6, samples_per_device=20, mu_reg=0.5,
                               rng=np.random.default_rng(1))
        assert task.L >= task.mu


def test_logistic_strong_convexity_equals_regularizer():
    task = flsim.make_task("l2-logistic", K=3, d=4, samples_per_device=16,
                           mu_reg=0.25, rng=np.random.default_rng(2))
    assert task.mu == 0.25


def test_certified_gap_never_negative():
    task = quad_task()
    assert task.loss_gap(task.w_star) >= 0.0
    assert task.loss_gap(task.w_star) <= 1e-10
    rng = np.random.default_rng(3)
    for _ in range(20):
        assert task.loss_gap(rng.uniform(-1, 1, task.d)) >= 0.0


def test_gradient_vanishes_at_optimum():
    for kind in ("quadratic", "l2-logistic"):
        task = flsim.make_task(kind, K=3, d=5, samples_per_device=24, mu_reg=0.5,
                               rng=np.random.default_rng(4))
        assert np.linalg.norm(task.global_grad(task.w_star)) <= 1e-10


def test_task_validation():
    with pytest.raises(InvalidConfigError):
        flsim.task_from_data("cubic", [np.zeros((2, 2))], [np.zeros(2)], 0.5)
    with pytest.raises(InvalidConfigError):
        flsim.task_from_data("quadratic", [np.zeros((2, 2))], [np.zeros(2)], 0.0)
    with pytest.raises(InvalidConfigError):
        flsim.make_task("quadratic", 0, 2, 4, 0.5, np.random.default_rng(0))


def test_measured_stats_present_and_positive():
    task = quad_task()
    assert task.G > 0.0
    assert task.sigma1_k.shape == (task.K,)
    assert np.all(task.sigma1_k >= 0.0)


# ------------------------------------------------------------- local solver


def test_local_sgd_zero_steps_returns_zero_update():
    task = quad_task()
    rng = np.random.default_rng(0)
    upd = flsim.local_sgd(task, 0, np.full(task.d, 0.2), 16, 0, 0.1, 8, rng)
    assert np.all(upd == 0.0)


def test_local_sgd_zero_lr_returns_zero_update():
    task = quad_task()
    rng = np.random.default_rng(0)
    upd = flsim.local_sgd(task, 1, np.full(task.d, 0.2), 16, 3, 0.0, 8, rng)
    assert np.all(upd == 0.0)


def test_local_sgd_exact_recurrence_scalar():
    # d = 1 makes the quantizer grid degenerate, so quantization is exact and
    # full-batch SGD must match the deterministic gradient recurrence bit for bit
    task = d1_task()
    n = task.features[0].shape[0]
    w0 = np.array([0.37])
    lr = 0.05
    upd = flsim.local_sgd(task, 0, w0, 1, 4, lr, n, np.random.default_rng(0))
    w = w0.copy()
    for _ in range(4):
        w = w - lr * task.device_grad(0, w)
    assert np.allclose(upd, w - w0, rtol=0, atol=0)


def test_local_sgd_full_batch_near_recurrence_high_precision():
    task = quad_task(d=8)
    n = task.features[0].shape[0]
    w0 = np.full(8, 0.2)
    lr = 0.05
    upd = flsim.local_sgd(task, 2, w0, 32, 5, lr, n, np.random.default_rng(1))
    w = w0.copy()
    for _ in range(5):
        w = w - lr * task.device_grad(2, w)
    assert np.allclose(upd, w - w0, rtol=1e-6, atol=1e-9)


def test_local_sgd_rejects_oversized_batch_and_bad_start():
    task = quad_task()
    with pytest.raises(InvalidConfigError):
        flsim.local_sgd(task, 0, np.zeros(task.d), 16, 1, 0.1, 10_000,
                        np.random.default_rng(0))
    with pytest.raises(SimulationDivergedError):
        flsim.local_sgd(task, 0, np.full(task.d, np.inf), 16, 1, 0.1, 8,
                        np.random.default_rng(0))


# -------------------------------------------------------------- aggregation


def test_full_participation_round_is_fedavg_step():
    task = d1_task()
    n = task.features[0].shape[0]
    cfg = FLRunConfig(rounds=1, local_steps=1, k_bar=task.K, c_prec=8, batch=n, seed=0)
    w0 = np.array([0.25])
    w1, stats = flsim.fl_round(task, w0, cfg, np.random.default_rng(0), t=0)
    lr = flsim.learning_rate_at(task, cfg, 0)
    expected = w0 - lr * np.mean([task.device_grad(k, w0) for k in range(task.K)], axis=0)
    assert np.allclose(w1, expected, rtol=0, atol=1e-15)
    assert stats["update_norms"].shape == (task.K,)


def test_partial_participation_shrinks_by_sampled_fraction():
    # identical devices, exact quantization: every sampled update equals u,
    # so the aggregate is (K_bar / K) * u regardless of which devices land
    rng = np.random.default_rng(9)
    x = rng.standard_normal((16, 1))
    y = x[:, 0] * 0.3
    task = flsim.task_from_data("quadratic", [x] * 5, [y] * 5, mu_reg=0.5)
    cfg = FLRunConfig(rounds=1, local_steps=1, k_bar=2, c_prec=8, batch=16, seed=0)
    w0 = np.array([0.5])
    w1, _ = flsim.fl_round(task, w0, cfg, np.random.default_rng(1), t=0)
    u = -flsim.learning_rate_at(task, cfg, 0) * task.device_grad(0, w0)
    assert np.allclose(w1 - w0, (2 / 5) * u, rtol=0, atol=1e-16)


def test_round_mean_matches_sampling_expectation():
    # Monte-Carlo oracle: E[w1 - w0] = (K_bar / K) * mean_k u_k
    task = flsim.make_task("quadratic", K=5, d=4, samples_per_device=16, mu_reg=0.5,
                           rng=np.random.default_rng(11))
    cfg = FLRunConfig(rounds=1, local_steps=1, k_bar=2, c_prec=32, batch=16, seed=0)
    w0 = np.zeros(4)
    lr = flsim.learning_rate_at(task, cfg, 0)
    rng = np.random.default_rng(42)
    draws = np.array([flsim.fl_round(task, w0, cfg, rng, t=0)[0] - w0
                      for _ in range(2000)])
    expected = (2 / 5) * np.mean([-lr * task.device_grad(k, w0) for k in range(5)],
                                 axis=0)
    err = np.abs(draws.mean(axis=0) - expected)
    assert np.all(err <= 4 * draws.std(axis=0) / np.sqrt(2000) + 1e-12)


def test_round_rejects_oversampling():
    task = quad_task()
    cfg = FLRunConfig(rounds=1, local_steps=1, k_bar=task.K + 1, c_prec=8,
                      batch=8, seed=0)
    with pytest.raises(InvalidConfigError):
        flsim.fl_round(task, np.zeros(task.d), cfg, np.random.default_rng(0))


# ---------------------------------------------------------------- full runs


def test_zero_rounds_trace_has_initial_gap_only():
    task = quad_task()
    tr = flsim.run_fl(task, FLRunConfig(rounds=0, local_steps=1, k_bar=2,
                                        c_prec=8, batch=8, seed=0))
    assert tr.gaps.shape == (1,)
    assert tr.rounds_completed == 0
    assert not tr.diverged
    assert np.all(tr.w_final == 0.0)


def test_gap_shrinks_under_full_batch_full_participation():
    task = quad_task()
    n = task.features[0].shape[0]
    good = 0
    for s in range(10):
        cfg = FLRunConfig(rounds=60, local_steps=5, k_bar=task.K, c_prec=32,
                          batch=n, seed=s)
        g = flsim.run_fl(task, cfg).gaps
        good += g[-1] < g[5] / 10
    assert good >= 9


def test_final_gap_improves_with_precision():
    # full batch + full participation isolates quantization as the only noise
    task = quad_task()
    n = task.features[0].shape[0]
    means = []
    for c in (2, 8, 32):
        finals = [flsim.run_fl(task, FLRunConfig(rounds=60, local_steps=5,
                                                 k_bar=task.K, c_prec=c,
                                                 batch=n, seed=100 + i)).gaps[-1]
                  for i in range(10)]
        means.append(np.mean(finals))
    assert means[0] >= means[1] >= means[2]
    assert means[0] > 10 * means[1]


def test_precision_one_and_max_identical_for_scalar_model():
    # d = 1 collapses the quantizer grid, so precision cannot matter
    task = d1_task()
    mk = lambda c: FLRunConfig(rounds=30, local_steps=3, k_bar=2, c_prec=c,
                               batch=8, seed=4)
    g1 = flsim.run_fl(task, mk(1)).gaps
    g32 = flsim.run_fl(task, mk(32)).gaps
    assert np.array_equal(g1, g32)


def test_run_is_deterministic_per_seed():
    task = quad_task()
    cfg = FLRunConfig(rounds=20, local_steps=3, k_bar=3, c_prec=8, batch=8, seed=12)
    a = flsim.run_fl(task, cfg)
    b = flsim.run_fl(task, cfg)
    assert np.array_equal(a.gaps, b.gaps)
    assert np.array_equal(a.w_final, b.w_final)


def test_divergence_is_flagged_not_raised():
    # corrupt one device's data; the run must truncate and flag, not raise
    task = quad_task()
    task.features[0][0, 0] = np.inf
    n = task.features[0].shape[0]
    cfg = FLRunConfig(rounds=5, local_steps=2, k_bar=task.K, c_prec=16,
                      batch=n, seed=0)
    with np.errstate(invalid="ignore"):
        tr = flsim.run_fl(task, cfg)
    assert tr.diverged
    assert tr.rounds_completed < 5
    assert tr.gaps.shape == (tr.rounds_completed + 1,)


def test_weight_sup_norm_tracked_within_clip_bound():
    task = quad_task()
    tr = flsim.run_fl(task, FLRunConfig(rounds=20, local_steps=3, k_bar=3,
                                        c_prec=8, batch=8, seed=1))
    assert 0.0 < tr.w_inf_max <= 1.0


def test_config_validation():
    for kw in ({"rounds": -1}, {"local_steps": 0}, {"k_bar": 0}, {"batch": 0},
               {"c_prec": 0}, {"c_prec": 33}):
        with pytest.raises(InvalidConfigError):
            FLRunConfig(**kw)


# ------------------------------------------------------------- bound hookup


def test_bound_constants_rescale_noise_with_batch():
    task = quad_task()
    n = task.features[0].shape[0]
    full = flsim.bound_constants(task, FLRunConfig(batch=n, k_bar=2))
    single = flsim.bound_constants(task, FLRunConfig(batch=1, k_bar=2))
    assert np.allclose(full.sigma_k, 0.0)
    assert np.allclose(single.sigma_k, task.sigma1_k)


def test_bound_constants_require_measured_task():
    task = flsim.task_from_data("quadratic", [np.eye(3)], [np.zeros(3)], 0.5)
    with pytest.raises(InvalidConfigError):
        flsim.bound_constants(task, FLRunConfig(k_bar=1))


def test_bound_monotone_in_gradient_norm_bound():
    task = quad_task()
    cc = flsim.bound_constants(task, FLRunConfig(k_bar=2, batch=8))
    doubled = dataclasses.replace(cc, G=2 * cc.G)
    for t in (1, 10, 100):
        assert loss_gap_bound(doubled, 8, t) >= loss_gap_bound(cc, 8, t)


def test_bound_check_reports_low_exceedance():
    task = quad_task()
    rep = flsim.bound_check(task, FLRunConfig(rounds=40, local_steps=5, k_bar=3,
                                              c_prec=16, batch=16, seed=0),
                            n_seeds=5)
    assert rep.n_pairs == 200
    assert rep.exceed_fraction <= 0.05
    assert rep.diverged_runs == 0
    assert rep.mean_final_gap >= 0.0


def test_trace_records_schema():
    task = quad_task()
    cfg = FLRunConfig(rounds=10, local_steps=3, k_bar=3, c_prec=8, batch=8, seed=2)
    tr = flsim.run_fl(task, cfg)
    rows = flsim.trace_records(task, cfg, tr)
    assert len(rows) == 11
    assert set(rows[0]) == {"round", "loss_gap", "bound_value", "c_prec", "seed"}
    assert np.isnan(rows[0]["bound_value"])
    assert rows[3]["loss_gap"] == pytest.approx(tr.gaps[3])
    assert rows[3]["bound_value"] > 0.0


def test_learning_rate_decays_over_rounds():
    task = quad_task()
    cfg = FLRunConfig(k_bar=2)
    rates = [flsim.learning_rate_at(task, cfg, t) for t in range(5)]
    assert all(a > b for a, b in zip(rates, rates[1:]))
    assert rates[0] <= 1.0 / (2.0 * task.L) + 1e-12
