"""Acceptance gate: one test per criterion, each printing a PASS line.

Every criterion pins its own seeds, scales, tolerances, and wall-clock cap,
so this file is the single place that certifies the package end to end.
Run with -v (or -s to see the PASS lines as they land).
"""

import time

import numpy as np

from _utils import sampled, small_scenario
from fedcran import cli, flsim
from fedcran.convergence import (
    ConvergenceConstants,
    loss_gap_bound,
    rounds_for_accuracy,
)
from fedcran.energy import e_trans_round, payload_bits
from fedcran.flsim import FLRunConfig
from fedcran.harness import ExperimentSpec, load_config, run_experiment
from fedcran.optimizer import (
    _psi_of_bits,
    alternating_optimize,
    fp_power_step,
    fp_y_update,
    optimize_precision,
    sca_fronthaul,
)
from fedcran.quantize import quantization_error_bound, quantize_vector

N_DRAWS = 10_000


def test_criterion_1_quantizer_unbiased_and_bounded():
    """100 random (w, precision) pairs: MC mean within 4 sigma of w and
    empirical squared error within 1.05x of the analytic bound."""
    start = time.monotonic()
    rng = np.random.default_rng(20260814)
    for _ in range(100):
        d = int(rng.integers(2, 65))
        scale = 10.0 ** rng.uniform(-3.0, 3.0)
        w = rng.standard_normal(d) * scale
        c = int(rng.integers(1, 33))

        # tiling preserves the magnitude range, so one call quantizes
        # N_DRAWS independent copies at once
        tiled = np.tile(w, N_DRAWS)
        q = quantize_vector(tiled, c, rng).values.reshape(N_DRAWS, d)

        # exact two-point std per coordinate; the empirical one collapses to
        # zero when no draw flips, which says nothing about unbiasedness
        mag = np.abs(w)
        step = (mag.max() - mag.min()) / (2.0**c - 1.0)
        pos = (mag - mag.min()) / step
        p_up = pos - np.floor(pos)
        sigma = step * np.sqrt(p_up * (1.0 - p_up))
        mean_err = np.abs(q.mean(axis=0) - w)
        assert np.all(mean_err <= 4.0 * sigma / np.sqrt(N_DRAWS)
                      + 3.0 * step / N_DRAWS + 1e-12 * scale)

        emp_sq = float(((q - w) ** 2).sum(axis=1).mean())
        assert emp_sq <= 1.05 * quantization_error_bound(w, c)
    elapsed = time.monotonic() - start
    assert elapsed < 30.0
    print(f"CRITERION 1: PASS - 100 pairs x {N_DRAWS} draws, "
          f"unbiased within 4se, sq error <= 1.05x bound ({elapsed:.1f}s)")


def test_criterion_2_round_count_inverts_gap_bound():
    """Bound evaluated at the required round count returns the accuracy
    target to 1e-9 relative, over 1000 random constant sets."""
    start = time.monotonic()
    rng = np.random.default_rng(22)
    for _ in range(1000):
        L = 10.0 ** rng.uniform(-1.0, 1.0)
        # mu < 1 keeps every error term nonnegative; the gap bound is only
        # meaningful in that regime
        mu = min(L, 1.0) * rng.uniform(0.1, 0.999)
        K = int(rng.integers(1, 33))
        cc = ConvergenceConstants(
            L=L, mu=mu, sigma_k=rng.uniform(0.01, 2.0, K), G=rng.uniform(0.01, 1.0),
            W_bound=rng.uniform(0.01, 2.0), eps_skew=rng.uniform(0.0, 1.0),
            d=int(rng.integers(1, 1_000_000)), gamma=rng.uniform(0.5, 5.0),
            I=int(rng.integers(1, 11)), K=K, K_bar=int(rng.integers(1, K + 1)),
        )
        c_prec = int(rng.integers(1, 33))
        t_probe = 10.0 ** rng.uniform(0.0, 5.0)
        eps = loss_gap_bound(cc, c_prec, t_probe)
        cc = ConvergenceConstants(
            L=cc.L, mu=cc.mu, sigma_k=cc.sigma_k, G=cc.G, W_bound=cc.W_bound,
            eps_skew=cc.eps_skew, d=cc.d, gamma=cc.gamma, I=cc.I, K=cc.K,
            K_bar=cc.K_bar, eps_target=eps,
        )
        t_req = rounds_for_accuracy(cc, c_prec)
        assert abs(loss_gap_bound(cc, c_prec, t_req) - eps) <= 1e-9 * eps
    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    print(f"CRITERION 2: PASS - 1000 inversions exact to 1e-9 rel ({elapsed:.2f}s)")


def test_criterion_3_subsolver_oracles():
    """(a) power step vs 200x200 grid, (b) fronthaul vs exhaustive integers,
    (c) precision search is the brute force."""
    start = time.monotonic()

    # (a) one device, two subcarriers: grid the fixed-y surrogate
    for seed in range(50):
        inst = np.random.default_rng(1000 + seed)
        scn = small_scenario(K=1, M=1, N=2,
                             P_bar=10.0 ** inst.uniform(-2.0, 0.0),
                             G_bar=float(inst.choice([4.0001e7, 6e7, 8e7])))
        ch, alloc = sampled(scn, seed=seed)
        y = fp_y_update(scn, ch, alloc)
        p_opt = fp_power_step(scn, ch, alloc, y)

        g = np.abs(ch.h[0, 0, :]) ** 2
        psi = _psi_of_bits(alloc.c_bits)[0]
        sig2 = float(scn.noise_var)
        pay = payload_bits(scn.chip, 1)
        gpts = np.linspace(0.0, float(scn.P_bar[0]), 200)
        p1, p2 = np.meshgrid(gpts, gpts, indexing="ij")

        def rate(pn, n):
            s = g[n] * pn * psi[n] / (sig2 * psi[n] + 3.0 * (g[n] * pn + sig2))
            return (scn.B / scn.N) * np.log2(1.0 + s)

        surr = (2.0 * y[0] * np.sqrt(rate(p1, 0) + rate(p2, 1))
                - y[0] ** 2 * pay * (p1 + p2))
        surr[p1 + p2 > scn.P_bar[0]] = -np.inf
        oracle = float(surr.max())

        from fedcran.channel import rates_from_psi
        a = rates_from_psi(scn, ch, p_opt, _psi_of_bits(alloc.c_bits))[0]
        achieved = 2.0 * y[0] * np.sqrt(a) - y[0] ** 2 * pay * p_opt[0].sum()
        assert abs(achieved - oracle) <= 1e-3 * abs(oracle)
        assert achieved >= oracle * (1.0 - 1e-3)

    # (b) M=1, N=2, budget 4: six feasible integer splits, enumerated
    from fedcran.channel import fronthaul_bit_budget
    for seed in range(50):
        scn = small_scenario(K=1, M=1, N=2, B=1e7, G_bar=4.0001e7)
        assert fronthaul_bit_budget(scn)[0] == 4
        ch, alloc = sampled(scn, seed=seed)
        best = np.inf
        for c1 in range(1, 4):
            for c2 in range(1, 5 - c1):
                cand = alloc.copy()
                cand.c_bits = np.array([[c1, c2]])
                best = min(best, e_trans_round(scn, ch, cand))
        res = sca_fronthaul(scn, ch, alloc)
        cand = alloc.copy()
        cand.c_bits = res.c_bits
        assert e_trans_round(scn, ch, cand) <= best * 1.05

    # (c) the precision stage is the 32-point brute force
    for seed in range(3):
        scn = small_scenario(K=2, M=2, N=4)
        ch, alloc = sampled(scn, seed=seed)
        from fedcran.energy import expected_total_energy
        best_c, best_val = None, np.inf
        trial = alloc.copy()
        for c in range(1, scn.chip.c_max + 1):
            trial.c_prec = c
            val = expected_total_energy(scn, ch, trial).total
            if val < best_val:
                best_c, best_val = c, val
        assert optimize_precision(scn, ch, alloc) == best_c
    elapsed = time.monotonic() - start
    assert elapsed < 120.0
    print(f"CRITERION 3: PASS - 50 grid, 50 exhaustive, 3 brute-force oracle "
          f"matches ({elapsed:.1f}s)")


def test_criterion_4_monotone_descent_everywhere():
    """50 random feasible scenarios: FP surrogate nondecreasing, SCA true
    energy nonincreasing, outer objective nonincreasing, 1e-9 slack."""
    start = time.monotonic()
    shapes = [(1, 1, 2), (2, 1, 4), (2, 2, 4), (4, 2, 8), (3, 3, 6)]
    for i in range(50):
        inst = np.random.default_rng(3000 + i)
        K, M, N = shapes[i % len(shapes)]
        scn = small_scenario(K=K, M=M, N=N,
                             P_bar=10.0 ** inst.uniform(-2.0, 0.0),
                             G_bar=float(inst.uniform(3e7, 1e8)),
                             radius=float(inst.uniform(50.0, 200.0)))
        ch, _ = sampled(scn, seed=i)
        trace = alternating_optimize(scn, ch)
        for fp in trace.fp_surrogates:
            seq = np.array(fp)
            assert np.all(np.diff(seq) >= -1e-9 * np.abs(seq[:-1]))
        for sca in trace.sca_energies:
            seq = np.array(sca)
            assert np.all(np.diff(seq) <= 1e-9 * np.abs(seq[:-1]))
        obj = np.array(trace.objectives)
        assert np.all(np.diff(obj) <= 1e-9 * np.abs(obj[:-1]))
    elapsed = time.monotonic() - start
    assert elapsed < 300.0
    print(f"CRITERION 4: PASS - 50 scenarios, all inner and outer traces "
          f"monotone within 1e-9 ({elapsed:.1f}s)")


def test_criterion_5_joint_dominates_baselines_on_capacity_sweep():
    """Default scenario, 4-point fronthaul capacity sweep, 20 realizations:
    mean joint <= every baseline, baselines 1-3 <= baseline 4."""
    start = time.monotonic()
    scn, _, _, opt_cfg = load_config(None)
    spec = ExperimentSpec(sweep="G_bar", values=[2e9, 4e9, 6e9, 8e9],
                          realizations=20, seed=0)
    rows, failures = run_experiment(scn, spec, opt_cfg)
    assert not failures
    means = {(r["sweep_value"], r["scheme"]): r["mean_total_J"] for r in rows}
    for v in spec.values:
        joint = means[(v, "joint")]
        for b in ("baseline1", "baseline2", "baseline3", "baseline4"):
            assert joint <= means[(v, b)] * (1 + 1e-9), (v, b)
        for b in ("baseline1", "baseline2", "baseline3"):
            assert means[(v, b)] <= means[(v, "baseline4")] * (1 + 1e-9), (v, b)
    elapsed = time.monotonic() - start
    assert elapsed < 900.0
    print(f"CRITERION 5: PASS - joint <= all baselines and b1-3 <= b4 at "
          f"every capacity point, 20 realizations ({elapsed:.0f}s)")


def test_criterion_6_energy_precision_curve_dips_interior():
    """Energy vs pinned precision on the default scenario has an interior
    minimum in [8, 24] bits."""
    start = time.monotonic()
    scn, _, _, opt_cfg = load_config(None)
    spec = ExperimentSpec(sweep="c_prec", values=list(range(1, 33)),
                          realizations=1, schemes=["joint"], seed=0)
    rows, failures = run_experiment(scn, spec, opt_cfg)
    assert not failures
    vals = {r["sweep_value"]: r["mean_total_J"] for r in rows}
    c_star = min(vals, key=vals.get)
    assert vals[1] > vals[c_star]
    assert vals[32] > vals[c_star]
    assert 8 <= c_star <= 24
    soft = "within" if 11 <= c_star <= 19 else "outside"
    elapsed = time.monotonic() - start
    assert elapsed < 300.0
    print(f"CRITERION 6: PASS - interior optimum c*={c_star} in [8,24] "
          f"({soft} the soft 15±4 reference) ({elapsed:.0f}s)")


def test_criterion_7_fl_simulator_matches_theory():
    """Default quadratic task, 50 seeds: (a) mean final gap nonincreasing in
    precision, (b) high-precision full-participation run closes 99.9% of the
    initial gap by T=200, (c) bound exceedance <= 5%."""
    start = time.monotonic()
    task = flsim.make_task("quadratic", K=16, d=16, samples_per_device=64,
                           mu_reg=0.5, rng=np.random.default_rng(0))

    means = []
    for c in (2, 4, 8, 16):
        finals = [flsim.run_fl(task, FLRunConfig(rounds=100, local_steps=5,
                                                 k_bar=10, c_prec=c, batch=16,
                                                 seed=i)).gaps[-1]
                  for i in range(50)]
        means.append(float(np.mean(finals)))
    assert all(a >= b for a, b in zip(means, means[1:])), means

    tr = flsim.run_fl(task, FLRunConfig(rounds=200, local_steps=5, k_bar=16,
                                        c_prec=32, batch=16, seed=0))
    assert tr.gaps[-1] < 1e-3 * tr.gaps[0]

    rep = flsim.bound_check(task, FLRunConfig(rounds=100, local_steps=5,
                                              k_bar=10, c_prec=16, batch=16,
                                              seed=0), n_seeds=50)
    assert rep.exceed_fraction <= 0.05
    elapsed = time.monotonic() - start
    assert elapsed < 600.0
    print(f"CRITERION 7: PASS - precision-monotone finals, final/initial "
          f"gap {tr.gaps[-1] / tr.gaps[0]:.1e}, exceedance "
          f"{rep.exceed_fraction:.3f} ({elapsed:.0f}s)")


def test_criterion_8_byte_identical_outputs(tmp_path):
    """Identical config and seed produce byte-identical CSV files."""
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("""
scenario:
  K: 2
  M: 2
  N: 4
  B_hz: 1.0e+7
  radius_m: 100
  noise_var_w: 1.0e-13
  P_bar_w: 0.1
  G_bar_bps: 6.0e+7
  P_fl_w_per_bps: 1.0e-10
chip:
  n_mac: 1.0e+4
  n_w: 5.0e+3
  o_s: 50
  I: 5
convergence:
  K_bar: 2
experiment:
  sweep: G_bar
  values: [4.0e+7, 6.0e+7]
  realizations: 3
  seed: 7
fl:
  devices: 4
  dim: 4
  samples_per_device: 16
  k_bar: 2
  batch: 8
  rounds: 5
  c_prec_values: [2, 16]
  n_seeds: 2
""")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(a)]) == 0
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    fa, fb = tmp_path / "fa.csv", tmp_path / "fb.csv"
    assert cli.main(["flsim", "--config", str(cfg), "--out", str(fa)]) == 0
    assert cli.main(["flsim", "--config", str(cfg), "--out", str(fb)]) == 0
    assert fa.read_bytes() == fb.read_bytes()
    print("CRITERION 8: PASS - repeated sweep and FL runs byte-identical")
