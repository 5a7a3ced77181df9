"""Acceptance gate: the ten release criteria, one test per criterion.

Each test prints a PASS/FAIL line with the measured numbers. "Mean MSE"
means dB of the Monte-Carlo mean linear error ratio. Heavy 200-seed
scenario runs are shared through module-scoped fixtures.
"""

import time

import numpy as np
import pytest
import scipy.stats

from dpsbl import bench, estimator
from dpsbl.simulate import SystemConfig, generate_cluster_map, simulate, substream


def _verdict(name: str, ok: bool, detail: str) -> None:
    print(f"\n{name} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


def _seed_values(rows, method, sweep_value=None):
    out = {}
    for r in rows:
        if r.method == method and (sweep_value is None or r.sweep_value == sweep_value):
            out[r.seed] = r.mse_db
    return out


def _mean_mse(rows, method, sweep_value=None):
    vals = np.array(list(_seed_values(rows, method, sweep_value).values()))
    return 10.0 * np.log10(np.mean(10.0 ** (vals / 10.0)))


def _run(spec):
    t0 = time.perf_counter()
    report = bench.run_experiment(spec)
    elapsed = time.perf_counter() - t0
    assert report.n_failed == 0, f"{report.n_failed} runs diverged"
    return report, elapsed


BASE = SystemConfig()  # Table II scenario: 10x10 grid, L=64, S=8, N=28, SNR=10 dB
N_SEEDS = 200


@pytest.fixture(scope="module")
def table2():
    """All four methods at p=1 and p=0.8 in the reference scenario."""
    spec = bench.ExperimentSpec("mse_vs_p", [1.0, 0.8], BASE, n_seeds=N_SEEDS, master_seed=7)
    return _run(spec)


@pytest.fixture(scope="module")
def crossover():
    """All four methods at p=0.5 and p=1 with SNR=8 dB, N=24."""
    cfg = BASE.override(snr_db=8.0, n_pilots=24)
    spec = bench.ExperimentSpec("mse_vs_p", [0.5, 1.0], cfg, n_seeds=N_SEEDS, master_seed=11)
    return _run(spec)


@pytest.fixture(scope="module")
def iteration_curves():
    """Per-iteration mean MSE of DirichletMP and GivenCluster."""
    spec = bench.ExperimentSpec(
        "mse_vs_iter", list(range(1, 21)), BASE,
        methods=["DirichletMP", "GivenCluster"], n_seeds=N_SEEDS, master_seed=21,
    )
    report, _ = _run(spec)
    curves = {}
    for method in ("DirichletMP", "GivenCluster"):
        curves[method] = np.array(
            [_mean_mse(report.rows, method, float(it)) for it in range(1, 21)]
        )
    return curves


def test_c1_cluster_counts():
    t0 = time.perf_counter()
    means = {}
    for p in (1.0, 0.0, 0.8):
        counts = [
            generate_cluster_map(10, 10, p, substream([17, s], 0)).n_clusters
            for s in range(10_000)
        ]
        means[p] = float(np.mean(counts))
    elapsed = time.perf_counter() - t0
    ok = means[1.0] == 1.0 and means[0.0] == 100.0 and 6.0 <= means[0.8] <= 10.0 and elapsed < 10.0
    _verdict(
        "C1 cluster counts",
        ok,
        f"mean clusters p=1: {means[1.0]}, p=0: {means[0.0]}, "
        f"p=0.8: {means[0.8]:.2f} (need [6,10]), elapsed {elapsed:.1f}s (<10s)",
    )


def test_c2_gamp_vs_exact():
    cfg = SystemConfig(rows=1, cols=1, n_total=8, channel_len=8, n_nonzero=2,
                       n_pilots=8, p=1.0, snr_db=5.0, max_iters=50, seed=0)
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for trial in range(100):
        _, _, obs = simulate(cfg, entropy=[2, trial])
        gamma = 10.0 ** rng.uniform(-1.0, 2.0, size=(1, 8))
        lam = 10.0 ** rng.uniform(0.0, 1.5)
        report = estimator.run(
            cfg, obs, phi_fixed=np.ones((1, 1)), fixed_gamma_mean=gamma,
            learn_lambda=False, lambda_init=lam, prune_ratio=None,
        )
        b = obs.pilots[:, None] * obs.dictionary
        prec = lam * b.conj().T @ b + np.diag(gamma[0])
        ref = np.linalg.solve(prec, lam * b.conj().T @ obs.received[0])
        worst = max(worst, np.linalg.norm(report.alpha_hat[0] - ref) / np.linalg.norm(ref))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-2 and elapsed < 5.0
    _verdict(
        "C2 GAMP vs exact posterior",
        ok,
        f"max relative error {worst:.2e} (<1e-2) over 100 instances, elapsed {elapsed:.1f}s (<5s)",
    )


def test_c3_ordering_p1(table2):
    report, elapsed = table2
    dp = _mean_mse(report.rows, "DirichletMP", 1.0)
    gc = _mean_mse(report.rows, "GivenCluster", 1.0)
    sep = _mean_mse(report.rows, "Separate", 1.0)
    ok = abs(dp - gc) <= 1.0 and sep - dp >= 2.0 and elapsed < 600.0
    _verdict(
        "C3 ordering at p=1",
        ok,
        f"DP {dp:.2f} GC {gc:.2f} Sep {sep:.2f} dB; |DP-GC|={abs(dp - gc):.3f} (<=1), "
        f"Sep-DP={sep - dp:.2f} (>=2), elapsed {elapsed:.0f}s (<600s)",
    )


def test_c4_ordering_p08(table2):
    report, _ = table2
    dp = _mean_mse(report.rows, "DirichletMP", 0.8)
    gc = _mean_mse(report.rows, "GivenCluster", 0.8)
    sep = _mean_mse(report.rows, "Separate", 0.8)
    tstats = {}
    for hi, lo in (("Separate", "DirichletMP"), ("DirichletMP", "GivenCluster")):
        a = _seed_values(report.rows, hi, 0.8)
        b = _seed_values(report.rows, lo, 0.8)
        diff = np.array([10 ** (a[s] / 10.0) - 10 ** (b[s] / 10.0) for s in sorted(a)])
        t = scipy.stats.ttest_1samp(diff, 0.0, alternative="greater")
        tstats[f"{hi}>{lo}"] = (t.statistic, t.pvalue)
    ok = gc <= dp <= sep and all(p < 0.05 for _, p in tstats.values())
    detail = ", ".join(f"{k}: t={t:.1f} p={p:.1e}" for k, (t, p) in tstats.items())
    _verdict(
        "C4 ordering at p=0.8",
        ok,
        f"GC {gc:.2f} <= DP {dp:.2f} <= Sep {sep:.2f} dB; paired one-sided {detail}",
    )


def test_c5_robustness_crossover(crossover):
    report, _ = crossover
    scs = _mean_mse(report.rows, "ScsArray", 0.5)
    sep = _mean_mse(report.rows, "Separate", 0.5)
    dp = _mean_mse(report.rows, "DirichletMP", 0.5)
    scs1 = _mean_mse(report.rows, "ScsArray", 1.0)
    gc1 = _mean_mse(report.rows, "GivenCluster", 1.0)
    ok = scs > sep and scs > dp + 1.0 and abs(scs1 - gc1) <= 0.5
    _verdict(
        "C5 robustness crossover",
        ok,
        f"p=0.5: Scs {scs:.2f} > Sep {sep:.2f}, Scs-DP={scs - dp:.2f} (>1); "
        f"p=1: |Scs-GC|={abs(scs1 - gc1):.3f} (<=0.5)",
    )


def test_c6_convergence(iteration_curves):
    firsts = {}
    for method, curve in iteration_curves.items():
        firsts[method] = int(np.argmax(curve - curve[-1] <= 0.5)) + 1
    dp_curve = iteration_curves["DirichletMP"]
    tail_change = abs(dp_curve[14] - dp_curve[19])
    gap = abs(firsts["DirichletMP"] - firsts["GivenCluster"])
    ok = tail_change <= 0.1 and gap <= 2
    _verdict(
        "C6 convergence",
        ok,
        f"DP |iter15-iter20|={tail_change:.3f} dB (<=0.1); within-0.5dB index "
        f"DP={firsts['DirichletMP']} GC={firsts['GivenCluster']} (|diff|<=2)",
    )


def test_c7_separate_invariance():
    spec = bench.ExperimentSpec(
        "mse_vs_p", [0.5, 0.8, 1.0], BASE, methods=["Separate"],
        n_seeds=N_SEEDS, master_seed=13,
    )
    report, _ = _run(spec)
    means = [float(_mean_mse(report.rows, "Separate", p)) for p in (0.5, 0.8, 1.0)]
    spread = max(means) - min(means)
    ok = spread <= 0.3
    _verdict(
        "C7 Separate invariance to p",
        ok,
        f"means {[round(m, 2) for m in means]} dB at p=0.5/0.8/1, spread {spread:.3f} (<=0.3)",
    )


def test_c8_complexity_scaling():
    def median_time(cfg):
        _, _, obs = simulate(cfg, entropy=0)
        times = []
        for _ in range(5):
            t0 = time.perf_counter()
            estimator.run(cfg, obs)
            times.append(time.perf_counter() - t0)
        return float(np.median(times))

    t_m = median_time(BASE.override(rows=5, cols=10))
    t_2m = median_time(BASE)
    ratio_m = t_2m / t_m
    t_l = median_time(BASE.override(channel_len=32, n_nonzero=4))
    t_2l = median_time(BASE.override(n_nonzero=4))
    ratio_l = t_2l / t_l
    ok = 1.6 <= ratio_m <= 2.6 and ratio_l <= 2.6
    _verdict(
        "C8 complexity scaling",
        ok,
        f"doubling M (50->100): x{ratio_m:.2f} (need [1.6,2.6]); "
        f"doubling L (32->64): x{ratio_l:.2f} (need <=2.6)",
    )


def test_c9_invariant_suite():
    rng = np.random.default_rng(9)
    cfg = SystemConfig(rows=2, cols=3, n_total=64, channel_len=8, n_nonzero=2,
                       n_pilots=8, truncation=4)
    failures = 0
    for case in range(1000):
        _, _, obs = simulate(cfg, entropy=[9, case])
        state = estimator.initialize(cfg, obs)
        state.alpha_hat = rng.standard_normal((6, 8)) + 1j * rng.standard_normal((6, 8))
        state.alpha_var = 10.0 ** rng.uniform(-3, 1, size=(6, 8))
        estimator.update_gamma(state, cfg.hyper)
        estimator.update_pi(state)
        estimator.update_phi(state)
        ok = True
        # assignment rows are probability vectors
        ok &= bool(np.all(state.phi >= 0.0) and np.allclose(state.phi.sum(axis=1), 1.0))
        # belief parameters stay positive
        ok &= bool(np.all(state.gamma_shape > 0) and np.all(state.gamma_rate > 0))
        ok &= bool(np.all(state.alpha_var > 0) and np.all(state.tau1 > 0) and np.all(state.tau2 > 0))
        # softmax shift invariance: a common offset on the component scores
        # leaves the assignment unchanged
        phi_ref = state.phi.copy()
        state.log_pi = state.log_pi + rng.uniform(-5.0, 5.0)
        estimator.update_phi(state)
        ok &= bool(np.allclose(state.phi, phi_ref, atol=1e-12))
        # permutation equivariance: permuting antennas permutes assignments
        perm = rng.permutation(6)
        state.alpha_hat = state.alpha_hat[perm]
        state.alpha_var = state.alpha_var[perm]
        estimator.update_phi(state)
        ok &= bool(np.allclose(state.phi, phi_ref[perm], atol=1e-12))
        # digamma recurrence
        x = 10.0 ** rng.uniform(-2, 2, size=8)
        ok &= bool(
            np.max(np.abs(estimator.digamma(x + 1.0) - estimator.digamma(x) - 1.0 / x)) < 1e-8
        )
        failures += not ok
    _verdict("C9 invariant suite", failures == 0, f"{failures} of 1000 randomized cases failed")


def test_c10_csv_determinism(tmp_path):
    from click.testing import CliRunner

    from dpsbl.cli import main

    cfg = tmp_path / "small.cfg"
    cfg.write_text(
        "rows = 2\ncols = 2\nn_total = 64\nchannel_len = 16\nn_nonzero = 3\n"
        "n_pilots = 16\nsnr_db = 15.0\nmax_iters = 3\n"
    )
    outputs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        result = CliRunner().invoke(
            main,
            [
                "run", "--experiment", "mse_vs_snr", "--config", str(cfg),
                "--sweep", "10,15", "--seeds", "2", "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        outputs.append(out.read_bytes())
    ok = outputs[0] == outputs[1] and len(outputs[0]) > 0
    _verdict("C10 CSV determinism", ok, f"two runs wrote {len(outputs[0])} identical bytes")
