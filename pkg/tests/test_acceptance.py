"""End-to-end acceptance suite.

One test per headline property, each printing a single PASS/FAIL line.
Configurations and tolerances are pinned here; the suite is slow (tens of
minutes) and is meant to be run as a whole before a release.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from rwsre.environment import DriftLaw, EnvironmentSpec, GapLaw, sample_environment
from rwsre.limits import ThetaSampler, theta_laplace
from rwsre.quenched import (
    barrier_visit_moments,
    censored_excess_moments,
    compute_potentials,
    crossing_moments,
    excursion_moments,
    exit_probabilities,
)
from rwsre.rng import substream
from rwsre.stats import ks_critical, ks_test, mean_ci, variance_ci
from rwsre.verify import ExperimentConfig, quenched_functionals, run_experiment
from rwsre.walk import (
    block_passage,
    direct_crossing,
    direct_passage,
    reduced_passage,
    sample_excursion,
    sample_reflected_passage,
    transition_array,
)

from conftest import small_env

DRIFT_A = DriftLaw(atoms=((1 / 3, 1 / 3), (3 / 4, 2 / 3)))
DRIFT_B = DriftLaw(atoms=((1 / 3, 1 / 4), (3 / 4, 3 / 4)))

SPEC_15 = EnvironmentSpec(GapLaw(beta=1.5), DRIFT_A)
SPEC_10 = EnvironmentSpec(GapLaw(beta=1.0), DRIFT_A)
SPEC_08 = EnvironmentSpec(GapLaw(beta=0.8), DRIFT_B)
SPEC_12 = EnvironmentSpec(GapLaw(beta=1.2), DRIFT_A)


def report_line(name, ok, detail=""):
    flag = "PASS" if ok else "FAIL"
    print(f"[acceptance] {name}: {flag}" + (f"  ({detail})" if detail else ""),
          flush=True)


def _left_variance_share(env, n):
    """Oracle: exact share of Var_omega T_n not captured by the right parts.

    Per crossing over a gap xi anchored at W = W_{k-1}, the segment walk
    (reflected at the anchor, absorbed at the far end) has duration U and
    anchor-visit count M with exact moments E U = xi^2, Var U =
    (2/3)(xi^4 - xi^2), E M = xi, Var M = xi(xi - 1) and Cov(U, M) =
    (2/3) xi (xi^2 - 1); each visit splices in a compound-geometric left
    bundle of mean 2W.  The left-related variance is therefore the marginal
    left variance plus twice the cross term 2W * Cov(U, M).  Same formulas
    with xi -> n - S_{nu-1} for the final partial stretch.
    """
    from rwsre.quenched import cumulative_moments

    pot = compute_potentials(env)
    nu = env.nu(n)
    g = float(n - env.site(nu - 1))
    w_fin = pot.w_at(nu - 1)
    ef, vf = excursion_moments(pot, nu - 1)
    rho = env.rho_at(nu - 1)
    var_r = (2.0 / 3.0) * (g**4 - g**2)
    var_l = g * rho * vf + (g * g * rho * rho + g * rho) * ef * ef
    cross = 2.0 * (2.0 * w_fin) * (2.0 / 3.0) * g * (g * g - 1.0)
    if nu > 1:
        qm = cumulative_moments(pot, nu - 1)
        var_r += qm.cum_var_right[-1]
        var_l += qm.cum_var_left[-1]
        cross += np.sum(
            2.0 * (2.0 * qm.W_prev) * (2.0 / 3.0) * qm.xi * (qm.xi**2 - 1.0))
    return 1.0 - var_r / (var_r + var_l + cross)


def test_01_reflected_passage_moments():
    ok = True
    details = []
    rng = substream(1001, "refl")
    for n in (1, 5, 20):
        u = sample_reflected_passage(n, 1_000_000, rng).astype(float)
        se = u.std() / np.sqrt(len(u))
        mean_ok = abs(u.mean() - n * n) <= 3 * se if se > 0 else u.mean() == n * n
        var_target = (2 / 3) * (n**4 - n**2)
        var_ok = (u.var() == var_target == 0) if var_target == 0 else \
            abs(u.var() - var_target) <= 0.05 * var_target
        ok &= bool(mean_ok and var_ok)
        details.append(f"n={n}: mean {u.mean():.3f}/{n * n}, var {u.var():.1f}/{var_target:.1f}")
    report_line("1 reflected passage moments", ok, "; ".join(details))
    assert ok


def _tridiagonal_oracle(p_right, pos0, i_site, k_site, j_site):
    m = j_site - i_site + 1
    A = np.zeros((m, m))
    b = np.zeros(m)
    A[0, 0] = 1.0
    A[-1, -1] = 1.0
    b[-1] = 1.0
    for x in range(i_site + 1, j_site):
        r = x - i_site
        pr = p_right[x - pos0]
        A[r, r - 1] = -(1.0 - pr)
        A[r, r] = 1.0
        A[r, r + 1] = -pr
    return np.linalg.solve(A, b)[k_site - i_site]


def test_02_exit_probabilities():
    rng = substream(1002, "exit")
    worst = 0.0
    for _ in range(50):
        xi = rng.integers(1, 9, size=7)
        lam = rng.choice([1 / 3, 3 / 4], size=7)
        env = small_env(SPEC_15, xi, lam)
        pot = compute_potentials(env)
        p_right, pos0 = transition_array(env)
        i, k, j = 0, rng.integers(1, 6), 6
        k = int(k)
        up, _ = exit_probabilities(pot, i, k, j)
        oracle = _tridiagonal_oracle(p_right, pos0, env.site(i), env.site(k), env.site(j))
        worst = max(worst, abs(up - oracle))
    analytic_ok = worst <= 1e-10

    # MC frequency check on one environment
    env = small_env(SPEC_15, [2, 4, 3, 5, 2], [3 / 4, 3 / 4, 1 / 3, 3 / 4, 3 / 4])
    pot = compute_potentials(env)
    up, _ = exit_probabilities(pot, 0, 2, 4)
    p_right, pos0 = transition_array(env)
    reps = 100_000
    gen = substream(1002, "mc")
    i_site, k_site, j_site = env.site(0), env.site(2), env.site(4)
    hits = 0
    for _ in range(reps):
        x = k_site
        while i_site < x < j_site:
            x += 1 if gen.random() < p_right[x - pos0] else -1
        hits += x == j_site
    phat = hits / reps
    se = np.sqrt(up * (1 - up) / reps)
    mc_ok = abs(phat - up) <= 2.6 * se

    ok = analytic_ok and mc_ok
    report_line("2 exit probabilities", ok,
                f"worst oracle gap {worst:.2e}, MC {phat:.4f} vs {up:.4f}")
    assert ok


def test_03_quenched_moment_formulas():
    rng = substream(1003, "envs")
    reps = 100_000
    ok = True
    fails = []
    for e in range(5):
        xi = rng.integers(1, 11, size=7)
        lam = rng.choice([1 / 3, 3 / 4], size=7)
        env = small_env(SPEC_15, xi, lam)
        pot = compute_potentials(env)
        k = 4
        mom = crossing_moments(pot, k)
        cs = direct_crossing(env, k, reps, substream(1003, "mc", e), barrier=1)
        checks = {
            "mean_left": (mom["mean_left"], cs["t_left"]),
            "mean_right": (mom["mean_right"], cs["t_right"]),
        }
        for name, (val, sample) in checks.items():
            _, lo, hi = mean_ci(sample.astype(float))
            if not lo <= val <= hi:
                ok = False
                fails.append(f"env{e}/{name}")
        for name, val, sample in (
            ("var_left", mom["var_left"], cs["t_left"]),
            ("var_right", mom["var_right"], cs["t_right"]),
        ):
            v, lo, hi = variance_ci(sample.astype(float))
            if not (lo <= val <= hi or val == v == 0.0):
                ok = False
                fails.append(f"env{e}/{name}")
        # excursion and barrier formulas
        ef, vf = excursion_moments(pot, k)
        f = sample_excursion(env, k, reps, substream(1003, "exc", e)).astype(float)
        _, lo, hi = mean_ci(f)
        if not lo <= ef <= hi:
            ok = False
            fails.append(f"env{e}/excursion_mean")
        _, vlo, vhi = variance_ci(f)
        if not vlo <= vf <= vhi:
            ok = False
            fails.append(f"env{e}/excursion_var")
        bm, bv = barrier_visit_moments(pot, 1, k)
        _, lo, hi = mean_ci(cs["barrier_visits"].astype(float))
        if not lo <= bm <= hi:
            ok = False
            fails.append(f"env{e}/barrier_mean")
        cm, cv = censored_excess_moments(pot, 1, k)
        _, lo, hi = mean_ci(cs["censored_time"].astype(float))
        if not lo <= cm <= hi:
            ok = False
            fails.append(f"env{e}/censored_mean")
    report_line("3 quenched moment formulas", ok,
                "all CIs hit" if ok else "misses: " + ",".join(fails))
    assert ok


def test_04_theta_sampler():
    rng = substream(1004, "theta")
    two = 2.0 * ThetaSampler().sample(rng, 1_000_000)
    se = two.std() / np.sqrt(len(two))
    mean_ok = abs(two.mean() - 1.0) <= 3 * se
    var_ok = abs(two.var() - 2 / 3) <= 0.02 * (2 / 3)

    a = ThetaSampler().sample(substream(1004, "ks-a"), 10_000)
    b = ThetaSampler(method="reflected-walk", reflected_m=2000).sample(
        substream(1004, "ks-b"), 10_000)
    stat, _ = ks_test(a, b)
    ks_ok = stat <= 0.02

    lap_ok = all(
        abs(theta_laplace(s) - 1.0 / np.cosh(np.sqrt(s))) <= 1e-3
        for s in (0.5, 1.0, 2.0))

    ok = mean_ok and var_ok and ks_ok and lap_ok
    report_line("4 theta sampler", ok,
                f"mean {two.mean():.5f}, var {two.var():.5f}, KS {stat:.4f}")
    assert ok


def test_05_tier_equivalence():
    ok = True
    details = []
    for e in range(3):
        env = sample_environment(SPEC_15, 200, 1005, stream=("tier-env", e))
        for n in (20, 100):
            d = direct_passage(env, n, 10_000, substream(1005, "d", e, n))
            b = block_passage(env, n, 10_000, substream(1005, "b", e, n))
            stat, p = ks_test(d.samples, b.samples)
            if p <= 0.01:
                ok = False
            details.append(f"env{e}/n={n}: p={p:.3f}")
    # Block vs reduced on heavy-tail environments near n = 1e3.  The reduced
    # tier keeps only the right-part fluctuations, so its validity at finite n
    # requires the left-related variance share of T_n to be small for the
    # realized environment (asymptotically it vanishes, but at n ~ 1e3 typical
    # draws still carry a 10-70% share).  The share is computed exactly from
    # the quenched formulas (oracle below, including the left-right covariance
    # through the shared visit counts), so the precondition is checked a
    # priori, before any sampling; the stream is scanned in order and the
    # first three qualifying environments are used.
    from rwsre.quenched import expected_passage_time

    n = 1_000
    chosen = []
    scanned = 0
    for seed in range(1, 41):
        env = sample_environment(SPEC_08, 2_000, 1005, stream=("tier-env", seed))
        scanned += 1
        share = _left_variance_share(env, n)
        if share <= 0.02:
            chosen.append((seed, share, env))
        if len(chosen) == 3:
            break
    for seed, share, env in chosen:
        pot = compute_potentials(env)
        b = block_passage(env, n, 10_000, substream(1005, "br-b", seed))
        r = reduced_passage(env, n, 10_000, substream(1005, "br-r", seed), ThetaSampler())
        stat, _ = ks_test(b.samples - expected_passage_time(pot, n), r.samples)
        if stat > 0.05:
            ok = False
        details.append(f"b-vs-r seed {seed} (share {share:.3f}): KS {stat:.4f}")
    details.append(f"{scanned} envs scanned for right-dominance")
    report_line("5 tier equivalence", ok, "; ".join(details))
    assert ok


def _pipeline_summary(rep):
    stats_ = [f"{t['functional']}={t.get('ks', t.get('value', ''))}" for t in rep.tests]
    return "; ".join(str(s)[:40] for s in stats_)


def test_06_moderate_disorder_pipeline():
    cfg = ExperimentConfig(spec=SPEC_15, theorem="m1", n=2_000, n_envs=200,
                           inner_replicas=400, master_seed=1)
    rep = run_experiment(cfg)
    tests_ok = all(t["pass"] for t in rep.tests)
    control_rejected = all(c["rejected"] for c in rep.controls)
    ok = rep.passed and tests_ok and control_rejected
    report_line("6 moderate-disorder pipeline (beta=1.5)", ok,
                f"tests {'ok' if tests_ok else 'FAIL'}, "
                f"control {'rejected' if control_rejected else 'NOT rejected'}")
    assert ok


def test_07_critical_pipeline():
    cfg = ExperimentConfig(spec=SPEC_10, theorem="m2", n=20_000, n_envs=200,
                           inner_replicas=400, master_seed=1)
    rep = run_experiment(cfg)
    tests_ok = all(t["pass"] for t in rep.tests)
    control_rejected = all(c["rejected"] for c in rep.controls)
    ok = rep.passed and tests_ok and control_rejected
    report_line("7 critical pipeline (beta=1)", ok,
                f"tests {'ok' if tests_ok else 'FAIL'}, "
                f"control {'rejected' if control_rejected else 'NOT rejected'}")
    assert ok


def test_08_strong_disorder_pipeline():
    cfg = ExperimentConfig(spec=SPEC_08, theorem="m3", n=10_000, n_envs=200,
                           inner_replicas=400, master_seed=1, ablation=True)
    rep = run_experiment(cfg)
    tests_ok = all(t["pass"] for t in rep.tests)
    controls = {c["kind"]: c["rejected"] for c in rep.controls}
    ok = rep.passed and tests_ok and all(controls.values())
    report_line("8 strong-disorder pipeline (beta=0.8)", ok,
                f"tests {'ok' if tests_ok else 'FAIL'}, controls {controls}")
    assert ok


def test_09_joint_convergence():
    cfg = ExperimentConfig(spec=SPEC_08, theorem="joint", n=10_000, n_envs=2_000,
                           master_seed=1)
    rep = run_experiment(cfg)
    stats_ = {t["functional"]: t["ks"] for t in rep.tests}
    ok = rep.passed and all(v <= 0.05 for v in stats_.values())
    report_line("9 joint convergence (beta=0.8)", ok,
                ", ".join(f"{k}: {v:.4f}" for k, v in stats_.items()))
    assert ok


def test_10_left_variance_vanishes():
    cfg = ExperimentConfig(spec=SPEC_15, theorem="leftvar",
                           n_list=(100, 1_000, 10_000), n_envs=50, master_seed=1)
    rep = run_experiment(cfg)
    medians = [t["value"] for t in rep.tests if t["functional"].startswith("median@")]
    decreasing = all(b < a for a, b in zip(medians, medians[1:]))
    final = rep.tests[-1]
    ok = rep.passed
    report_line("10 left variance vanishes", ok,
                f"medians {['%.3g' % m for m in medians]}, "
                f"decreasing={decreasing}, final {final['value']:.3g} "
                f"vs bound {final['tolerance']}")
    # The ratio decays like n^(-2/3); reaching the 0.05 bound needs n ~ 4e6,
    # far beyond the pinned n = 1e4, so the final-bound subtest fails at this
    # horizon. The monotone-decrease subtest must hold regardless.
    assert decreasing
    assert ok


def test_11_G_self_similarity():
    cfg = ExperimentConfig(spec=SPEC_15, theorem="gss", master_seed=1,
                           extras={"draws": 10_000})
    rep = run_experiment(cfg)
    t = rep.tests[0]
    report_line("11 G self-similarity", rep.passed,
                f"KS {t['ks']:.4f} vs crit {t['crit']:.4f}")
    assert rep.passed


def test_12_no_strong_limit_probe():
    cfg = ExperimentConfig(spec=SPEC_12, theorem="probe", master_seed=9,
                           extras={"replicas": 8_000})
    rep = run_experiment(cfg)
    by_name = {t["functional"]: t for t in rep.tests}
    frac = by_name["non-convergence persistence"]["fraction"]
    ctrl = by_name["light-tailed control decays"]["final_distance"]
    exc = by_name["exceptional local law vs 2*theta-1"]["worst_ks"]
    report_line("12 no strong limit (probe)", rep.passed,
                f"persistence {frac:.2f} (>=0.8), control final {ctrl:.4f} (<0.05), "
                f"exceptional KS {exc if exc is None else round(exc, 4)} (<=0.05)")
    assert rep.passed


def test_13_determinism_across_workers(tmp_path):
    spec_dict = SPEC_15.to_dict()
    cfg = {"spec": spec_dict, "theorem": "m1", "n": 300, "n_envs": 24,
           "inner_replicas": 100, "master_seed": 5, "negative_control": False}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    outs = []
    for w in (1, 3):
        out = tmp_path / f"w{w}"
        r = subprocess.run([sys.executable, "-m", "rwsre", "verify",
                            "--config", str(cfg_path), "--out", str(out),
                            "--workers", str(w)],
                           capture_output=True, text=True)
        assert r.returncode in (0, 2), r.stderr
        outs.append((out / "report.json").read_bytes())
    ok = outs[0] == outs[1]
    report_line("13 determinism across worker counts", ok,
                f"{len(outs[0])} bytes, identical={ok}")
    assert ok
