"""Acceptance suite. Each test records one pass/fail line through the
``criterion`` fixture; the lines are printed in the terminal summary."""

import itertools
import time

import numpy as np

from radcone import campaigns, cli, conefit, egm, metrics
from radcone.metrics import EmbeddingSet, LfidInputs
from radcone.scenes import random_scene

import oracles

THREADS = 8


def test_criterion_01_solver_equivalence(criterion):
    start = time.perf_counter()
    rows = campaigns.run_trials(campaigns.solver_trial, 200, 1, THREADS)
    elapsed = time.perf_counter() - start
    worst = max(r["rel_diff"] for r in rows)
    ok = worst <= 1e-9 and elapsed < 60 and max(r["p"] for r in rows) <= 0.9
    criterion(1, ok, f"200 scenes, max rel diff {worst:.3g}, {elapsed:.1f}s")


def test_criterion_02_perturbation_campaign(criterion):
    start = time.perf_counter()
    counts = {}
    for factor in campaigns.FACTORS:
        rows = campaigns.perturbation_campaign(1000, 2, factor, THREADS)
        assert all(r["cond_c"] <= 1.2 + 1e-12 for r in rows)
        assert all(r["eps_E"] <= 0.2 + 1e-12 and r["eps_rho"] <= 0.2 + 1e-12 for r in rows)
        counts[factor] = sum(not r["holds"] for r in rows)
    elapsed = time.perf_counter() - start
    ok = not any(counts.values()) and elapsed < 300
    detail = ", ".join(f"{k} {v}/1000 violations" for k, v in counts.items())
    criterion(2, ok, f"{detail}, {elapsed:.1f}s")


def test_criterion_03_kernel_sandwich(criterion):
    rows = campaigns.run_trials(campaigns.sandwich_trial, 200, 3, THREADS)
    bad = sum(not r["holds"] for r in rows)
    criterion(3, bad == 0, f"200 scene/transform pairs, {bad} violations")


def test_criterion_04_optimal_generator(criterion):
    rng = np.random.default_rng(4)
    worst = 0.0
    beaten = 0
    for i in range(1000):
        n = int(rng.integers(2, 12))
        a = rng.standard_normal((n, int(rng.integers(1, n + 1))))
        c = egm.SecondMoment.from_matrix(a @ a.T * rng.uniform(0.1, 10))
        r = int(rng.integers(1, n + 1))
        if r < n and c.eigvals[r - 1] - c.eigvals[r] <= egm.EIGENGAP_TOL:
            r = max(k + 1 for k in range(n) if k + 1 == n or c.eigvals[k] - c.eigvals[k + 1] > egm.EIGENGAP_TOL)
        g = egm.egm_fit(c, r)
        fitted = egm.egm_loss(g, c)
        worst = max(worst, abs(fitted - egm.tail_sum(c, r)) / np.trace(c.matrix_c))
        q, _ = np.linalg.qr(rng.standard_normal((n, r)))
        beaten += egm.egm_loss(egm.Egm(q), c) < fitted - 1e-10
    ok = worst <= 1e-9 and beaten == 0
    criterion(4, ok, f"1000 PSD matrices, max |loss - tail|/Tr {worst:.3g}, competitors better: {beaten}")


def test_criterion_05_regret_campaign(criterion):
    rows = campaigns.egm_campaign(500, 5, THREADS)
    neg = sum(r["regret"] < -1e-10 for r in rows)
    loose_bad = sum(not r["loose_holds"] for r in rows)
    lp_bad = sum(not r["lp_holds"] for r in rows)
    order_bad = sum(not r["lp_le_loose"] for r in rows)
    zero_ok = all(egm.lp_regret_bound(lam, r, 0.0) == 0.0
                  for lam in ([4.0, 3.0, 2.0, 1.0], [9.5, 3.0, 2.9, 0.1, 0.0]) for r in (1, 2, 3))
    ok = neg == 0 and loose_bad == 0 and lp_bad == 0 and order_bad == 0 and zero_ok
    criterion(5, ok, f"500 trials: negative regret {neg}, loose violations {loose_bad}, "
                     f"lp violations {lp_bad}, lp > loose {order_bad}, zero-budget check {zero_ok}")


def test_criterion_06_lp_bound_oracle(criterion):
    rng = np.random.default_rng(6)
    cases = 0
    mismatches = 0
    for n in range(2, 7):
        for _ in range(40):
            lam = sorted(rng.integers(0, 12, n).tolist(), reverse=True)
            r = int(rng.integers(1, n))
            d = float(rng.choice([0, 1, 2, 5, 10, 25, 60]))
            cases += 1
            mismatches += egm.lp_regret_bound(lam, r, d) != oracles.lp_bound_bruteforce(lam, r, d)
    criterion(6, cases == 200 and mismatches == 0, f"{cases} cases, {mismatches} mismatches")


def test_criterion_07_nnls(criterion):
    rng = np.random.default_rng(7)
    worst_exact = 0.0
    worst_gap = 0.0
    monotone = True
    worst_cond = 1.0
    for _ in range(500):
        n_g = int(rng.integers(1, 11))
        # shading-field sized instances; see the notes on conditioning for small N
        n = int(rng.integers(50, 201))
        gens = conefit.GeneratorSet(rng.random((n_g, n)) + 1e-3)
        t = conefit.normalize_shading(rng.random(n) + 0.05) - rng.random(n) * rng.uniform(0, 1)
        exact = conefit.fit_exact(t, gens).residual_sq
        _, best = oracles.nnls_enumerate(gens.design, t)
        worst_exact = max(worst_exact, abs(exact - best))
        hist = []
        approx = conefit.fit_approx(t, gens, 500, history=hist).residual_sq
        monotone &= all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(hist, hist[1:]))
        worst_gap = max(worst_gap, approx - exact)
        w = np.linalg.eigvalsh(gens.design.T @ gens.design)
        worst_cond = max(worst_cond, w[-1] / w[0])
    ok = worst_exact <= 1e-9 and monotone and worst_gap <= 1e-6
    criterion(7, ok, f"500 instances, max |exact - oracle| {worst_exact:.3g}, "
                     f"monotone {monotone}, max gap at 500 steps {worst_gap:.3g}, max Gram cond {worst_cond:.0f}")


def test_criterion_08_sample_moment_scaling(criterion):
    rng = np.random.default_rng(8)
    scene = random_scene(rng, 10, n_luminaires=4)
    basis = egm.radiosity_basis(scene).matrix_b
    sizes = [100, 1000, 10_000, 100_000]
    rows = campaigns.scaling_campaign(basis, 1.0, sizes, 20, 8)
    slope = campaigns.loglog_slope(sizes, [r["mean_frob_err_sq"] for r in rows])
    criterion(8, -1.2 <= slope <= -0.8, f"log-log slope {slope:.3f}")


def _lfid_rel_errors(n, reps, seed, d=8):
    errs, rels = [], []
    dk = 0.5 * np.ones(d)
    for rep in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence([seed, n, rep]))
        x = rng.standard_normal((n, d))
        x[0] = np.linspace(-1, 1, d)
        est = metrics.lfid(LfidInputs(EmbeddingSet(x), 0, x[0] + dk))
        direct = oracles.lfid_bruteforce(x, 0, dk)
        errs.append(abs(direct - est))
        rels.append(abs(direct - est) / est)
    return float(np.mean(errs)), float(np.max(rels))


def test_criterion_09_local_fid(criterion):
    sizes = [50, 100, 200, 400, 800]
    stats = [_lfid_rel_errors(n, 20, 9) for n in sizes]
    slope = campaigns.loglog_slope(sizes, [s[0] for s in stats])
    rel800 = stats[-1][1]
    rng = np.random.default_rng(9)
    x = rng.standard_normal((300, 8)) @ rng.standard_normal((8, 8))
    zero = metrics.lfid(LfidInputs(EmbeddingSet(x), 5, x[5]))
    q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    p = x[5] + 0.4 * rng.standard_normal(8)
    a = metrics.lfid(LfidInputs(EmbeddingSet(x), 5, p))
    b = metrics.lfid(LfidInputs(EmbeddingSet(x @ q.T), 5, q @ p))
    rot = abs(a - b) <= 1e-8 * max(1.0, abs(a))
    ok = rel800 <= 0.05 and -1.3 <= slope <= -0.7 and zero == 0.0 and rot
    criterion(9, ok, f"max rel err at N=800 {rel800:.4f}, decay slope {slope:.3f}, "
                     f"lfid(d=0) {zero}, rotation diff {abs(a - b):.2g}")


def test_criterion_10_fid(criterion):
    rng = np.random.default_rng(10)
    d = 32
    mix = rng.standard_normal((d, d)) / np.sqrt(d)
    x = rng.standard_normal((5000, d)) @ mix + rng.standard_normal(d)
    perm = rng.permutation(5000)
    a, b = EmbeddingSet(x[perm[:2500]]), EmbeddingSet(x[perm[2500:]])
    self_fid = metrics.fid(a, a)
    fit = metrics.fid_infinity_fit(a, b, seed=10)
    band = 2 * fit.intercept_se
    fid250 = metrics.fid(a.subset(rng.choice(2500, 250, replace=False)),
                         b.subset(rng.choice(2500, 250, replace=False)))
    ok = abs(self_fid) <= 1e-8 and abs(fit.intercept) <= band and fid250 > 5 * band
    criterion(10, ok, f"fid(a,a) {self_fid:.2g}, fid_inf {fit.intercept:.4f} +- {band:.4f} (2 SE), "
                      f"fid(N=250) {fid250:.4f}")


def test_criterion_11_msd(criterion):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        imgs = [rng.random(int(rng.integers(1, 50))) + 0.01 for _ in range(int(rng.integers(1, 5)))]
        c = float(2.0 ** rng.integers(-10, 11))
        worst = max(worst, metrics.msd(imgs, [c * x for x in imgs]))
    hand = metrics.msd([[1.0, 1.0]], [[2.0, 0.0]])
    ok = worst == 0.0 and abs(hand - 1.0) <= 1e-12
    criterion(11, ok, f"max msd under scaling {worst}, hand case {hand!r}")


def test_criterion_12_determinism(tmp_path, criterion):
    runs = {
        "verify-bounds": ["verify-bounds", "--trials", "60", "--seed", "12"],
        "solver-scene": ["verify-bounds", "--scene", "open_box", "--trials", "20", "--seed", "12"],
        "egm": ["egm", "--trials", "16", "--seed", "12"],
    }
    mismatched = []
    for name, argv in runs.items():
        blobs = []
        for threads, rep in itertools.product(("1", "8"), range(2)):
            out = tmp_path / f"{name}-{threads}-{rep}.csv"
            cli.main(argv + ["--threads", threads, "--out", str(out)])
            blobs.append(out.read_bytes())
        if len(set(blobs)) != 1:
            mismatched.append(name)
    criterion(12, not mismatched, f"{len(runs)} campaigns at 1 and 8 threads, mismatched: {mismatched or 'none'}")
