"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line, printed together in the terminal summary.
"""

import math
import os
import time
import warnings

import numpy as np
import pytest
from scipy.optimize import root

from _helpers import random_hpd, report
from tsgraph.bench import (
    fwer_power_experiment,
    loglog_slope,
    matched_power,
    replication_seeds,
    timing_experiment,
)
from tsgraph.fit import fit_constrained, fit_single_missing, missing_residual
from tsgraph.graph import all_pairs, n_edges
from tsgraph.kl import KlContext, all_single_edge_statistics, ekl, ekl_terms
from tsgraph.selection import holm_levels, matsuda_select, mht_select
from tsgraph.spectral import (
    SingularRiskWarning,
    SpectralMatrixField,
    WeightSequence,
    estimate_spectrum,
    periodogram,
    smooth,
    window_constants,
)
from tsgraph.var import model_a, model_b, random_var_model, simulate

COS = window_constants("cosine")
MODEL_A_MISSING = {(2, 3), (2, 5), (3, 4)}


def test_c01_model_a_recovery():
    t0 = time.perf_counter()
    N, M = 1024, 64
    ctx = KlContext(N, M, COS, 5)
    hits = 0
    for ss in replication_seeds(101, 100):
        S = estimate_spectrum(simulate(model_a(), N, ss), M)
        res = mht_select(all_single_edge_statistics(S, ctx), 0.05, 5)
        hits += res.graph.missing == MODEL_A_MISSING
    secs = time.perf_counter() - t0
    ok = hits >= 80 and secs <= 120
    report(1, ok, f"exact recovery {hits}/100 (need >= 80), {secs:.1f} s")
    assert ok


def test_c02_holm_levels():
    got = np.round(holm_levels(10, 0.05), 2)
    want = np.array([1.64, 1.96, 2.13, 2.24, 2.33, 2.39, 2.45, 2.50, 2.54, 2.58])
    ok = bool(np.allclose(got, want, atol=1e-12))
    report(2, ok, "levels " + " ".join(f"{v:.2f}" for v in got))
    assert ok


@pytest.fixture(scope="module")
def model_b_null_runs():
    """200 replications of Model B (x = 0), N=2048, M=64, all ten statistics."""
    N, M = 2048, 64
    ctx = KlContext(N, M, COS, 5)
    z, fw = [], []
    t0 = time.perf_counter()
    for ss in replication_seeds(303, 200):
        S = estimate_spectrum(simulate(model_b(0.0), N, ss), M)
        recs = all_single_edge_statistics(S, ctx)
        z.append([recs[4].z, recs[6].z])  # ordinals 5 and 7: (2,3), (2,5)
        g = mht_select(recs, 0.05, 5).graph
        fw.append(g.has_edge(2, 3) or g.has_edge(2, 5))
    return np.array(z), np.array(fw), time.perf_counter() - t0


def test_c03_null_calibration(model_b_null_runs):
    z, _, secs = model_b_null_runs
    mean, sd = z.mean(axis=0), z.std(axis=0, ddof=1)
    ok = bool(np.all((mean >= -0.15) & (mean <= 0.65)) and np.all((sd >= 0.8) & (sd <= 1.4)))
    ok = ok and secs <= 600
    report(3, ok, f"(2,3) mean {mean[0]:.3f} sd {sd[0]:.3f}; (2,5) mean {mean[1]:.3f} "
                  f"sd {sd[1]:.3f}; {secs:.1f} s")
    assert ok


def test_c04_fwer_control(model_b_null_runs):
    _, fw, _ = model_b_null_runs
    bound = 0.05 + 3 * math.sqrt(0.05 * 0.95 / 200)
    rate = fw.mean()
    ok = rate <= bound
    report(4, ok, f"empirical FWER {rate:.3f} (bound {bound:.4f})")
    assert ok


def test_c05_power_parity():
    t0 = time.perf_counter()
    curves = fwer_power_experiment(
        model_b(0.0), [(2, 3), (2, 5)], [(3, 4)], 1024, 32, reps=100, seed=505,
        candidates=[(2, 3), (2, 5), (3, 4)],
    )
    pts = matched_power(curves["mht"], curves["stepwise"], 5)
    diffs = [abs(a - b) for _, a, b in pts]
    secs = time.perf_counter() - t0
    ok = max(diffs) <= 0.10 and secs <= 1800
    desc = ", ".join(f"FWER {f:.3f}: {a:.2f}/{b:.2f}" for f, a, b in pts)
    report(5, ok, f"MHT/stepwise power at matched FWER [{desc}], {secs:.1f} s")
    assert ok


def test_c06_statistic_counts():
    lines, ok = [], True
    for p, seed in ((5, 1), (10, 2), (20, 3)):
        model = model_a() if p == 5 else random_var_model(p, 5, seed)
        S = estimate_spectrum(simulate(model, 1024, seed), 32)
        ctx = KlContext(1024, 32, COS, p)
        res = mht_select(all_single_edge_statistics(S, ctx), 0.05, p)
        ok &= res.statistics_computed == n_edges(p)
        lines.append(f"MHT p={p}: {res.statistics_computed}")
    for p, seed in ((5, 11), (5, 12), (6, 13)):
        model = model_a() if p == 5 else random_var_model(p, 3, seed)
        S = estimate_spectrum(simulate(model, 1024, seed), 32)
        res = matsuda_select(S, KlContext(1024, 32, COS, p), 0.05)
        L, k = n_edges(p), res.graph.n_missing
        summed = sum(L - i for i in range(k + 1))  # one statistic per remaining edge per step
        printed = (k + 1) * L - k * (k - 1) // 2
        ok &= res.statistics_computed == summed
        lines.append(f"stepwise p={p} k={k}: {res.statistics_computed} "
                     f"(sum {summed}, closed form as printed {printed})")
    report(6, ok, "; ".join(lines))
    assert ok


def test_c07_complexity_shape():
    rows = timing_experiment([8, 16, 32], 1024, 32, "mht", seed=7, repeats=5)
    slope = loglog_slope([r["p"] for r in rows], [r["seconds"] for r in rows])
    ok = 3 <= slope <= 5
    times = ", ".join(f"p={r['p']}: {r['seconds'] * 1e3:.1f} ms" for r in rows)
    report(7, ok, f"log-log slope {slope:.2f} (need [3, 5]); {times}")
    assert ok


def _root_single(S, a, b, x0):
    def resid(x):
        T = S.astype(complex).copy()
        T[a, b] = x[0] + 1j * x[1]
        T[b, a] = np.conj(T[a, b])
        A = np.linalg.inv(T)
        return [A[a, b].real, A[a, b].imag]

    sol = root(resid, x0, method="hybr", options={"xtol": 1e-14})
    return sol.x[0] + 1j * sol.x[1]


def test_c08_constrained_fit_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(808)
    worst_inv, exact, worst_res, max_cycles = 0.0, True, 0.0, 0
    cycle4 = [(1, 2), (2, 3), (3, 4), (1, 4)]
    for _ in range(200):
        S = random_hpd(4, rng)
        for j, k in all_pairs(4):
            T = fit_single_missing(S, (j, k))
            worst_inv = max(worst_inv, abs(np.linalg.inv(T)[j - 1, k - 1]))
            keep = np.ones((4, 4), bool)
            keep[j - 1, k - 1] = keep[k - 1, j - 1] = False
            exact &= bool(np.array_equal(T[keep], S[keep]))
        size = int(rng.integers(2, 6))
        pick = rng.choice(6, size=size, replace=False)
        for miss in ([all_pairs(4)[i] for i in sorted(pick)], cycle4):
            T, cycles = fit_constrained(S, miss)
            res = missing_residual(np.linalg.inv(T), [(a - 1, b - 1) for a, b in miss]).max()
            worst_res, max_cycles = max(worst_res, res), max(max_cycles, cycles)
    worst_root = 0.0
    for _ in range(50):
        S = random_hpd(3, rng)
        T = fit_single_missing(S, (1, 2))
        ref = _root_single(S, 0, 1, [S[0, 1].real, S[0, 1].imag])
        worst_root = max(worst_root, abs(T[0, 1] - ref))
    secs = time.perf_counter() - t0
    ok = worst_inv < 1e-10 and exact and worst_res <= 1e-8 and max_cycles <= 100
    ok = ok and worst_root < 1e-8 and secs < 60
    report(8, ok, f"max |inv(T)_jk| {worst_inv:.1e}, off-pair bit-exact {exact}, multi-edge residual "
                  f"{worst_res:.1e} in <= {max_cycles} cycles, p=3 root gap {worst_root:.1e}")
    assert ok


def test_c09_ekl_properties():
    rng = np.random.default_rng(909)
    N = 64
    F = SpectralMatrixField(random_hpd(5, rng, n=N), N)
    zero = ekl(F, F)
    p = 4
    two = SpectralMatrixField(np.broadcast_to(2 * np.eye(p), (N, p, p)).astype(complex), N)
    one = SpectralMatrixField(np.broadcast_to(np.eye(p), (N, p, p)).astype(complex), N)
    gap = abs(ekl(two, one) - p * (1 - math.log(2)) / 2)
    terms = ekl_terms(random_hpd(4, rng, n=1000), random_hpd(4, rng, n=1000))
    ok = abs(zero) < 1e-12 and gap < 1e-12 and terms.min() >= 0
    report(9, ok, f"eKL(T,T) {zero:.1e}, 2I gap {gap:.1e}, min over 1000 pairs {terms.min():.2e}")
    assert ok


def _time_stats(S, ctx, workers, repeats=3):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        all_single_edge_statistics(S, ctx, workers)
        best = min(best, time.perf_counter() - t0)
    return best


def test_c10_parallel_determinism_and_speedup():
    N, M = 1024, 32
    X = simulate(random_var_model(20, 5, 1010), N, 1010)
    S = estimate_spectrum(X, M)
    ctx = KlContext(N, M, COS, 20)
    results = {}
    for w in (1, 2, os.cpu_count() or 1):
        recs = all_single_edge_statistics(S, ctx, w)
        results[w] = (mht_select(recs, 0.05, 20).graph, np.array([r.z for r in recs]))
    base_g, base_z = results[1]
    same = all(g == base_g and np.max(np.abs(z - base_z)) <= 1e-10 for g, z in results.values())

    p = 40
    X = simulate(random_var_model(p, 5, 1011), N, 1011)
    S = estimate_spectrum(X, M)
    ctx = KlContext(N, M, COS, p)
    t1, t4 = _time_stats(S, ctx, 1), _time_stats(S, ctx, 4)
    speedup = t1 / t4
    ok = same and speedup >= 2
    report(10, ok, f"identical across workers {sorted(results)}: {same}; speedup at 4 workers "
                   f"(p={p}) {speedup:.2f} on {os.cpu_count()} CPU(s)")
    assert ok


def test_c11_nonsingularity_boundary():
    p, N = 5, 512
    rng = np.random.default_rng(1111)
    X = rng.standard_normal((p, N))  # zero-mean generic data
    P = periodogram(X, demean=False)

    def weights(M, kind):
        if kind == "uniform":
            w = np.ones(2 * M + 1)
        else:
            half = rng.uniform(0.2, 1.0, M + 1)
            w = np.concatenate([half[:0:-1], half])
        return WeightSequence(w / w.sum())

    def ratios(M, kind):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SingularRiskWarning)
            vals = smooth(P, weights(M, kind)).values
        e = np.linalg.eigvalsh(vals)
        return e[:, 0] / e[:, -1]

    pd_ok, sing_ok, worst_pd, worst_sing = True, True, math.inf, 0.0
    for kind in ("uniform", "random"):
        for M in (2, 3, 4):
            r = ratios(M, kind)
            worst_pd = min(worst_pd, r.min())
            pd_ok &= bool(np.all(r > 1e-10))
        for M in (1,):
            r = ratios(M, kind)
            worst_sing = max(worst_sing, np.abs(r).max())
            sing_ok &= bool(np.all(np.abs(r) < 1e-12))
    ok = pd_ok and sing_ok
    report(11, ok, f"min eigen ratio with 2M+1 >= 5: {worst_pd:.1e}; max with 2M+1 = 3: {worst_sing:.1e}")
    assert ok
