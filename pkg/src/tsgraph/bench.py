"""Simulation studies: FWER/power curves, timings, error rates, parallel scaling.

Every experiment derives per-replication seeds from one integer seed with
``numpy.random.SeedSequence.spawn`` so results are replayable.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .fit import FitConfig
from .graph import Graph, all_pairs, n_edges
from .kl import KlContext, all_single_edge_statistics, resolve_workers
from .selection import matsuda_select, mht_select, stepwise_final_k, stepwise_steps
from .spectral import estimate_spectrum, window_constants
from .var import VarModel, random_var_model, simulate, true_missing_edges

__all__ = [
    "PowerCurve",
    "ErrorRates",
    "replication_seeds",
    "mht_alpha_grid",
    "stepwise_alpha_grid",
    "fwer_power_experiment",
    "matched_power",
    "select_graph",
    "error_rates",
    "timing_experiment",
    "error_rate_experiment",
    "parallel_scaling_experiment",
    "write_csv",
    "write_json",
]


@dataclass
class PowerCurve:
    method: str
    alpha_grid: list
    fwer: list
    effective_power: list
    reps: int

    def rows(self):
        return [
            {"method": self.method, "alpha": a, "fwer": f, "effective_power": w}
            for a, f, w in zip(self.alpha_grid, self.fwer, self.effective_power)
        ]


@dataclass
class ErrorRates:
    """``type1_pct``: truly missing edges kept, as a percentage of the missing.
    ``type2_pct``: truly present edges deleted, as a percentage of the present."""

    type1_pct: float
    type2_pct: float


def replication_seeds(seed, reps: int) -> list:
    return np.random.SeedSequence(seed).spawn(reps)


def mht_alpha_grid(step: float = 0.00125, top: float = 0.5) -> np.ndarray:
    return np.round(np.arange(0.0, top + step / 2, step), 12)


def stepwise_alpha_grid(step: float = 0.00125, top: float = 0.5) -> np.ndarray:
    """``alpha = beta^5`` over an even ``beta`` grid, crowding levels near zero."""
    return mht_alpha_grid(step, top) ** 5


def select_graph(X, M: int, alpha: float = 0.05, method: str = "mht", *,
                 window="cosine", constants=None, fit_cfg=FitConfig(), workers=1):
    """Spectral estimate plus selection for a sample; returns a SelectionResult."""
    S = estimate_spectrum(X, M, window)
    consts = constants or window_constants(window if isinstance(window, str) else "cosine")
    ctx = KlContext(S.N, M, consts, S.p)
    if method == "mht":
        return mht_select(all_single_edge_statistics(S, ctx, workers), alpha, S.p)
    if method == "stepwise":
        return matsuda_select(S, ctx, alpha, fit_cfg)
    raise ValueError(f"unknown method {method!r}")


def _power_replication(args):
    model, N, M, ss, candidates, methods, mht_grid, sw_grid, true_nulls, false_nulls, fit_cfg = args
    X = simulate(model, N, ss)
    S = estimate_spectrum(X, M)
    p = S.p
    ctx = KlContext(N, M, window_constants("cosine"), p)
    L = n_edges(p)
    out = {}

    def events(missing):
        fw = any(e not in missing for e in true_nulls)
        pw = all(e not in missing for e in false_nulls)
        return fw, pw

    if "mht" in methods:
        recs = all_single_edge_statistics(S, ctx, 1, edges=candidates)
        ev = []
        for a in mht_grid:
            ev.append(events(mht_select(recs, float(a), p).graph.missing))
        out["mht"] = ev
    if "stepwise" in methods:
        steps = list(stepwise_steps(S, ctx, fit_cfg, candidates))
        ev = []
        for a in sw_grid:
            k = stepwise_final_k(steps, L, float(a))
            ev.append(events({s.removed for s in steps[:k]}))
        out["stepwise"] = ev
    return out


def fwer_power_experiment(
    model: VarModel,
    true_nulls,
    false_nulls,
    N: int,
    M: int,
    alpha_grid=None,
    reps: int = 100,
    seed: int = 0,
    candidates=None,
    methods=("mht", "stepwise"),
    stepwise_grid=None,
    fit_cfg: FitConfig = FitConfig(),
    workers=1,
) -> dict:
    """Empirical FWER and effective power per alpha for each method.

    FWER is the fraction of replications rejecting at least one of
    ``true_nulls``; effective power the fraction rejecting all of
    ``false_nulls``. ``candidates`` restricts which missing-edge hypotheses are
    evaluated, all others counting as rejected. The stepwise grid defaults to
    ``beta^5`` over the MHT grid's values.
    """
    mht_grid = mht_alpha_grid() if alpha_grid is None else np.asarray(alpha_grid, float)
    sw_grid = mht_grid ** 5 if stepwise_grid is None else np.asarray(stepwise_grid, float)
    true_nulls = [tuple(sorted(e)) for e in true_nulls]
    false_nulls = [tuple(sorted(e)) for e in false_nulls]
    jobs = [
        (model, N, M, ss, candidates, tuple(methods), mht_grid, sw_grid, true_nulls, false_nulls, fit_cfg)
        for ss in replication_seeds(seed, reps)
    ]
    results = _map(_power_replication, jobs, workers)
    curves = {}
    for meth in methods:
        grid = mht_grid if meth == "mht" else sw_grid
        ev = np.array([r[meth] for r in results], dtype=float)  # (reps, n_alpha, 2)
        curves[meth] = PowerCurve(
            meth, grid.tolist(), ev[:, :, 0].mean(0).tolist(), ev[:, :, 1].mean(0).tolist(), reps
        )
    return curves


def _power_at(curve: PowerCurve, level: float) -> float:
    """Best effective power among grid points whose FWER does not exceed ``level``."""
    f = np.asarray(curve.fwer)
    w = np.asarray(curve.effective_power)
    ok = f <= level + 1e-12
    return float(w[ok].max()) if ok.any() else 0.0


def matched_power(a: PowerCurve, b: PowerCurve, n_points: int = 5) -> list:
    """Compare two curves at ``n_points`` FWER levels spread over their common range.

    Returns ``(fwer, power_a, power_b)`` triples.
    """
    lo = max(min(a.fwer), min(b.fwer))
    hi = min(max(a.fwer), max(b.fwer))
    levels = np.linspace(lo, hi, n_points) if hi > lo else np.full(n_points, lo)
    return [(float(x), _power_at(a, x), _power_at(b, x)) for x in levels]


def error_rates(estimated: Graph, true_missing) -> ErrorRates:
    true_missing = {tuple(sorted(e)) for e in true_missing}
    present = set(all_pairs(estimated.p)) - true_missing
    kept = sum(1 for e in true_missing if e not in estimated.missing)
    deleted = sum(1 for e in present if e in estimated.missing)
    t1 = 100.0 * kept / len(true_missing) if true_missing else 0.0
    t2 = 100.0 * deleted / len(present) if present else 0.0
    return ErrorRates(t1, t2)


def _timed_selection(X, M, method, workers, fit_cfg):
    t0 = time.perf_counter()
    res = select_graph(X, M, 0.05, method, fit_cfg=fit_cfg, workers=workers)
    return time.perf_counter() - t0, res


def timing_experiment(p_list, N: int, M: int, method: str = "mht", seed: int = 0,
                      k: int = 5, workers=1, repeats: int = 1, fit_cfg=FitConfig()) -> list:
    """Wall-clock of spectral estimation plus selection (simulation excluded).

    Each ``p`` gets its own random model; with ``repeats > 1`` the fastest run is
    reported.
    """
    rows = []
    seeds = replication_seeds(seed, len(p_list))
    for p, ss in zip(p_list, seeds):
        ms, ds = ss.spawn(2)
        model = random_var_model(int(p), k, ms)
        X = simulate(model, N, ds)
        best, res = math.inf, None
        for _ in range(max(1, repeats)):
            dt, res = _timed_selection(X, M, method, workers, fit_cfg)
            best = min(best, dt)
        rows.append({
            "p": int(p),
            "seconds": best,
            "statistics_computed": res.statistics_computed,
            "missing_estimated": res.graph.n_missing,
        })
    return rows


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def _error_replication(args):
    model, truth, N, M, alphas, ss = args
    X = simulate(model, N, ss)
    S = estimate_spectrum(X, M)
    ctx = KlContext(N, M, window_constants("cosine"), S.p)
    recs = all_single_edge_statistics(S, ctx, 1)
    out = []
    for a in alphas:
        er = error_rates(mht_select(recs, float(a), S.p).graph, truth)
        out.append((er.type1_pct, er.type2_pct))
    return out


def error_rate_experiment(p_list, alphas, N: int, M: int, reps: int = 1, seed: int = 0,
                          k: int = 5, workers=1) -> list:
    """Average type I/II percentages of the MHT against each model's true graph."""
    alphas = [float(a) for a in np.atleast_1d(alphas)]
    rows = []
    for p, ss in zip(p_list, replication_seeds(seed, len(p_list))):
        ms, ds = ss.spawn(2)
        model = random_var_model(int(p), k, ms)
        truth = true_missing_edges(model, None)
        jobs = [(model, truth, N, M, alphas, s) for s in ds.spawn(reps)]
        res = np.array(_map(_error_replication, jobs, workers))  # (reps, n_alpha, 2)
        mean = res.mean(axis=0)
        for a, (t1, t2) in zip(alphas, mean):
            rows.append({
                "p": int(p),
                "alpha": a,
                "type1_pct": float(t1),
                "type2_pct": float(t2),
                "reps": reps,
                "true_missing": len(truth),
            })
    return rows


def parallel_scaling_experiment(p: int, N: int, M: int, worker_counts, seed: int = 0,
                                k: int = 5, repeats: int = 1) -> tuple:
    """Time the MHT statistics at several worker counts on one problem.

    Returns ``(rows, identical)`` where ``identical`` says every worker count
    produced the same graph and statistics.
    """
    ms, ds = np.random.SeedSequence(seed).spawn(2)
    model = random_var_model(p, k, ms)
    X = simulate(model, N, ds)
    S = estimate_spectrum(X, M)
    ctx = KlContext(N, M, window_constants("cosine"), p)
    rows, ref, identical = [], None, True
    for w in worker_counts:
        w = resolve_workers(w)
        best = math.inf
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            res = mht_select(all_single_edge_statistics(S, ctx, w), 0.05, p)
            best = min(best, time.perf_counter() - t0)
        z = np.array([r.z for r in res.records])
        if ref is None:
            ref = (res.graph, z)
        else:
            identical &= res.graph == ref[0] and bool(np.allclose(z, ref[1], rtol=0, atol=1e-10))
        rows.append({"workers": w, "seconds": best})
    return rows, identical


def _map(fn, jobs, workers):
    workers = resolve_workers(workers)
    if workers == 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def write_csv(rows, path) -> None:
    rows = list(rows)
    if not rows:
        open(path, "w").close()
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, default=lambda o: asdict(o) if hasattr(o, "__dataclass_fields__") else str(o))
