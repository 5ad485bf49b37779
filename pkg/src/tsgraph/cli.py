"""Command-line interface: ``tsgraph simulate | select | cohort | bench``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
``TSGRAPH_WORKERS`` and ``TSGRAPH_OUTDIR`` override the worker count and the
output directory defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .errors import ConfigError, ConvergenceError, DomainError, NotPositiveDefiniteError
from .fit import FitConfig
from .graph import Graph, all_pairs
from .kl import KlContext, all_single_edge_statistics, resolve_workers
from .selection import matsuda_select, mht_select
from .spectral import SHAPES, estimate_spectrum, window_constants, write_spectra_csv
from .var import (
    SampleMatrix,
    VarModel,
    check_stationary,
    model_a,
    model_b,
    model_c,
    random_var_model,
    simulate,
    true_missing_edges,
)

log = logging.getLogger("tsgraph")

EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 2, 3, 4

# hypotheses near the decision boundary for the named models
BORDERLINE = {
    "A": [(2, 3), (2, 5), (3, 4), (3, 5)],
    "B": [(2, 3), (2, 5), (3, 4)],
}


def _out_dir(arg) -> Path:
    d = Path(arg or os.environ.get("TSGRAPH_OUTDIR", "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def read_csv_sample(path) -> SampleMatrix:
    """Read a header + numeric-rows CSV (rows are time points)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3:
        raise ConfigError(f"{path}: need a header and at least two data rows")
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in body if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric value ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ConfigError(f"{path}: ragged rows or header/column mismatch")
    if not np.all(np.isfinite(data)):
        raise ConfigError(f"{path}: missing or non-finite values are not allowed")
    if data.shape[0] % 2:
        log.warning("%s: odd number of rows (%d); dropping the last row", path, data.shape[0])
        data = data[:-1]
    return SampleMatrix.from_rows(data)


def write_csv_sample(path, X: SampleMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"c{i + 1}" for i in range(X.p)])
        for row in X.values.T:
            w.writerow([repr(float(v)) for v in row])


def _parse_edges(text):
    if not text:
        return None
    out = []
    for tok in text.split(","):
        a, b = tok.strip().replace("(", "").replace(")", "").split("-")
        out.append(tuple(sorted((int(a), int(b)))))
    return out


def _parse_int_list(text) -> list:
    """``"8,16,32"`` or ``"10:50"`` / ``"10:50:5"`` (inclusive)."""
    text = str(text)
    if ":" in text:
        parts = [int(v) for v in text.split(":")]
        lo, hi = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        return list(range(lo, hi + 1, step))
    return [int(v) for v in text.split(",") if v.strip()]


def _parse_float_list(text) -> list:
    text = str(text)
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        return np.round(np.arange(lo, hi + step / 2, step), 12).tolist()
    return [float(v) for v in text.split(",") if v.strip()]


def _named_model(args) -> tuple:
    if getattr(args, "model_json", None):
        model = VarModel.from_json(Path(args.model_json).read_text())
        return model, "json"
    name = (args.model or "A").upper()
    if name == "A":
        return model_a(), "A"
    if name == "B":
        return model_b(args.x), "B"
    if name == "C":
        return model_c(), "C"
    raise ConfigError(f"unknown model {args.model!r}")


def _selection_config(args, N: int, p: int):
    M = args.m if args.m is not None else N // 32
    if M < 1:
        raise ConfigError("M must be >= 1")
    if not 0 < args.alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    if 2 * M + 1 < p:
        raise ConfigError(
            f"2M+1 = {2 * M + 1} < p = {p}: the smoothed spectral matrix would be "
            "singular; increase M (need 2M+1 >= p)"
        )
    consts = window_constants(args.window, args.cu, args.du)
    return M, consts, FitConfig(args.tol, args.max_iter)


def run_selection(X: SampleMatrix, args):
    M, consts, fit_cfg = _selection_config(args, X.N, X.p)
    if args.window not in SHAPES:
        raise ConfigError(f"unknown window shape {args.window!r}; known: {sorted(SHAPES)}")
    S = estimate_spectrum(X, M, args.window)
    ctx = KlContext(X.N, M, consts, X.p)
    if args.method == "mht":
        res = mht_select(all_single_edge_statistics(S, ctx, args.workers), args.alpha, X.p)
    else:
        res = matsuda_select(S, ctx, args.alpha, fit_cfg)
    return res, S


# subcommands ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.random:
        if args.p is None:
            raise ConfigError("--random needs --p")
        model, name = random_var_model(args.p, args.k, args.seed), f"random(p={args.p},k={args.k})"
    else:
        model, name = _named_model(args)
    if not check_stationary(model):
        ev = np.abs(np.linalg.eigvals(model.companion()))
        raise ConfigError(
            "model is not stationary; companion eigenvalue moduli: "
            + ", ".join(f"{v:.4g}" for v in sorted(ev, reverse=True))
        )
    if args.n % 2:
        raise ConfigError("--n must be even")
    X = simulate(model, args.n, args.seed, args.burn_in)
    out = _out_dir(args.out_dir)
    write_csv_sample(out / f"{args.prefix}.csv", X)
    doc = model.to_dict()
    doc["name"] = name
    doc["true_missing"] = [list(e) for e in sorted(true_missing_edges(model))]
    (out / f"{args.prefix}_model.json").write_text(json.dumps(doc, indent=2))
    print(f"wrote {out / (args.prefix + '.csv')} ({X.N} x {X.p}); true missing: "
          + json.dumps(doc["true_missing"]))
    return 0


def _render(res, fmt: str) -> str:
    if fmt == "json":
        return res.to_json()
    if fmt == "dot":
        return res.graph.to_dot()
    if fmt == "table":
        return res.format_table()
    if fmt == "csv":
        lines = ["edge_i,edge_j,Z,critical,rejected"]
        for r in res.records:
            z = "" if r.z is None or (isinstance(r.z, float) and math.isnan(r.z)) else repr(float(r.z))
            c = "" if r.critical is None else repr(float(r.critical))
            lines.append(f"{r.edge[0]},{r.edge[1]},{z},{c},{'' if r.rejected is None else int(r.rejected)}")
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown output format {fmt!r}")


_EXT = {"json": "json", "dot": "dot", "table": "txt", "csv": "csv"}


def cmd_select(args) -> int:
    X = read_csv_sample(args.input)
    res, S = run_selection(X, args)
    formats = [f.strip() for f in args.format.split(",")]
    if args.out:
        base = Path(args.out)
        base.parent.mkdir(parents=True, exist_ok=True)
        for fmt in formats:
            Path(f"{base}.{_EXT[fmt]}").write_text(_render(res, fmt))
    else:
        for fmt in formats:
            sys.stdout.write(_render(res, fmt))
    if args.spectra_csv:
        write_spectra_csv(args.spectra_csv, S, all_pairs(X.p))
    return 0


def _load_subject_graph(path, args) -> Graph:
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        return Graph.from_dict(doc.get("graph", doc))
    res, _ = run_selection(read_csv_sample(path), args)
    return res.graph


def cohort_percentages(groups: dict) -> list:
    """Per-edge presence percentages; ``groups`` maps a name to a list of Graphs."""
    ps = {g.p for graphs in groups.values() for g in graphs}
    if len(ps) != 1:
        raise ConfigError(f"subjects disagree on channel count: {sorted(ps)}")
    p = ps.pop()
    rows = []
    for i, e in enumerate(all_pairs(p), start=1):
        row = {"ordinal": i, "edge_i": e[0], "edge_j": e[1]}
        for name, graphs in groups.items():
            row[f"{name}_pct"] = 100.0 * sum(g.has_edge(*e) for g in graphs) / len(graphs)
        rows.append(row)
    return rows


def cmd_cohort(args) -> int:
    if not args.group:
        raise ConfigError("give at least one --group NAME FILE [FILE ...]")
    groups = {}
    for spec in args.group:
        name, files = spec[0], spec[1:]
        if not files:
            raise ConfigError(f"group {name!r} has no files")
        groups[name] = [_load_subject_graph(f, args) for f in files]
    rows = cohort_percentages(groups)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        bench.write_csv(rows, args.out)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return 0


def cmd_bench(args) -> int:
    out = _out_dir(args.out_dir)
    workers = args.workers
    if args.bench == "timing":
        ps = _parse_int_list(args.p)
        if max(ps) > 50 and not args.long:
            raise ConfigError("p above 50 needs --long")
        rows = bench.timing_experiment(ps, args.n, args.m, args.method, args.seed, args.k,
                                       workers, args.repeats)
        summary = {"slope": bench.loglog_slope([r["p"] for r in rows], [r["seconds"] for r in rows])
                   if len(rows) > 1 else None}
    elif args.bench == "power":
        model, name = _named_model(args)
        truth = true_missing_edges(model)
        cand = _parse_edges(args.edges) if args.edges else BORDERLINE.get(name)
        if args.all_edges:
            cand = None
        pool = cand if cand is not None else all_pairs(model.p)
        true_nulls = [e for e in pool if e in truth]
        false_nulls = [e for e in pool if e not in truth]
        grid = bench.mht_alpha_grid(args.alpha_step, args.alpha_max)
        curves = bench.fwer_power_experiment(
            model, true_nulls, false_nulls, args.n, args.m, grid, args.reps, args.seed,
            candidates=cand, methods=tuple(args.methods.split(",")), workers=workers)
        rows = [r for c in curves.values() for r in c.rows()]
        summary = {"true_nulls": true_nulls, "false_nulls": false_nulls, "candidates": cand}
        if {"mht", "stepwise"} <= set(curves):
            summary["matched"] = bench.matched_power(curves["mht"], curves["stepwise"])
    elif args.bench == "errors":
        ps = _parse_int_list(args.p)
        if max(ps) > 50 and not args.long:
            raise ConfigError("p above 50 needs --long")
        alphas = _parse_float_list(args.alpha_grid) if args.alpha_grid else [args.alpha]
        rows = bench.error_rate_experiment(ps, alphas, args.n, args.m, args.reps, args.seed,
                                           args.k, workers)
        summary = {
            "mean_type1_pct": float(np.mean([r["type1_pct"] for r in rows])),
            "mean_type2_pct": float(np.mean([r["type2_pct"] for r in rows])),
        }
    elif args.bench == "parallel":
        counts = [resolve_workers(w) for w in _parse_int_list(args.worker_counts)]
        rows, identical = bench.parallel_scaling_experiment(args.p, args.n, args.m, counts, args.seed,
                                                            args.k, args.repeats)
        summary = {"identical": identical}
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(args.bench)
    bench.write_csv(rows, out / f"bench_{args.bench}.csv")
    summary.update(bench=args.bench, rows=len(rows))
    bench.write_json(summary, out / f"bench_{args.bench}.json")
    print(json.dumps(summary, default=str))
    return 0


# parser -----------------------------------------------------------------------

def _add_selection_opts(sp):
    sp.add_argument("--m", type=int, default=None, help="smoothing half-width (default N/32)")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--method", choices=["mht", "stepwise"], default="mht")
    sp.add_argument("--window", default="cosine")
    sp.add_argument("--cu", type=float, default=None, help="explicit C_u")
    sp.add_argument("--du", type=float, default=None, help="explicit D_u")
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--max-iter", type=int, default=100)
    sp.add_argument("--workers", type=int, default=None)


def _add_model_opts(sp):
    sp.add_argument("--model", default="A", help="A, B or C")
    sp.add_argument("--x", type=float, default=0.0, help="Model B parameter")
    sp.add_argument("--model-json", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tsgraph", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="simulate a VAR model to CSV")
    _add_model_opts(sp)
    sp.add_argument("--random", action="store_true", help="random sparse VAR(1)")
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--n", type=int, default=1024)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--burn-in", type=int, default=None)
    sp.add_argument("--out-dir", default=None)
    sp.add_argument("--prefix", default="sample")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("select", help="estimate the graph of a CSV sample")
    sp.add_argument("input")
    _add_selection_opts(sp)
    sp.add_argument("--format", default="table", help="comma list of json,csv,dot,table")
    sp.add_argument("--out", default=None, help="output path stem; stdout if omitted")
    sp.add_argument("--spectra-csv", default=None)
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("cohort", help="edge presence percentages per group")
    sp.add_argument("--group", nargs="+", action="append", metavar="NAME_OR_FILE",
                    help="group name followed by CSV samples or graph JSON files")
    _add_selection_opts(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_cohort)

    sp = sub.add_parser("bench", help="benchmark studies")
    bsub = sp.add_subparsers(dest="bench", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=1024)
    common.add_argument("--m", type=int, default=32)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--k", type=int, default=5)
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--out-dir", default=None)
    common.add_argument("--long", action="store_true", help="allow full-scale runs")

    b = bsub.add_parser("timing", parents=[common])
    b.add_argument("--method", choices=["mht", "stepwise"], default="mht")
    b.add_argument("--p", default="8,16,32")
    b.add_argument("--repeats", type=int, default=1)

    b = bsub.add_parser("power", parents=[common])
    _add_model_opts(b)
    b.set_defaults(model="B")
    b.add_argument("--reps", type=int, default=100)
    b.add_argument("--edges", default=None, help="evaluated hypotheses, e.g. 2-3,2-5,3-4")
    b.add_argument("--all-edges", action="store_true")
    b.add_argument("--alpha-step", type=float, default=0.00125)
    b.add_argument("--alpha-max", type=float, default=0.5)
    b.add_argument("--methods", default="mht,stepwise")

    b = bsub.add_parser("errors", parents=[common])
    b.add_argument("--p", default="10:29")
    b.add_argument("--alpha", type=float, default=0.05)
    b.add_argument("--alpha-grid", default=None, help="comma list or lo:hi:step")
    b.add_argument("--reps", type=int, default=1)

    b = bsub.add_parser("parallel", parents=[common])
    b.add_argument("--p", type=int, default=30)
    b.add_argument("--worker-counts", default="1,2,4")
    b.add_argument("--repeats", type=int, default=1)
    sp.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if getattr(args, "workers", None) is None and hasattr(args, "workers"):
        args.workers = resolve_workers(None)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (NotPositiveDefiniteError, ConvergenceError, np.linalg.LinAlgError, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
