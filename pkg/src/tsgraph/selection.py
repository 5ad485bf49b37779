"""Graph selection: Holm stepdown over single-edge tests, and backward
stepwise elimination."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Iterator

import numpy as np

from .errors import ConvergenceError, DomainError
from .fit import FitConfig, fit_field
from .graph import Graph, all_pairs, n_edges, pair_to_edge_index
from .kl import KlContext, TestRecord, ekl, z_from_ekl
from .spectral import SpectralMatrixField

__all__ = [
    "TestRecord",
    "SelectionResult",
    "StepTable",
    "gaussian_quantile",
    "holm_levels",
    "stepwise_level",
    "mht_select",
    "stepwise_steps",
    "stepwise_stop",
    "matsuda_select",
    "stepwise_count",
]

_STD_NORMAL = NormalDist()


def gaussian_quantile(q: float) -> float:
    """Inverse standard normal CDF."""
    if not 0.0 < q < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {q!r}")
    return _STD_NORMAL.inv_cdf(q)


def holm_levels(L: int, alpha: float) -> np.ndarray:
    """``C_i = Phi^{-1}(1 - alpha / i)`` for ``i = 1..L``.

    ``alpha = 0`` gives infinite levels (nothing can be rejected).
    """
    if L < 1:
        raise DomainError("L must be >= 1")
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"alpha must lie in [0, 1), got {alpha!r}")
    if alpha == 0:
        return np.full(L, np.inf)
    return np.array([gaussian_quantile(1 - alpha / i) for i in range(1, L + 1)])


def stepwise_level(L_k: int, alpha: float) -> float:
    """``C_k = Phi^{-1}((1 - alpha)^(1 / L_k))``."""
    if L_k < 1:
        raise DomainError("L_k must be >= 1")
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"alpha must lie in [0, 1), got {alpha!r}")
    if alpha == 0:
        return math.inf
    q = math.exp(math.log1p(-alpha) / L_k)
    if q >= 1.0:
        return math.inf
    return gaussian_quantile(q)


def stepwise_count(L: int, k: int) -> int:
    """Statistics evaluated by the stepwise procedure stopping after ``k`` removals:
    ``L + (L - 1) + ... + (L - k)``."""
    return (k + 1) * L - k * (k + 1) // 2


@dataclass
class StepTable:
    """Statistics of one stepwise step: removing each candidate from ``missing``."""

    k: int
    missing: tuple
    z: dict  # edge -> statistic
    level: float | None = None
    removed: tuple | None = None
    cycles: int = 0

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "missing": [list(e) for e in self.missing],
            "level": None if self.level is None or not math.isfinite(self.level) else self.level,
            "removed": None if self.removed is None else list(self.removed),
            "statistics": [
                {"edge": list(e), "z": z if math.isfinite(z) else None}
                for e, z in sorted(self.z.items())
            ],
        }


@dataclass
class SelectionResult:
    graph: Graph
    records: list
    method: str
    alpha: float
    statistics_computed: int
    steps: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "alpha": self.alpha,
            "graph": self.graph.to_dict(),
            "statistics_computed": self.statistics_computed,
            "records": [r.to_dict() for r in self.records],
            "steps": [s.to_dict() for s in self.steps],
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def format_table(self) -> str:
        if self.method == "mht":
            return _mht_table(self)
        return _stepwise_table(self)


def _fmt(v, width=8):
    if v is None:
        return "---".rjust(width)
    if not math.isfinite(v):
        return "inf".rjust(width)
    return f"{v:{width}.2f}"


def _mht_table(res: SelectionResult) -> str:
    order = sorted(res.records, key=lambda r: (r.z, r.ordinal), reverse=True)
    lines = [f"{'i':>4}  {'Missing Edge':<12} {'Z_(i)':>8} {'C_i':>8}  decision"]
    L = len(order)
    for rank, r in enumerate(order):
        edge = f"({r.edge[0]},{r.edge[1]})"
        dec = "reject" if r.rejected else "accept"
        lines.append(f"{L - rank:>4}  {edge:<12} {_fmt(r.z)} {_fmt(r.critical)}  {dec}")
    return "\n".join(lines) + "\n"


def _stepwise_table(res: SelectionResult) -> str:
    p = res.graph.p
    steps = res.steps
    head = f"{'Edge':<8}" + "".join(f"{'k=' + str(s.k):>9}" for s in steps)
    lines = [head]
    for e in all_pairs(p):
        row = f"({e[0]},{e[1]})".ljust(8)
        for s in steps:
            z = s.z.get(e)
            cell = _fmt(z) if z is not None else "---".rjust(8)
            if s.removed == e:
                cell = cell.rstrip() + "*"
                cell = cell.rjust(8)
            row += " " + cell
        lines.append(row)
    lines.append("C_k".ljust(8) + "".join(" " + _fmt(s.level) for s in steps))
    return "\n".join(lines) + "\n"


def mht_select(records, alpha: float, p: int | None = None) -> SelectionResult:
    """Holm maximin stepdown over the single-edge statistics.

    Sorted ascending (ties by ordinal), the largest statistic is compared with
    ``C_L``, the next with ``C_{L-1}`` and so on; the first statistic below its
    level and all smaller ones are accepted, i.e. their edges are missing.
    """
    records = list(records)
    if p is None:
        L = len(records)
        p = int(round((1 + math.sqrt(1 + 8 * L)) / 2))
    L = n_edges(p)
    ords = [r.ordinal for r in records]
    if len(set(ords)) != len(ords):
        raise DomainError("duplicate edge ordinals")
    if sorted(ords) != list(range(1, L + 1)):
        raise DomainError(f"need exactly one record per ordinal 1..{L}")
    levels = holm_levels(L, alpha)
    order = sorted(records, key=lambda r: (r.z, r.ordinal))
    out = {}
    accepting = False
    for i in range(L, 0, -1):
        r = order[i - 1]
        if not accepting and not r.z >= levels[i - 1]:
            accepting = True
        out[r.ordinal] = TestRecord(r.edge, r.ordinal, r.z, float(levels[i - 1]), not accepting)
    final = [out[o] for o in range(1, L + 1)]
    graph = Graph(p, frozenset(r.edge for r in final if not r.rejected))
    return SelectionResult(graph, final, "mht", alpha, L)


def stepwise_steps(
    S_hat: SpectralMatrixField,
    ctx: KlContext,
    fit_cfg: FitConfig = FitConfig(),
    candidates=None,
) -> Iterator[StepTable]:
    """Yield the per-step statistic tables of backward elimination.

    Step ``k`` tests every remaining candidate pair against the current graph
    and the consumer decides whether to stop; if it keeps iterating the pair
    with the smallest statistic (ties by ordinal) is removed. Pairs outside
    ``candidates`` are reported with ``z = +inf``. The iteration ends once no
    finite candidate remains.
    """
    p = S_hat.p
    half = S_hat.positive_half()
    pool = all_pairs(p) if candidates is None else sorted(tuple(sorted(e)) for e in candidates)
    missing: list = []
    T_k = half
    k = 0
    while True:
        remaining = [e for e in all_pairs(p) if e not in missing]
        if not remaining:
            return
        z = {}
        cycles = 0
        for e in remaining:
            if e not in pool:
                z[e] = math.inf
                continue
            try:
                T_next, c = fit_field(half, missing + [e], fit_cfg, start=T_k)
            except ConvergenceError as exc:
                raise ConvergenceError(
                    f"step {k}, edge {e}: {exc}", residual=exc.residual, index=exc.index
                ) from exc
            cycles = max(cycles, c)
            z[e] = z_from_ekl(ekl(T_k, T_next), k, k + 1, ctx)
        finite = [e for e in remaining if math.isfinite(z[e])]
        table = StepTable(k, tuple(sorted(missing)), z, cycles=cycles)
        if not finite:
            yield table
            return
        drop = min(finite, key=lambda e: (z[e], pair_to_edge_index(e, p)))
        table.removed = drop
        yield table
        missing.append(drop)
        T_k, _ = fit_field(half, missing, fit_cfg, start=T_k)
        k += 1


def stepwise_stop(table: StepTable, L: int, alpha: float) -> bool:
    """True when every statistic of the step exceeds its critical level."""
    L_k = L - table.k
    level = stepwise_level(L_k, alpha)
    table.level = level
    finite = [v for v in table.z.values() if math.isfinite(v)]
    if not finite:
        return True
    return all(v > level for v in table.z.values())


def stepwise_final_k(steps: list, L: int, alpha: float) -> int:
    """Number of removals the stepwise rule makes at ``alpha`` along a computed path."""
    for s in steps:
        if stepwise_stop(s, L, alpha):
            return s.k
    return len(steps)


def matsuda_select(
    S_hat: SpectralMatrixField,
    ctx: KlContext,
    alpha: float,
    fit_cfg: FitConfig = FitConfig(),
    candidates=None,
) -> SelectionResult:
    """Backward stepwise selection with levels ``Phi^{-1}((1-alpha)^(1/L_k))``."""
    p = S_hat.p
    L = n_edges(p)
    steps = []
    computed = 0
    for table in stepwise_steps(S_hat, ctx, fit_cfg, candidates):
        steps.append(table)
        computed += sum(math.isfinite(v) for v in table.z.values())
        if stepwise_stop(table, L, alpha):
            table.removed = None
            break
    missing = frozenset(s.removed for s in steps if s.removed is not None)
    graph = Graph(p, missing)
    last = steps[-1] if steps else None
    records = []
    for i, e in enumerate(all_pairs(p), start=1):
        if last is not None and e in last.z:
            z = last.z[e]
            rejected = e not in missing
            records.append(TestRecord(e, i, z, last.level, rejected))
        else:
            records.append(TestRecord(e, i, math.nan, None, False))
    return SelectionResult(graph, records, "stepwise", alpha, computed, steps)
