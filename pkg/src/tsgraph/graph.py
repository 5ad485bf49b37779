"""Undirected graphs on vertices ``1..p`` stored by their missing edges.

Edges are unordered pairs ``(j, k)`` with ``1 <= j < k <= p``. Ordinals run
``1..L`` with ``L = p(p-1)/2`` in row-major order
``(1,2), (1,3), ..., (1,p), (2,3), ..., (p-1,p)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DomainError

__all__ = [
    "Graph",
    "n_edges",
    "all_pairs",
    "edge_index_to_pair",
    "pair_to_edge_index",
    "single_missing_graphs",
    "is_correct_for",
]


def n_edges(p: int) -> int:
    return p * (p - 1) // 2


def _check_p(p):
    if int(p) != p or p < 2:
        raise DomainError(f"vertex count must be an integer >= 2, got {p!r}")


def canonical_pair(pair, p: int | None = None) -> tuple[int, int]:
    j, k = (int(v) for v in pair)
    if j == k:
        raise DomainError(f"self-loop ({j},{k}) is not an edge")
    if j > k:
        j, k = k, j
    if j < 1 or (p is not None and k > p):
        raise DomainError(f"pair ({j},{k}) out of range for p={p}")
    return j, k


def edge_index_to_pair(i: int, p: int) -> tuple[int, int]:
    """Return the ``i``-th unordered pair (1-based) in canonical order."""
    _check_p(p)
    L = n_edges(p)
    if int(i) != i or not 1 <= i <= L:
        raise DomainError(f"edge ordinal {i!r} outside 1..{L}")
    i = int(i)
    j = 1
    # rows shrink by one each time: row j holds p - j pairs
    while i > p - j:
        i -= p - j
        j += 1
    return j, j + i


def pair_to_edge_index(pair, p: int) -> int:
    _check_p(p)
    j, k = canonical_pair(pair, p)
    return (j - 1) * p - j * (j - 1) // 2 + (k - j)


def all_pairs(p: int) -> list[tuple[int, int]]:
    _check_p(p)
    return [(j, k) for j in range(1, p) for k in range(j + 1, p + 1)]


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph; every pair not listed in ``missing`` is an edge."""

    p: int
    missing: frozenset = frozenset()

    def __post_init__(self):
        _check_p(self.p)
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(
            self, "missing", frozenset(canonical_pair(e, self.p) for e in self.missing)
        )

    @classmethod
    def saturated(cls, p: int) -> "Graph":
        return cls(p)

    @classmethod
    def empty(cls, p: int) -> "Graph":
        return cls(p, frozenset(all_pairs(p)))

    @property
    def n_missing(self) -> int:
        return len(self.missing)

    @property
    def is_saturated(self) -> bool:
        return not self.missing

    def present_edges(self) -> list[tuple[int, int]]:
        return [e for e in all_pairs(self.p) if e not in self.missing]

    def missing_sorted(self) -> list[tuple[int, int]]:
        """Missing pairs in canonical ordinal order."""
        return sorted(self.missing)

    def has_edge(self, j: int, k: int) -> bool:
        return canonical_pair((j, k), self.p) not in self.missing

    def without(self, pairs: Iterable) -> "Graph":
        """Copy with ``pairs`` additionally removed."""
        return Graph(self.p, self.missing | {canonical_pair(e, self.p) for e in pairs})

    def to_dict(self) -> dict:
        return {"p": self.p, "missing": [list(e) for e in self.missing_sorted()]}

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        return cls(int(d["p"]), frozenset(tuple(e) for e in d["missing"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "Graph":
        return cls.from_dict(json.loads(s))

    def to_dot(self, name: str = "G") -> str:
        lines = [f"graph {name} {{"]
        lines += [f"  {v};" for v in range(1, self.p + 1)]
        lines += [f"  {j} -- {k};" for j, k in self.present_edges()]
        lines.append("}")
        return "\n".join(lines) + "\n"


def single_missing_graphs(p: int) -> list[Graph]:
    """The ``L`` graphs with exactly one missing edge, ordered by ordinal."""
    return [Graph(p, frozenset([e])) for e in all_pairs(p)]


def is_correct_for(candidate: Graph, inverse_spectrum, tol: float = 0.0) -> bool:
    """True if every missing pair of ``candidate`` has ``|S^{jk}(f)| <= tol``
    at all frequencies of ``inverse_spectrum``.

    ``inverse_spectrum`` is an array ``(n_freq, p, p)`` or an object exposing
    such an array as ``.values``.
    """
    values = np.asarray(getattr(inverse_spectrum, "values", inverse_spectrum))
    if values.ndim == 2:
        values = values[None]
    if values.ndim != 3 or values.shape[1:] != (candidate.p, candidate.p):
        raise DomainError(
            f"inverse spectrum of shape {values.shape} does not match p={candidate.p}"
        )
    if tol < 0:
        raise DomainError("tol must be non-negative")
    for j, k in candidate.missing:
        if np.max(np.abs(values[:, j - 1, k - 1])) > tol:
            return False
    return True
