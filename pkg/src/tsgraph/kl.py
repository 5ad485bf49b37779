"""Estimated Kullback-Leibler divergence between spectral fields and the
standardized statistic built from it.

``eKL(T1, T2) = (1/N) sum_{j=1}^{N/2} [tr(T1 T2^{-1}) - log det(T1 T2^{-1}) - p]``

``Z = sqrt(2MN / (D_u dm)) * (eKL - C_u dm / (2M))`` with ``dm = m2 - m1``
the difference in the number of missing edges.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotPositiveDefiniteError
from .fit import check_positive_definite, hermitian_inverse
from .graph import all_pairs
from .spectral import SpectralMatrixField, WindowConstants

__all__ = [
    "KlContext",
    "TestRecord",
    "ekl",
    "ekl_terms",
    "z_from_ekl",
    "z_statistic",
    "all_single_edge_statistics",
    "single_edge_ekl",
    "resolve_workers",
]

# complex elements per edge chunk; fixed so chunk boundaries never depend on
# the worker count
CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class KlContext:
    N: int
    M: int
    constants: WindowConstants
    p: int

    def __post_init__(self):
        if self.N % 2 or self.N < 2:
            raise DomainError("N must be even")
        if self.M < 1:
            raise DomainError("M must be >= 1")


@dataclass
class TestRecord:
    """One hypothesis: ``edge`` missing. ``critical``/``rejected`` are filled by a
    selection rule."""

    __test__ = False  # keep pytest from collecting this class

    edge: tuple
    ordinal: int
    z: float
    critical: float | None = None
    rejected: bool | None = None

    def to_dict(self) -> dict:
        return {
            "ordinal": self.ordinal,
            "edge": list(self.edge),
            "z": _finite_or_none(self.z),
            "critical": _finite_or_none(self.critical),
            "rejected": self.rejected,
        }


def _finite_or_none(v):
    if v is None or not math.isfinite(v):
        return None
    return float(v)


def _used(field: SpectralMatrixField) -> np.ndarray:
    """Matrices at Fourier indices ``1..N/2`` in order."""
    want = np.arange(1, field.N // 2 + 1)
    if field.is_full:
        return field.values[want]
    if np.array_equal(field.index, want):
        return field.values
    return field.subset(want).values


def ekl_terms(T1, T2) -> np.ndarray:
    """Per-matrix ``tr(T1 T2^{-1}) - log det(T1 T2^{-1}) - p`` for stacks of
    Hermitian PD matrices, as ``sum(lam - log lam - 1)`` over the eigenvalues of
    ``L^{-1} T1 L^{-H}`` where ``T2 = L L^H``."""
    T1 = np.asarray(T1)
    T2 = np.asarray(T2)
    single = T1.ndim == 2
    if single:
        T1, T2 = T1[None], T2[None]
    for T in (T1, T2):
        try:
            np.linalg.cholesky(T)
        except np.linalg.LinAlgError:
            check_positive_definite(T, np.inf)
            raise
    L = np.linalg.cholesky(T2)
    X = np.linalg.solve(L, T1)
    B = np.conj(np.swapaxes(np.linalg.solve(L, np.conj(np.swapaxes(X, -1, -2))), -1, -2))
    lam = np.linalg.eigvalsh(0.5 * (B + np.conj(np.swapaxes(B, -1, -2))))
    if np.any(lam <= 0):
        i = int(np.flatnonzero((lam <= 0).any(axis=-1))[0])
        raise NotPositiveDefiniteError(f"non-positive eigenvalue at index {i}", index=i)
    out = np.sum(lam - np.log(lam) - 1.0, axis=-1)
    return out[0] if single else out


def ekl(T1: SpectralMatrixField, T2: SpectralMatrixField) -> float:
    if T1.N != T2.N or T1.p != T2.p:
        raise DomainError("fields differ in N or p")
    try:
        terms = ekl_terms(_used(T1), _used(T2))
    except NotPositiveDefiniteError as exc:
        if exc.index is not None:
            exc.index += 1
            exc.args = (f"{exc.args[0]} [Fourier index {exc.index}]",)
        raise
    return float(np.sum(terms)) / T1.N


def z_from_ekl(value: float, m1: int, m2: int, ctx: KlContext) -> float:
    dm = m2 - m1
    if dm <= 0:
        raise DomainError(f"need m2 > m1, got m1={m1}, m2={m2}")
    c = ctx.constants
    scale = math.sqrt(2 * ctx.M * ctx.N / (c.D_u * dm))
    return scale * (value - c.C_u * dm / (2 * ctx.M))


def z_statistic(T1, T2, m1: int, m2: int, ctx: KlContext) -> float:
    if m2 <= m1:
        raise DomainError(f"need m2 > m1, got m1={m1}, m2={m2}")
    return z_from_ekl(ekl(T1, T2), m1, m2, ctx)


def single_edge_ekl(S, A, J, K) -> np.ndarray:
    """Divergence terms between ``S`` and its one-missing-edge fits.

    ``S`` and ``A = S^{-1}`` are ``(F, p, p)``; ``J``, ``K`` are 0-based index
    arrays of length ``e``. Returns ``(e, F)`` per-frequency terms. A fit moves
    only the entry pair ``(j, k)`` by ``d``, so with ``U = [e_j, e_k]`` and
    ``D = [[0, d], [conj d, 0]]``::

        T^{-1} = A - A U G U^H A,   G = (I + D A_aa)^{-1} D
        det(T S^{-1}) = det(I + D A_aa)

    and ``tr(S T^{-1})`` costs ``O(p^2)`` per edge and frequency.
    """
    F, p, _ = S.shape
    ajj = A[:, J, J].real
    akk = A[:, K, K].real
    ajk = A[:, J, K]
    d = ajk / (ajj * akk - np.abs(ajk) ** 2)  # T_jk - S_jk, (F, e)
    # I + D A_aa, entrywise
    m00 = 1 + d * np.conj(ajk)
    m01 = d * akk
    m10 = np.conj(d) * ajj
    m11 = 1 + np.conj(d) * ajk
    det = (m00 * m11 - m01 * m10).real
    if np.any(det <= 0):
        f = int(np.flatnonzero((det <= 0).any(axis=1))[0])
        raise NotPositiveDefiniteError(f"single-edge fit not PD at index {f}", index=f)
    # G = (I + D A_aa)^{-1} D via the 2x2 adjugate
    dc = np.conj(d)
    g00 = -m01 * dc / det
    g01 = m11 * d / det
    g10 = m00 * dc / det
    g11 = -m10 * d / det
    AJ = A[:, :, J]  # (F, p, e): A U[:, 0]
    AK = A[:, :, K]
    H0 = AJ * g00[:, None, :] + AK * g10[:, None, :]
    H1 = AJ * g01[:, None, :] + AK * g11[:, None, :]
    # tr(S A U G U^H A) = sum_b conj(A_bj) (S H0)_b + conj(A_bk) (S H1)_b
    corr = np.sum(np.conj(AJ) * (S @ H0) + np.conj(AK) * (S @ H1), axis=1).real
    trSA = np.einsum("fab,fba->f", S, A).real
    terms = (trSA[:, None] - corr) + np.log(det) - p
    return np.ascontiguousarray(terms.T)


def resolve_workers(workers) -> int:
    if workers is None:
        workers = int(os.environ.get("TSGRAPH_WORKERS", "1"))
    if workers in (0, -1):
        workers = os.cpu_count() or 1
    if workers < 1:
        raise DomainError("worker count must be >= 1")
    return int(workers)


def all_single_edge_statistics(
    S_hat: SpectralMatrixField, ctx: KlContext, workers=1, edges=None
) -> list[TestRecord]:
    """``Z(S_hat, T_1^i)`` for every single-missing-edge graph ``i = 1..L``.

    ``edges`` optionally restricts evaluation to a subset of pairs; the rest get
    ``z = +inf`` (treated as certainly present). Results are identical for any
    ``workers``; chunk boundaries depend only on the problem size.
    """
    p = S_hat.p
    if p != ctx.p or S_hat.N != ctx.N:
        raise DomainError("field does not match context")
    S = _used(S_hat)
    try:
        check_positive_definite(S)
    except NotPositiveDefiniteError as exc:
        exc.index = None if exc.index is None else exc.index + 1
        exc.args = (
            f"{exc.args[0]} (Fourier index {exc.index}); need 2M+1 >= p effective "
            "smoothing weights (the cosine end weights vanish, so 2M-1 >= p there)",
        )
        raise
    A = hermitian_inverse(S)
    pairs = all_pairs(p)
    wanted = set(pairs) if edges is None else {tuple(sorted(e)) for e in edges}
    todo = [i for i, e in enumerate(pairs) if e in wanted]
    F = S.shape[0]
    size = max(1, CHUNK_ELEMENTS // (F * p))
    chunks = [todo[i:i + size] for i in range(0, len(todo), size)]

    def run(chunk):
        J = np.array([pairs[i][0] - 1 for i in chunk])
        K = np.array([pairs[i][1] - 1 for i in chunk])
        return np.sum(single_edge_ekl(S, A, J, K), axis=1) / ctx.N

    nw = min(resolve_workers(workers), max(1, len(chunks)))
    if nw == 1:
        parts = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            parts = list(pool.map(run, chunks))
    values = dict(zip(todo, np.concatenate(parts) if parts else []))
    records = []
    for i, e in enumerate(pairs):
        z = z_from_ekl(values[i], 0, 1, ctx) if i in values else math.inf
        records.append(TestRecord(e, i + 1, z))
    return records
