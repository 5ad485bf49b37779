"""Constrained spectral matrices for a graph.

Given Hermitian positive definite ``S`` and a set of missing pairs, find ``T``
with ``T_jk = S_jk`` on the diagonal and present pairs and ``(T^{-1})_jk = 0``
on missing pairs. A single missing pair has a closed form; several pairs are
handled by cycling the closed-form update; when a few cycles leave the
residual above tolerance, damped Newton steps on the missing entries finish
the job (the cyclic scheme alone converges only linearly).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, NotPositiveDefiniteError
from .graph import canonical_pair

__all__ = [
    "FitConfig",
    "hermitian_inverse",
    "check_positive_definite",
    "fit_single_missing",
    "fit_constrained",
    "fit_field",
    "missing_residual",
]

MAX_CONDITION = 1e12
NEWTON_AFTER = 3  # cyclic passes before switching to Newton
NEWTON_MAX_PAIRS = 64  # Newton system is 2m x 2m per frequency


@dataclass(frozen=True)
class FitConfig:
    tol: float = 1e-8
    max_iter: int = 100

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")


def check_positive_definite(S, max_condition: float = MAX_CONDITION) -> None:
    """Raise :class:`NotPositiveDefiniteError` unless every matrix in the stack is PD
    with condition number below ``max_condition``."""
    S = np.asarray(S)
    stack = S.reshape((-1,) + S.shape[-2:])
    ev = np.linalg.eigvalsh(stack)
    lo, hi = ev[:, 0], ev[:, -1]
    bad = np.flatnonzero(~(lo > 0) | (hi > max_condition * np.where(lo > 0, lo, np.inf)))
    if bad.size:
        i = int(bad[0])
        what = "not positive definite" if not lo[i] > 0 else f"ill-conditioned ({hi[i] / lo[i]:.3g})"
        raise NotPositiveDefiniteError(f"matrix at index {i} is {what}", index=i)


def hermitian_inverse(S) -> np.ndarray:
    """Inverse of a (stack of) Hermitian PD matrices via Cholesky."""
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        check_positive_definite(S, np.inf)
        raise
    Linv = np.linalg.inv(L)
    A = np.conj(np.swapaxes(Linv, -1, -2)) @ Linv
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


def _pairs0(missing, p):
    pairs = sorted(canonical_pair(e, p) for e in missing)
    return [(j - 1, k - 1) for j, k in pairs]


def _single_update(T, A, a, b):
    """In-place closed-form update of entry (a, b) zeroing ``inv(T)[a, b]``."""
    ajk = A[..., a, b]
    det = A[..., a, a].real * A[..., b, b].real - np.abs(ajk) ** 2
    T[..., a, b] = T[..., a, b] + ajk / det
    T[..., b, a] = np.conj(T[..., a, b])


def fit_single_missing(S, pair) -> np.ndarray:
    """Closed-form ``T`` for one missing pair (1-based ``(j, k)``).

    ``T`` differs from ``S`` only at ``(j,k)`` and ``(k,j)``:
    ``T_jk = S_jk + A_jk / (A_jj A_kk - |A_jk|^2)`` with ``A = S^{-1}``.
    Works on a single matrix or a stack ``(..., p, p)``.
    """
    S = np.asarray(S)
    p = S.shape[-1]
    j, k = canonical_pair(pair, p)
    check_positive_definite(S)
    A = hermitian_inverse(S)
    T = S.astype(complex, copy=True)
    _single_update(T, A, j - 1, k - 1)
    return T


def missing_residual(A, pairs0) -> np.ndarray:
    """Per-matrix ``max |A_jk| / mean |diag A|`` over the given 0-based pairs."""
    if not pairs0:
        return np.zeros(A.shape[:-2])
    a = np.array([q[0] for q in pairs0])
    b = np.array([q[1] for q in pairs0])
    num = np.abs(A[..., a, b]).max(axis=-1)
    return num / np.abs(np.diagonal(A, axis1=-2, axis2=-1)).mean(axis=-1)


def _logdet(T):
    sign, ld = np.linalg.slogdet(T)
    return np.where(sign.real > 0, ld, -np.inf)


def _newton_pass(T, A, pairs, active):
    """One damped Newton step on the missing entries of the ``active`` matrices.

    Solves ``r + P dx + Q conj(dx) = 0`` for ``r = A[missing]``, the
    linearization of the missing inverse entries, in real form. Steps are
    halved until the matrix stays PD and ``log det T`` does not decrease.
    """
    idx = np.flatnonzero(active)
    if not idx.size:
        return
    Tb, Ab = T[idx], A[idx]
    a = np.array([q[0] for q in pairs])
    b = np.array([q[1] for q in pairs])
    m = len(pairs)
    r = Ab[:, a, b]
    P = -Ab[:, a[:, None], a[None, :]] * Ab[:, b[None, :], b[:, None]]
    Q = -Ab[:, a[:, None], b[None, :]] * Ab[:, a[None, :], b[:, None]]
    J = np.empty((idx.size, 2 * m, 2 * m))
    J[:, :m, :m] = (P + Q).real
    J[:, :m, m:] = -(P - Q).imag
    J[:, m:, :m] = (P + Q).imag
    J[:, m:, m:] = (P - Q).real
    rhs = -np.concatenate([r.real, r.imag], axis=1)[..., None]
    try:
        sol = np.linalg.solve(J, rhs)[..., 0]
    except np.linalg.LinAlgError:
        return  # leave these to the next cyclic pass
    dx = sol[:, :m] + 1j * sol[:, m:]
    base = _logdet(Tb)
    step = np.ones(idx.size)
    x0 = Tb[:, a, b]
    for _ in range(40):
        x = x0 + step[:, None] * dx
        Tn = Tb.copy()
        Tn[:, a, b] = x
        Tn[:, b, a] = np.conj(x)
        ok = _logdet(Tn) >= base - 1e-12 * np.abs(base)
        ok &= np.linalg.eigvalsh(Tn)[:, 0] > 0
        if ok.all():
            break
        step = np.where(ok, step, 0.5 * step)
    else:
        step = np.where(ok, step, 0.0)
        x = x0 + step[:, None] * dx
    T[idx[:, None], a[None, :], b[None, :]] = x
    T[idx[:, None], b[None, :], a[None, :]] = np.conj(x)


def fit_constrained(S, missing, cfg: FitConfig = FitConfig(), start=None):
    """Cyclic fit for an arbitrary missing set; returns ``(T, cycles)``.

    ``S`` may be one matrix or a stack ``(n, p, p)``; the whole stack iterates
    together and ``cycles`` is the number of full passes over the missing
    pairs (in ordinal order). ``start`` optionally warm-starts the missing
    entries; all other entries are copied from ``S`` and never written.
    """
    S = np.asarray(S)
    single = S.ndim == 2
    Sb = S[None] if single else S
    p = Sb.shape[-1]
    pairs = _pairs0(missing, p)
    check_positive_definite(Sb)
    T = Sb.astype(complex, copy=True)
    if not pairs:
        return (T[0] if single else T), 0
    if start is not None:
        st = np.asarray(start)
        st = st[None] if st.ndim == 2 else st
        for a, b in pairs:
            T[:, a, b] = st[:, a, b]
            T[:, b, a] = np.conj(st[:, a, b])
    cycles = 0
    A = hermitian_inverse(T)
    res = missing_residual(A, pairs)
    while res.max() > cfg.tol:
        if cycles >= cfg.max_iter:
            worst = int(np.argmax(res))
            raise ConvergenceError(
                f"constrained fit not converged after {cycles} cycles "
                f"(residual {res.max():.3g} at index {worst})",
                residual=float(res.max()),
                index=worst,
            )
        if cycles >= NEWTON_AFTER and len(pairs) <= NEWTON_MAX_PAIRS:
            _newton_pass(T, A, pairs, res > cfg.tol)
        else:
            for n, (a, b) in enumerate(pairs):
                if n:
                    A = hermitian_inverse(T)
                _single_update(T, A, a, b)
        cycles += 1
        A = hermitian_inverse(T)
        res = missing_residual(A, pairs)
    return (T[0] if single else T), cycles


def fit_field(S, missing, cfg: FitConfig = FitConfig(), start=None):
    """Apply :func:`fit_constrained` at every frequency of a spectral field.

    Returns ``(field, cycles)``. Failures carry the offending Fourier index.
    """
    try:
        T, cycles = fit_constrained(S.values, missing, cfg, None if start is None else start.values)
    except (NotPositiveDefiniteError, ConvergenceError) as exc:
        if exc.index is not None:
            exc.index = int(S.index[exc.index])
            exc.args = (f"{exc.args[0]} [Fourier index {exc.index}]",)
        raise
    return S.replace(T), cycles
