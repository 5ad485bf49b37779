"""Matrix periodogram and the frequency-averaged (smoothed) periodogram."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .var import SampleMatrix, partial_coherence

__all__ = [
    "SpectralMatrixField",
    "WeightSequence",
    "WindowConstants",
    "SingularRiskWarning",
    "periodogram",
    "lag_window_weights",
    "cosine_weights",
    "smooth",
    "estimate_spectrum",
    "window_constants",
    "write_spectra_csv",
]


class SingularRiskWarning(UserWarning):
    """Fewer than ``p`` smoothing weights: the estimate is singular."""


def _hermitize(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


@dataclass(frozen=True, eq=False)
class SpectralMatrixField:
    """Hermitian ``p x p`` matrices at Fourier frequencies ``j/N``.

    ``values[i]`` sits at Fourier index ``index[i]``; a full field has
    ``index == arange(N)``. ``singular_risk`` marks estimates built with
    fewer than ``p`` non-zero weights.
    """

    values: np.ndarray
    N: int
    index: np.ndarray = None
    singular_risk: bool = False

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise DomainError(f"field values must be (n, p, p), got {v.shape}")
        idx = np.arange(self.N) if self.index is None else np.asarray(self.index, dtype=int)
        if idx.shape != (v.shape[0],):
            raise DomainError("index length does not match number of matrices")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "index", idx)

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def freqs(self) -> np.ndarray:
        return self.index / self.N

    @property
    def is_full(self) -> bool:
        return len(self.index) == self.N and np.array_equal(self.index, np.arange(self.N))

    def at(self, j: int) -> np.ndarray:
        """Matrix at Fourier index ``j`` (periodic)."""
        j = j % self.N
        if self.is_full:
            return self.values[j]
        hit = np.flatnonzero(self.index == j)
        if not hit.size:
            raise KeyError(f"Fourier index {j} not stored in this field")
        return self.values[hit[0]]

    def subset(self, indices) -> "SpectralMatrixField":
        indices = np.asarray(indices, dtype=int) % self.N
        vals = np.stack([self.at(j) for j in indices]) if not self.is_full else self.values[indices]
        return SpectralMatrixField(vals, self.N, indices, self.singular_risk)

    def positive_half(self) -> "SpectralMatrixField":
        """Indices ``1..N/2``, the range summed by the divergence."""
        return self.subset(np.arange(1, self.N // 2 + 1))

    def replace(self, values) -> "SpectralMatrixField":
        return SpectralMatrixField(values, self.N, self.index, self.singular_risk)


@dataclass(frozen=True, eq=False)
class WeightSequence:
    """Symmetric positive weights ``w_{-M}..w_M`` summing to one."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or w.size % 2 == 0:
            raise DomainError("weight sequence must have odd length 2M+1")
        if np.any(w <= 0):
            raise DomainError("weights must be strictly positive")
        if not np.allclose(w, w[::-1], rtol=0, atol=1e-15):
            raise DomainError("weights must be symmetric")
        if abs(w.sum() - 1) > 1e-12:
            raise DomainError("weights must sum to one")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def M(self) -> int:
        return (self.w.size - 1) // 2

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)


@dataclass(frozen=True)
class WindowConstants:
    """Centering (``C_u``) and scaling (``D_u``) constants of a weight shape."""

    C_u: float
    D_u: float
    name: str = "custom"

    def __post_init__(self):
        if not self.D_u > 0:
            raise ConfigError("D_u must be positive")


# Constants for u(x) = cos(pi x) as tabulated for the cosine window.
KNOWN_WINDOWS = {"cosine": (0.617, 0.446)}

SHAPES = {"cosine": lambda x: np.cos(np.pi * x)}


def window_constants(name: str = "cosine", C_u: float | None = None, D_u: float | None = None) -> WindowConstants:
    """Look up the constants for ``name`` or pass through explicit values."""
    if C_u is not None or D_u is not None:
        if C_u is None or D_u is None:
            raise ConfigError("both C_u and D_u must be supplied")
        return WindowConstants(float(C_u), float(D_u), name)
    try:
        c, d = KNOWN_WINDOWS[name]
    except KeyError:
        raise ConfigError(
            f"no tabulated constants for window {name!r}; supply C_u and D_u"
        ) from None
    return WindowConstants(c, d, name)


def lag_window_weights(shape, M: int) -> WeightSequence:
    """Evaluate ``u(k / 2M)`` for ``k = -M..M``, floor at 1e-12 and normalize."""
    if M < 1:
        raise DomainError("half-width M must be >= 1")
    u = SHAPES[shape] if isinstance(shape, str) else shape
    k = np.arange(-M, M + 1)
    raw = np.maximum(np.asarray(u(k / (2 * M)), dtype=float), 1e-12)
    raw = 0.5 * (raw + raw[::-1])
    return WeightSequence(raw / raw.sum())


def cosine_weights(M: int) -> WeightSequence:
    return lag_window_weights("cosine", M)


def periodogram(X, demean: bool = True) -> SpectralMatrixField:
    """``W(f_j) W(f_j)^H`` with ``W(f) = sum_t X_t exp(-i 2 pi f t) / sqrt(N)``.

    ``X`` is a :class:`SampleMatrix` or a ``(p, N)`` array.
    """
    x = X.values if isinstance(X, SampleMatrix) else np.asarray(X, dtype=float)
    if x.ndim == 1:
        x = x[None]
    N = x.shape[1]
    if demean:
        x = x - x.mean(axis=1, keepdims=True)
    W = np.fft.fft(x, axis=1) / np.sqrt(N)  # (p, N)
    Wt = W.T
    vals = Wt[:, :, None] * np.conj(Wt[:, None, :])
    return SpectralMatrixField(vals, N)


def smooth(pdgm: SpectralMatrixField, w: WeightSequence) -> SpectralMatrixField:
    """Circular weighted average ``sum_k w_k S_P(f_{j-k})``."""
    if not pdgm.is_full:
        raise DomainError("smoothing needs the full periodic field")
    N, p, M = pdgm.N, pdgm.p, w.M
    if 2 * M + 1 > N:
        raise DomainError(f"2M+1={2 * M + 1} exceeds N={N}")
    risky = 2 * M + 1 < p
    if risky:
        warnings.warn(
            f"2M+1={2 * M + 1} < p={p}: smoothed spectral matrices are singular",
            SingularRiskWarning,
            stacklevel=2,
        )
    kernel = np.zeros(N)
    kernel[w.lags % N] = w.w
    # circular convolution along the frequency axis
    out = np.fft.ifft(
        np.fft.fft(pdgm.values, axis=0) * np.fft.fft(kernel)[:, None, None], axis=0
    )
    return SpectralMatrixField(_hermitize(out), N, None, risky)


def estimate_spectrum(X, M: int, shape="cosine") -> SpectralMatrixField:
    """Demeaned periodogram smoothed with ``lag_window_weights(shape, M)``."""
    return smooth(periodogram(X), lag_window_weights(shape, M))


def write_spectra_csv(path, S: SpectralMatrixField, pairs=()) -> None:
    """Long-format CSV ``freq, series, value`` of auto-spectra and partial coherences."""
    half = S.subset(np.arange(S.N // 2 + 1)) if S.is_full else S
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["freq", "series", "value"])
        for ch in range(half.p):
            for f, v in zip(half.freqs, half.values[:, ch, ch].real):
                out.writerow([f"{f:.10g}", f"S{ch + 1}{ch + 1}", repr(float(v))])
        for j, k in pairs:
            gam = partial_coherence(half.values, j, k)
            for f, v in zip(half.freqs, gam):
                out.writerow([f"{f:.10g}", f"pcoh({j},{k})", repr(float(v))])
