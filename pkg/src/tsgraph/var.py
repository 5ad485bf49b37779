"""Vector autoregressive models: simulation and analytic spectra.

A VAR_p(l) process is ``X_t = sum_u Phi_u X_{t-u} + eps_t`` with
``eps_t ~ N_p(0, Sigma_eps)``. Its transfer matrix is
``Phi(f) = I - sum_u Phi_u exp(-i 2 pi f u)`` so that
``S(f) = Phi(f)^{-1} Sigma_eps Phi(f)^{-H}`` and
``S(f)^{-1} = Phi(f)^H Sigma_eps^{-1} Phi(f)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotPositiveDefiniteError
from .graph import all_pairs

__all__ = [
    "VarModel",
    "SampleMatrix",
    "check_stationary",
    "spectral_radius",
    "simulate",
    "fourier_grid",
    "transfer_matrix",
    "var_spectral_matrix",
    "var_inverse_spectral_matrix",
    "true_missing_edges",
    "partial_coherence",
    "model_a",
    "model_b",
    "model_c",
    "random_var_model",
    "closure_pattern",
]

STAB_EPS = 1e-8


@dataclass(frozen=True, eq=False)
class VarModel:
    """Coefficients ``phi`` of shape ``(ell, p, p)`` and innovation covariance."""

    phi: np.ndarray
    sigma_eps: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim == 2:
            phi = phi[None]
        sigma = np.array(self.sigma_eps, dtype=float)
        if phi.ndim != 3 or phi.shape[1] != phi.shape[2] or phi.shape[0] < 1:
            raise DomainError(f"phi must have shape (ell, p, p), got {phi.shape}")
        p = phi.shape[1]
        if sigma.shape != (p, p):
            raise DomainError(f"sigma_eps must be {p}x{p}, got {sigma.shape}")
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12 * np.abs(sigma).max()):
            raise DomainError("sigma_eps is not symmetric")
        sigma = 0.5 * (sigma + sigma.T)
        if np.linalg.eigvalsh(sigma).min() <= 0:
            raise NotPositiveDefiniteError("sigma_eps is not positive definite")
        phi.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "sigma_eps", sigma)

    @property
    def p(self) -> int:
        return self.phi.shape[1]

    @property
    def ell(self) -> int:
        return self.phi.shape[0]

    def companion(self) -> np.ndarray:
        p, ell = self.p, self.ell
        C = np.zeros((p * ell, p * ell))
        C[:p] = np.hstack(list(self.phi))
        C[p:, :-p] = np.eye(p * (ell - 1))
        return C

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "ell": self.ell,
            "phi": self.phi.tolist(),
            "sigma_eps": self.sigma_eps.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VarModel":
        model = cls(np.asarray(d["phi"], dtype=float), np.asarray(d["sigma_eps"], dtype=float))
        if ("p" in d and d["p"] != model.p) or ("ell" in d and d["ell"] != model.ell):
            raise DomainError("declared p/ell disagree with coefficient shapes")
        return model

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "VarModel":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """Observations ``X_0..X_{N-1}`` stored channel-major as ``values[p, N]``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise DomainError("sample values must be a 2-d (p, N) array")
        if v.shape[1] % 2:
            raise DomainError(f"sample count N={v.shape[1]} must be even")
        if not np.all(np.isfinite(v)):
            raise DomainError("sample contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_rows(cls, rows) -> "SampleMatrix":
        """Build from a time-major ``(N, p)`` array, e.g. a CSV table."""
        return cls(np.asarray(rows, dtype=float).T)


def spectral_radius(model: VarModel) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(model.companion()))))


def check_stationary(model: VarModel) -> bool:
    return spectral_radius(model) < 1 - STAB_EPS


def simulate(model: VarModel, N: int, seed=None, burn_in: int | None = None) -> SampleMatrix:
    """Draw a Gaussian sample path of length ``N`` after ``burn_in`` discarded steps.

    ``seed`` is anything accepted by ``numpy.random.default_rng``.
    """
    if N % 2 or N < 2:
        raise DomainError(f"N must be a positive even integer, got {N}")
    if not check_stationary(model):
        raise DomainError(
            f"model is not stationary (spectral radius {spectral_radius(model):.6g})"
        )
    p, ell = model.p, model.ell
    if burn_in is None:
        burn_in = max(500, 10 * ell * p)
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(model.sigma_eps)
    total = N + burn_in
    eps = rng.standard_normal((total, p)) @ chol.T
    x = np.zeros((total + ell, p))
    phis = [model.phi[u] for u in range(ell)]
    for t in range(ell, total + ell):
        acc = eps[t - ell].copy()
        for u, ph in enumerate(phis, start=1):
            acc += ph @ x[t - u]
        x[t] = acc
    return SampleMatrix(x[ell + burn_in:].T)


def fourier_grid(N: int) -> np.ndarray:
    """The ``N/2 + 1`` non-negative Fourier frequencies ``j/N``."""
    return np.arange(N // 2 + 1) / N


def transfer_matrix(model: VarModel, f) -> np.ndarray:
    f = np.atleast_1d(np.asarray(f, dtype=float))
    u = np.arange(1, model.ell + 1)
    z = np.exp(-2j * np.pi * np.outer(f, u))  # (F, ell)
    return np.eye(model.p)[None] - np.einsum("fu,ujk->fjk", z, model.phi)


def _squeeze(out, f):
    return out[0] if np.ndim(f) == 0 else out


def var_spectral_matrix(model: VarModel, f) -> np.ndarray:
    """``S(f)``; scalar ``f`` gives ``(p, p)``, an array gives ``(F, p, p)``."""
    Phi = transfer_matrix(model, f)
    cond = np.linalg.cond(Phi)
    if np.any(cond > 1e12):
        raise np.linalg.LinAlgError(
            f"transfer matrix numerically singular (condition {cond.max():.3g})"
        )
    H = np.linalg.inv(Phi)
    S = H @ model.sigma_eps @ np.conj(np.swapaxes(H, -1, -2))
    S = 0.5 * (S + np.conj(np.swapaxes(S, -1, -2)))
    return _squeeze(S, f)


def var_inverse_spectral_matrix(model: VarModel, f) -> np.ndarray:
    Phi = transfer_matrix(model, f)
    sig_inv = np.linalg.inv(model.sigma_eps)
    sig_inv = 0.5 * (sig_inv + sig_inv.T)
    # structural zeros of the precision matrix must survive the inversion
    sig_inv[np.abs(sig_inv) < 1e-14 * np.abs(sig_inv).max()] = 0.0
    Si = np.conj(np.swapaxes(Phi, -1, -2)) @ sig_inv @ Phi
    return _squeeze(Si, f)


def true_missing_edges(model: VarModel, grid=None, tol: float | None = None) -> set:
    """Pairs whose inverse-spectral entry stays within ``tol`` across ``grid``.

    By default ``grid`` is the non-negative Fourier grid for N=1024 and ``tol``
    is ``1e-10`` times the mean diagonal magnitude of the inverse spectrum.
    """
    if grid is None:
        grid = fourier_grid(1024)
    Si = var_inverse_spectral_matrix(model, np.asarray(grid, dtype=float))
    if Si.ndim == 2:
        Si = Si[None]
    if tol is None:
        tol = 1e-10 * np.mean(np.abs(np.diagonal(Si, axis1=1, axis2=2)))
    mags = np.abs(Si).max(axis=0)
    return {(j, k) for j, k in all_pairs(model.p) if mags[j - 1, k - 1] <= tol}


def partial_coherence(S, j: int, k: int) -> np.ndarray:
    """``|S^{jk}|^2 / (S^{jj} S^{kk})`` at each frequency of the field ``S``.

    ``S`` is an array ``(F, p, p)`` or an object with ``.values``; ``j``, ``k``
    are 1-based.
    """
    vals = np.asarray(getattr(S, "values", S))
    if vals.ndim == 2:
        vals = vals[None]
    if j == k:
        raise DomainError("partial coherence needs two distinct vertices")
    out = np.empty(vals.shape[0])
    for idx, m in enumerate(vals):
        try:
            Si = np.linalg.inv(m)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"spectral matrix singular at frequency index {idx}") from exc
        if np.linalg.cond(m) > 1e14:
            raise np.linalg.LinAlgError(f"spectral matrix singular at frequency index {idx}")
        a, b = j - 1, k - 1
        out[idx] = abs(Si[a, b]) ** 2 / (Si[a, a].real * Si[b, b].real)
    return out


# Named models -----------------------------------------------------------

MODEL_A_PHI = np.array(
    [
        [0.2, 0.0, -0.1, 0.0, -0.5],
        [0.4, -0.2, 0.0, 0.2, 0.0],
        [-0.2, 0.0, 0.3, 0.0, 0.1],
        [0.3, 0.1, 0.0, 0.3, 0.0],
        [0.0, 0.0, 0.0, 0.5, 0.2],
    ]
)


def model_a() -> VarModel:
    return VarModel(MODEL_A_PHI, np.eye(5))


def _model_b_phi(x: float) -> np.ndarray:
    return np.array(
        [
            [0.2, 0.0, 0.3, 0.0, 0.3],
            [0.3, -0.2, x, 0.0, 0.0],
            [0.2, x, 0.3, 0.0, 0.0],
            [0.2, 0.3, 0.0, 0.3, 0.0],
            [0.2, 0.0, 0.2, 0.2, 0.2],
        ]
    )


def model_b(x: float = 0.0) -> VarModel:
    return VarModel(_model_b_phi(x), np.eye(5))


def model_c() -> VarModel:
    """Model B with ``x = 0`` and precision ``I`` except entries (1,2),(2,1) = 0.5."""
    prec = np.eye(5)
    prec[0, 1] = prec[1, 0] = 0.5
    sigma = np.linalg.inv(prec)
    return VarModel(_model_b_phi(0.0), 0.5 * (sigma + sigma.T))


# Random sparse models -------------------------------------------------------

def seed_pattern(p: int, k: int) -> np.ndarray:
    """Positions filled with N(0,1) draws: the diagonal and ``(i+j) mod k == 1``."""
    i = np.arange(1, p + 1)
    return np.eye(p, dtype=bool) | ((i[:, None] + i[None, :]) % k == 1)


def closure_pattern(p: int, k: int) -> np.ndarray:
    """Smallest pattern containing the seed pattern that is closed under products.

    ``i == j (mod k)`` or ``i + j == 1 (mod k)``. Any analytic function of a
    matrix with the seed pattern, in particular the eigenvalue-reflected
    reconstruction, is supported on this set.
    """
    i = np.arange(1, p + 1)
    s = i[:, None] + i[None, :]
    d = i[:, None] - i[None, :]
    return (d % k == 0) | (s % k == 1)


def random_var_model(p: int, k: int = 5, seed=None) -> VarModel:
    """Random stationary VAR_p(1) with identity innovation covariance.

    Seed-pattern entries are standard normal; eigenvalues of modulus above one
    are replaced by their reciprocals and the matrix is rebuilt from the
    eigendecomposition.
    """
    if p < 2 or k < 1:
        raise DomainError("need p >= 2 and k >= 1")
    rng = np.random.default_rng(seed)
    mask = seed_pattern(p, k)
    phi = np.zeros((p, p))
    phi[mask] = rng.standard_normal(int(mask.sum()))

    lam, V = np.linalg.eig(phi)
    mod = np.abs(lam)
    if np.any(mod > 1 - STAB_EPS):
        lam = np.where(np.isclose(mod, 1.0, rtol=0, atol=1e-12), lam / (1 + 1e-6), lam)
        lam = np.where(np.abs(lam) > 1, 1 / lam, lam)
        rebuilt = V @ np.diag(lam) @ np.linalg.inv(V)
        scale = np.abs(rebuilt).max()
        if np.abs(rebuilt.imag).max() > 1e-8 * scale:
            raise ArithmeticError("eigenvalue reconstruction left an imaginary residue")
        phi = rebuilt.real
        outside = ~closure_pattern(p, k)
        if np.abs(phi[outside]).max(initial=0.0) > 1e-8 * scale:
            raise ArithmeticError("eigenvalue reconstruction broke the sparsity pattern")
        phi[outside] = 0.0
    model = VarModel(phi, np.eye(p))
    if not check_stationary(model):
        raise ArithmeticError("reconstructed model is not stationary")
    return model
