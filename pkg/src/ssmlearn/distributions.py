"""Matrix-normal, inverse-Wishart, MNIW, Gaussian and categorical primitives.

Densities are evaluated in log space with Cholesky-based determinants and
solves.  Samplers are pure functions of ``(RngStream state, params)``: the
same stream state and parameters yield bit-identical outputs.  A stream must
not be shared across concurrent callers; distinct streams may be used
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import multigammaln

from .errors import CovarianceError, ParameterError, ShapeError, WeightError
from .rng import RngStream

_LOG_2PI = float(np.log(2.0 * np.pi))


def _as_matrix(x, name):
    a = np.asarray(x, dtype=float)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be a 2-d array, got shape {a.shape}")
    return a


def chol_spd(S, name="matrix"):
    """Cholesky factor of a symmetric positive-definite matrix.

    Raises CovarianceError if ``S`` is asymmetric or not positive definite.
    """
    S = _as_matrix(S, name)
    if S.shape[0] != S.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {S.shape}")
    scale = max(np.max(np.abs(S)), 1.0)
    if not np.allclose(S, S.T, atol=1e-8 * scale):
        raise CovarianceError(f"{name} is not symmetric")
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise CovarianceError(f"{name} is not positive definite") from exc


def _logdet_from_chol(L):
    return 2.0 * float(np.sum(np.log(np.diag(L))))


@dataclass
class MatrixNormalParams:
    """Matrix-normal parameters: mean M, row covariance U, column covariance V."""

    M: np.ndarray
    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.M = _as_matrix(self.M, "M")
        self.U = _as_matrix(self.U, "U")
        self.V = _as_matrix(self.V, "V")
        n, m = self.M.shape
        if self.U.shape != (n, n):
            raise ShapeError(f"U must be {n}x{n}, got {self.U.shape}")
        if self.V.shape != (m, m):
            raise ShapeError(f"V must be {m}x{m}, got {self.V.shape}")


@dataclass
class InverseWishartParams:
    """Inverse-Wishart parameters: degrees of freedom and SPD scale matrix."""

    dof: float
    scale: np.ndarray

    def __post_init__(self):
        self.scale = _as_matrix(self.scale, "scale")
        n = self.scale.shape[0]
        if self.scale.shape != (n, n):
            raise ShapeError(f"scale must be square, got {self.scale.shape}")
        if not self.dof > n - 1:
            raise ParameterError(f"dof must exceed n-1={n - 1}, got {self.dof}")


@dataclass
class MniwParams:
    """Joint matrix-normal inverse-Wishart parameters over (A, Q).

    The hierarchy is Q ~ IW(dof, scale) and A | Q ~ MN(M, Q, V): the
    matrix-normal row covariance is tied to Q.
    """

    M: np.ndarray
    V: np.ndarray
    scale: np.ndarray
    dof: float

    def __post_init__(self):
        self.M = _as_matrix(self.M, "M")
        self.V = _as_matrix(self.V, "V")
        self.scale = _as_matrix(self.scale, "scale")
        n, m = self.M.shape
        if self.V.shape != (m, m):
            raise ShapeError(f"V must be {m}x{m}, got {self.V.shape}")
        if self.scale.shape != (n, n):
            raise ShapeError(f"scale must be {n}x{n}, got {self.scale.shape}")
        if not self.dof > n - 1:
            raise ParameterError(f"dof must exceed n-1={n - 1}, got {self.dof}")

    @property
    def n_rows(self):
        return self.M.shape[0]

    @property
    def n_cols(self):
        return self.M.shape[1]


def mn_logpdf(A, p: MatrixNormalParams):
    """Log matrix-normal density of ``A`` under ``p``.

    Equals the multivariate-normal log density of the column-stacked vector
    of ``A`` with covariance kron(V, U).
    """
    A = _as_matrix(A, "A")
    if A.shape != p.M.shape:
        raise ShapeError(f"A must have shape {p.M.shape}, got {A.shape}")
    n, m = A.shape
    LU = chol_spd(p.U, "U")
    LV = chol_spd(p.V, "V")
    D = A - p.M
    # tr{U^-1 D V^-1 D^T} = ||LU^-1 D LV^-T||_F^2
    X = solve_triangular(LU, D, lower=True)
    Y = solve_triangular(LV, X.T, lower=True)
    quad = float(np.sum(Y * Y))
    return -0.5 * (
        quad + n * m * _LOG_2PI + n * _logdet_from_chol(LV) + m * _logdet_from_chol(LU)
    )


def iw_logpdf(Q, p: InverseWishartParams):
    """Log inverse-Wishart density of the SPD matrix ``Q`` under ``p``."""
    n = p.scale.shape[0]
    Q = _as_matrix(Q, "Q")
    if Q.shape != (n, n):
        raise ShapeError(f"Q must be {n}x{n}, got {Q.shape}")
    LQ = chol_spd(Q, "Q")
    LS = chol_spd(p.scale, "scale")
    # tr{Q^-1 scale} = ||LQ^-1 LS||_F^2
    X = solve_triangular(LQ, LS, lower=True)
    trace = float(np.sum(X * X))
    ell = float(p.dof)
    return (
        0.5 * ell * _logdet_from_chol(LS)
        - 0.5 * (n + ell + 1.0) * _logdet_from_chol(LQ)
        - 0.5 * ell * n * np.log(2.0)
        - multigammaln(0.5 * ell, n)
        - 0.5 * trace
    )


def mniw_logpdf(A, Q, p: MniwParams):
    """Joint log density of (A, Q) under the MNIW hierarchy."""
    return iw_logpdf(Q, InverseWishartParams(p.dof, p.scale)) + mn_logpdf(
        A, MatrixNormalParams(p.M, Q, p.V)
    )


def mvn_logpdf(x, mean, cov):
    """Multivariate-normal log density; batched over the leading axis of ``x``."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    L = chol_spd(cov, "cov")
    k = L.shape[0]
    resid = np.atleast_2d(x - mean)
    z = solve_triangular(L, resid.T, lower=True).T
    out = -0.5 * (np.sum(z * z, axis=-1) + k * _LOG_2PI + _logdet_from_chol(L))
    return float(out[0]) if x.ndim == 1 else out


def sample_mn(rng: RngStream, p: MatrixNormalParams):
    """Draw one matrix from the matrix-normal distribution ``p``."""
    LU = chol_spd(p.U, "U")
    LV = chol_spd(p.V, "V")
    Z = rng.gen.standard_normal(p.M.shape)
    return p.M + LU @ Z @ LV.T


def sample_iw(rng: RngStream, p: InverseWishartParams):
    """Draw one SPD matrix from the inverse-Wishart distribution ``p``.

    Uses the Bartlett factorization of the Wishart draw for the inverse
    scale, then inverts in factored form so the result is SPD by
    construction.
    """
    n = p.scale.shape[0]
    C = chol_spd(p.scale, "scale")
    # Bartlett factor of Wishart(dof, I): lower triangular, chi-square diagonal
    A = np.zeros((n, n))
    dfs = p.dof - np.arange(n)
    A[np.diag_indices(n)] = np.sqrt(rng.gen.chisquare(dfs))
    if n > 1:
        A[np.tril_indices(n, k=-1)] = rng.gen.standard_normal(n * (n - 1) // 2)
    # W = B Z B^T with B B^T = scale^-1 has W^-1 = (C A^-T)(C A^-T)^T
    X = solve_triangular(A, C.T, lower=True)
    return X.T @ X


def sample_mvn(rng: RngStream, mean, cov):
    """Draw one vector from a multivariate normal."""
    mean = np.asarray(mean, dtype=float)
    L = chol_spd(cov, "cov")
    return mean + L @ rng.gen.standard_normal(mean.shape[0])


def sample_mniw(rng: RngStream, p: MniwParams):
    """Draw (A, Q) jointly: Q from the IW marginal, then A given Q."""
    Q = sample_iw(rng, InverseWishartParams(p.dof, p.scale))
    A = sample_mn(rng, MatrixNormalParams(p.M, Q, p.V))
    return A, Q


def sample_categorical(rng: RngStream, weights, size=None):
    """Draw index(es) with probability proportional to ``weights``.

    Weights need not be normalized.  Sampling is by inverse CDF on the
    cumulative weight array with one uniform per draw, so draws are
    deterministic given the stream state.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise WeightError("weights must be a nonempty 1-d array")
    if np.isnan(w).any():
        raise WeightError("weights contain NaN")
    if (w < 0).any():
        raise WeightError("weights contain negative entries")
    cw = np.cumsum(w)
    total = cw[-1]
    if not total > 0:
        raise WeightError("weights sum to zero")
    u = rng.gen.random(size)
    idx = np.searchsorted(cw, u * total, side="right")
    idx = np.minimum(idx, w.size - 1)
    return int(idx) if size is None else idx
