"""Piecewise basis-expansion state-space model.

The state transition is ``x_{t+1} = h(x_t, u_t) + A_i phi(x_t, u_t) + v_t``
with ``v_t ~ N(0, Q_i)``, where ``i`` is the segment of a designated state
dimension that contains ``x_t`` and ``h`` is an optional known offset.  The
observation ``y_t = g(x_t, u_t) + e_t`` has a known map ``g`` and noise
covariance ``R``.  Per-segment coefficient/noise pairs ``(A_i, Q_i)`` carry
a shared matrix-normal inverse-Wishart prior, which is conjugate given the
states: everything the learners need reduces to quadratic sufficient
statistics of the transitions.

All computations here are pure; statistics may be accumulated in parallel
chunks and summed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .distributions import (
    InverseWishartParams,
    MatrixNormalParams,
    MniwParams,
    chol_spd,
    iw_logpdf,
    mn_logpdf,
    sample_iw,
    sample_mn,
    sample_mvn,
)
from .errors import NumericalError, ParameterError, ShapeError
from .rng import RngStream

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class LinearObservation:
    """Known linear observation map y = C x."""

    C: np.ndarray

    def __post_init__(self):
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))

    def __call__(self, X, U=None):
        X = np.asarray(X, dtype=float)
        return X @ self.C.T


@dataclass
class LinearOffset:
    """Known linear transition offset h(x, u) = A x + B u + c."""

    A: np.ndarray
    B: np.ndarray | None = None
    c: np.ndarray | None = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if self.B is not None:
            self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if self.c is not None:
            self.c = np.atleast_1d(np.asarray(self.c, dtype=float))

    def __call__(self, X, U=None):
        X = np.asarray(X, dtype=float)
        out = X @ self.A.T
        if self.B is not None and U is not None and np.size(U) > 0:
            out = out + np.asarray(U, dtype=float) @ self.B.T
        if self.c is not None:
            out = out + self.c
        return out


@dataclass
class SsmConfig:
    """Model dimensions, known observation map, noise and initial state.

    ``obs`` is either an (n_y, n_x) matrix or a callable ``g(X, U)``
    vectorized over the leading axis.  A zero ``init_cov`` denotes a point
    mass at ``init_mean``.  ``offset`` is an optional known transition term
    ``h(x, u)``, callable with the same batching convention.
    """

    n_x: int
    n_u: int
    n_y: int
    obs: object
    R: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray
    offset: object = None

    def __post_init__(self):
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.init_mean = np.atleast_1d(np.asarray(self.init_mean, dtype=float))
        self.init_cov = np.atleast_2d(np.asarray(self.init_cov, dtype=float))
        if isinstance(self.obs, (list, np.ndarray)):
            self.obs = LinearObservation(self.obs)
        if self.R.shape != (self.n_y, self.n_y):
            raise ShapeError(f"R must be {self.n_y}x{self.n_y}, got {self.R.shape}")
        if self.init_mean.shape != (self.n_x,):
            raise ShapeError("initial mean has wrong length")
        if self.init_cov.shape != (self.n_x, self.n_x):
            raise ShapeError("initial covariance has wrong shape")

    def observe(self, X, U=None):
        return np.atleast_2d(self.obs(X, U))

    def offset_at(self, X, U=None):
        if self.offset is None:
            return 0.0
        return self.offset(X, U)


@dataclass
class Segmentation:
    """Discontinuity points on one designated state dimension.

    ``points`` must be strictly increasing; the implied segments are
    left-closed, right-open intervals covering the whole axis.
    """

    dim: int = 0
    points: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.points = np.atleast_1d(np.asarray(self.points, dtype=float))
        if self.points.size and not np.all(np.diff(self.points) > 0):
            raise ParameterError("discontinuity points must be strictly increasing")

    @property
    def n_p(self):
        return self.points.size

    @property
    def n_seg(self):
        return self.points.size + 1

    def segment_index(self, x_dim):
        """Segment of each value: i such that p_i <= x < p_{i+1}."""
        return np.searchsorted(self.points, np.asarray(x_dim, dtype=float), side="right")


@dataclass
class Theta:
    """Per-segment transition parameters: coefficients A_i and noise Q_i."""

    A: list
    Q: list

    def __post_init__(self):
        self.A = [np.atleast_2d(np.asarray(a, dtype=float)) for a in self.A]
        self.Q = [np.atleast_2d(np.asarray(q, dtype=float)) for q in self.Q]
        if len(self.A) != len(self.Q):
            raise ShapeError("A and Q lists must have equal length")

    @property
    def n_seg(self):
        return len(self.A)

    @classmethod
    def zeros(cls, n_x, m, q, n_seg=1):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        return cls(
            A=[np.zeros((n_x, m)) for _ in range(n_seg)],
            Q=[q.copy() for _ in range(n_seg)],
        )


@dataclass
class SuffStats:
    """Quadratic transition statistics plus the number of transitions.

    Additive under concatenation of disjoint transition sets, which is what
    makes chunked or per-segment accumulation exact.
    """

    phi: np.ndarray
    psi: np.ndarray
    sigma: np.ndarray
    count: int

    @classmethod
    def zeros(cls, n_x, m):
        return cls(np.zeros((n_x, n_x)), np.zeros((n_x, m)), np.zeros((m, m)), 0)

    def __add__(self, other):
        return SuffStats(
            self.phi + other.phi,
            self.psi + other.psi,
            self.sigma + other.sigma,
            self.count + other.count,
        )


def transition_mean(theta: Theta, seg: Segmentation, basis, offset, x, u=None):
    """Piecewise transition mean h(x, u) + A_i phi(x, u); batched over rows."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    F = basis.matrix(X, u)
    s = seg.segment_index(X[:, seg.dim])
    n_x = theta.A[0].shape[0]
    out = np.empty((X.shape[0], n_x))
    for i in range(theta.n_seg):
        mask = s == i
        if mask.any():
            out[mask] = F[mask] @ theta.A[i].T
    if offset is not None:
        out = out + np.atleast_2d(offset(X, u))
    return out[0] if np.asarray(x).ndim == 1 else out


def _psd_factor(S):
    """Factor B with B B^T = S for a PSD matrix; exact zeros allowed."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if not np.any(S):
        return np.zeros_like(S)
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(S)
        if vals.min() < -1e-10 * max(vals.max(), 1.0):
            raise NumericalError("covariance is not positive semidefinite")
        return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))


def simulate(theta: Theta, seg: Segmentation, config: SsmConfig, basis, rng: RngStream, T, u=None):
    """Simulate states and observations for ``T`` steps.

    The initial state is drawn from the configured distribution (or fixed,
    for a point mass); zero process or measurement covariances are allowed
    here and simply yield noise-free recursions.
    """
    if u is None:
        u = np.zeros((T, config.n_u))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[0] != T:
        raise ShapeError("input length does not match T")
    Ls = [_psd_factor(q) for q in theta.Q]
    x = np.empty((T, config.n_x))
    Linit = _psd_factor(config.init_cov)
    x[0] = config.init_mean + Linit @ rng.gen.standard_normal(config.n_x)
    for t in range(T - 1):
        mean = transition_mean(theta, seg, basis, config.offset, x[t], u[t])
        i = int(seg.segment_index(x[t, seg.dim]))
        x[t + 1] = mean + Ls[i] @ rng.gen.standard_normal(config.n_x)
    y = np.atleast_2d(config.observe(x, u))
    LR = _psd_factor(config.R)
    y = y + rng.gen.standard_normal((T, config.n_y)) @ LR.T
    return x, y


def compute_stats(x, u, basis, seg: Segmentation, offset=None):
    """Per-segment sufficient statistics of the transitions in a trajectory.

    Transition ``t -> t+1`` is assigned to the segment containing
    ``x_t[dim]``.  With an offset configured, the statistics use the
    residual target ``x_{t+1} - h(x_t, u_t)``.  Returns one SuffStats per
    segment; a length-T trajectory contributes T-1 transitions in total.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    T, n_x = x.shape
    m = basis.m
    out = [SuffStats.zeros(n_x, m) for _ in range(seg.n_seg)]
    if T < 2:
        return out
    u_prev = None
    if u is not None and np.size(u) > 0:
        u_prev = np.atleast_2d(np.asarray(u, dtype=float))[: T - 1]
    F = basis.matrix(x[:-1], u_prev)
    D = x[1:].copy()
    if offset is not None:
        D = D - np.atleast_2d(offset(x[:-1], u_prev))
    s = seg.segment_index(x[:-1, seg.dim])
    for i in range(seg.n_seg):
        mask = s == i
        if not mask.any():
            continue
        Fi, Di = F[mask], D[mask]
        out[i] = SuffStats(Di.T @ Di, Di.T @ Fi, Fi.T @ Fi, int(mask.sum()))
    return out


def _solve_spd_jittered(S, B, what):
    """Solve S X = B with a trace-scaled jitter guard; S symmetric PSD."""
    S = 0.5 * (S + S.T)
    jitter = 1e-10 * max(np.trace(S) / S.shape[0], 1e-300)
    try:
        L = np.linalg.cholesky(S + jitter * np.eye(S.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{what} lost positive definiteness") from exc
    return cho_solve((L, True), B)


def posterior_mniw(stats: SuffStats, prior: MniwParams):
    """Conjugate MNIW posterior given transition statistics.

    With a zero prior mean this is the textbook update
    ``M' = Psi (Sigma + V^-1)^-1``, ``V' = (Sigma + V^-1)^-1``,
    ``Lambda' = Lambda + Phi - Psi V' Psi^T`` and ``dof' = dof + count``;
    a nonzero prior mean folds in as an extra pseudo-observation block.
    Empty statistics return the prior unchanged.
    """
    m = prior.n_cols
    Vinv = _solve_spd_jittered(prior.V, np.eye(m), "prior V")
    MVinv = prior.M @ Vinv
    precision = stats.sigma + Vinv
    V_post = _solve_spd_jittered(precision, np.eye(m), "Sigma + V^-1")
    V_post = 0.5 * (V_post + V_post.T)
    psi_t = stats.psi + MVinv
    M_post = psi_t @ V_post
    lam = prior.scale + stats.phi + MVinv @ prior.M.T - M_post @ precision @ M_post.T
    lam = 0.5 * (lam + lam.T)
    post = MniwParams(M=M_post, V=V_post, scale=lam, dof=prior.dof + stats.count)
    chol_spd(post.scale, "posterior scale")  # conditioning check
    return post


def gauss_loglik(stats: SuffStats, A, Q):
    """Exact Gaussian transition log likelihood from sufficient statistics."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n_x = A.shape[0]
    LQ = chol_spd(Q, "Q")
    logdet_q = 2.0 * float(np.sum(np.log(np.diag(LQ))))
    inner = stats.phi - A @ stats.psi.T - stats.psi @ A.T + A @ stats.sigma @ A.T
    quad = float(np.trace(cho_solve((LQ, True), inner)))
    n = stats.count
    return -0.5 * (n * n_x * _LOG_2PI + n * logdet_q + quad)


def log_joint(A, Q, stats: SuffStats, prior: MniwParams):
    """Log of prior times transition likelihood at (A, Q).

    Equals the log posterior density of (A, Q) given the states up to the
    data-dependent normalizing constant, so it serves both optimization and
    Metropolis-Hastings ratios.
    """
    lp = iw_logpdf(Q, InverseWishartParams(prior.dof, prior.scale))
    lp += mn_logpdf(A, MatrixNormalParams(prior.M, np.atleast_2d(Q), prior.V))
    return lp + gauss_loglik(stats, A, Q)


def _mniw_logpdf_params(A, Q, p: MniwParams):
    return iw_logpdf(Q, InverseWishartParams(p.dof, p.scale)) + mn_logpdf(
        A, MatrixNormalParams(p.M, np.atleast_2d(Q), p.V)
    )


def log_marglik(stats_list, prior: MniwParams, eval_points=None):
    """Log marginal likelihood of the states given a segmentation.

    Computed per segment through the exact identity
    ``p(x) = p(A*, Q*) p(x | A*, Q*) / p(A*, Q* | x)`` at an arbitrary
    valid evaluation point, whose choice provably cancels; segments
    multiply, and empty segments contribute zero.
    """
    if eval_points is not None and len(eval_points) != len(stats_list):
        raise ShapeError("need one evaluation point per segment")
    total = 0.0
    for i, stats in enumerate(stats_list):
        if stats.count == 0:
            continue
        post = posterior_mniw(stats, prior)
        if eval_points is None:
            a_star = post.M
            q_star = post.scale / (post.dof + post.n_rows + 1.0)
        else:
            a_star, q_star = eval_points[i]
        total += (
            _mniw_logpdf_params(a_star, q_star, prior)
            + gauss_loglik(stats, a_star, q_star)
            - _mniw_logpdf_params(a_star, q_star, post)
        )
    return total


def mstep(stats: SuffStats, prior: MniwParams):
    """Maximizer of the joint log density of (A, Q) given the statistics.

    ``A`` is the posterior mean coefficient matrix; ``Q`` is the posterior
    scale divided by ``n_x + count + dof + m + 1``.  With empty statistics
    this is the joint prior mode.
    """
    post = posterior_mniw(stats, prior)
    n_x, m = post.n_rows, post.n_cols
    denom = n_x + stats.count + prior.dof + m + 1.0
    return post.M.copy(), post.scale / denom


def sample_theta_posterior(rng: RngStream, stats_list, prior: MniwParams, fixed_q=None):
    """Draw per-segment (Q_i, A_i) from the conjugate posterior.

    Q_i is drawn first from its inverse-Wishart marginal (or pinned to
    ``fixed_q`` when the process noise is known), then A_i from its
    matrix-normal conditional with row covariance Q_i.
    """
    A_list, Q_list = [], []
    for i, stats in enumerate(stats_list):
        post = posterior_mniw(stats, prior)
        if fixed_q is not None:
            Q = np.atleast_2d(np.asarray(fixed_q, dtype=float)).copy()
        else:
            Q = sample_iw(rng, InverseWishartParams(post.dof, post.scale))
        A = sample_mn(rng, MatrixNormalParams(post.M, Q, post.V))
        A_list.append(A)
        Q_list.append(Q)
    return Theta(A=A_list, Q=Q_list)


def sample_initial_state(rng: RngStream, config: SsmConfig):
    """Draw from the configured initial-state distribution."""
    if not np.any(config.init_cov):
        return config.init_mean.copy()
    return sample_mvn(rng, config.init_mean, config.init_cov)
