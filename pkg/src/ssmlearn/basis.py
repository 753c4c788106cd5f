"""Sinusoidal eigenfunction basis on a box domain and GP-derived coefficient priors.

The basis functions are Dirichlet eigenfunctions of the negative Laplace
operator on ``[-L_1, L_1] x ... x [-L_d, L_d]``.  Pairing them with a
stationary covariance function's spectral density, evaluated at the square
root of each eigenvalue, gives a truncated Karhunen-Loeve representation:
independent zero-mean coefficient priors whose variances decay with
frequency.  All functions here are pure and safe for unrestricted
concurrent use.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, kv

from .errors import ParameterError, ShapeError


@dataclass(frozen=True)
class Domain:
    """Box domain described by per-dimension half widths ``L_k > 0``."""

    half_widths: tuple

    def __post_init__(self):
        hw = tuple(float(v) for v in np.atleast_1d(self.half_widths))
        if any(v <= 0 for v in hw):
            raise ParameterError("all half widths must be positive")
        object.__setattr__(self, "half_widths", hw)

    @property
    def ndim(self):
        return len(self.half_widths)


@dataclass(frozen=True)
class BasisSpec:
    """Per-dimension basis counts and the enumerated multi-indices.

    The enumeration is lexicographic with the last index varying fastest,
    1-based, and stable, so coefficient matrices serialize unambiguously.
    """

    per_dim_count: tuple
    multi_indices: np.ndarray

    @classmethod
    def from_counts(cls, counts):
        counts = tuple(int(c) for c in np.atleast_1d(counts))
        if any(c < 1 for c in counts):
            raise ParameterError("basis counts must be positive integers")
        idx = np.array(
            list(itertools.product(*(range(1, c + 1) for c in counts))),
            dtype=int,
        )
        return cls(per_dim_count=counts, multi_indices=idx)

    @property
    def m(self):
        return self.multi_indices.shape[0]

    @property
    def ndim(self):
        return len(self.per_dim_count)


@dataclass(frozen=True)
class CovarianceFunction:
    """Isotropic stationary covariance function: squared-exponential or Matern.

    ``s_f`` scales the signal variance, ``l`` is the length scale, and ``nu``
    (Matern only) the smoothness.  Arbitrary ``nu > 0`` is handled through
    the gamma-function form of the spectral density.
    """

    kind: str
    s_f: float
    l: float
    nu: float | None = None

    def __post_init__(self):
        if self.kind not in ("se", "matern"):
            raise ParameterError(f"unknown covariance kind {self.kind!r}")
        if self.s_f <= 0 or self.l <= 0:
            raise ParameterError("s_f and l must be positive")
        if self.kind == "matern":
            if self.nu is None or self.nu <= 0:
                raise ParameterError("matern requires nu > 0")

    def kappa(self, r):
        """Covariance value at lag ``r`` (isotropic, depends on |r|)."""
        r = np.abs(np.asarray(r, dtype=float))
        if self.kind == "se":
            return self.s_f * np.exp(-0.5 * (r / self.l) ** 2)
        z = np.sqrt(2.0 * self.nu) * r / self.l
        out = np.empty_like(z)
        pos = z > 0
        zp = z[pos]
        log_term = (
            (1.0 - self.nu) * np.log(2.0)
            - gammaln(self.nu)
            + self.nu * np.log(zp)
            + np.log(kv(self.nu, zp))
        )
        out[pos] = self.s_f * np.exp(log_term)
        out[~pos] = self.s_f
        return out if out.ndim else float(out)


def eval_basis_1d(j, x, L):
    """One-dimensional eigenfunction ``(1/sqrt(L)) sin(pi j (x + L) / (2 L))``.

    Defined for all real ``x``; values outside ``[-L, L]`` are permitted.
    """
    if j < 1:
        raise ParameterError("basis index j must be >= 1")
    if L <= 0:
        raise ParameterError("half width L must be positive")
    x = np.asarray(x, dtype=float)
    val = np.sin(np.pi * j * (x + L) / (2.0 * L)) / np.sqrt(L)
    return float(val) if val.ndim == 0 else val


def eigenvalue(index, dom: Domain):
    """Laplace eigenvalue of one multi-index: sum_k (pi j_k / (2 L_k))^2."""
    j = np.atleast_1d(np.asarray(index, dtype=float))
    L = np.asarray(dom.half_widths)
    if j.shape[0] != L.shape[0]:
        raise ShapeError("multi-index length must match domain dimension")
    return float(np.sum((np.pi * j / (2.0 * L)) ** 2))


def eigenvalues(spec: BasisSpec, dom: Domain):
    """Eigenvalues of all enumerated multi-indices, in enumeration order."""
    L = np.asarray(dom.half_widths)
    if spec.ndim != dom.ndim:
        raise ShapeError("basis and domain dimensions differ")
    return np.sum((np.pi * spec.multi_indices / (2.0 * L)) ** 2, axis=1)


def regression_matrix(spec: BasisSpec, dom: Domain, Z):
    """Basis features for a batch of points ``Z`` with shape (n, d) -> (n, m)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    d = dom.ndim
    if Z.shape[1] != d or spec.ndim != d:
        raise ShapeError(
            f"points have {Z.shape[1]} coordinates, expected {d}"
        )
    out = None
    for k in range(d):
        L = dom.half_widths[k]
        j = np.arange(1, spec.per_dim_count[k] + 1)
        table = np.sin(
            np.pi * j[None, :] * (Z[:, k : k + 1] + L) / (2.0 * L)
        ) / np.sqrt(L)
        cols = table[:, spec.multi_indices[:, k] - 1]
        out = cols if out is None else out * cols
    return out


def regression_vector(spec: BasisSpec, dom: Domain, x, u=None):
    """Regression vector: per-dimension eigenfunction products over (x, u).

    The element for multi-index ``(j_1 .. j_d)`` is the product of the
    one-dimensional eigenfunctions over the concatenated state and input
    coordinates, ordered per the spec enumeration.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if u is not None and np.size(u) > 0:
        z = np.concatenate([x, np.atleast_1d(np.asarray(u, dtype=float))])
    else:
        z = x
    return regression_matrix(spec, dom, z[None, :])[0]


def spectral_density(cov: CovarianceFunction, omega):
    """Spectral density of the covariance function at angular frequency ``omega``.

    Convention: S(w) = integral of kappa(r) exp(-i w r) dr, so
    S_se(w) = s_f sqrt(2 pi) l exp(-l^2 w^2 / 2).  Strictly positive and
    nonincreasing in ``omega`` for both families.
    """
    w = np.asarray(omega, dtype=float)
    if cov.kind == "se":
        out = cov.s_f * np.sqrt(2.0 * np.pi) * cov.l * np.exp(-0.5 * (cov.l * w) ** 2)
    else:
        nu, l = cov.nu, cov.l
        log_const = (
            np.log(2.0)
            + 0.5 * np.log(np.pi)
            + gammaln(nu + 0.5)
            - gammaln(nu)
            + nu * np.log(2.0 * nu)
            - 2.0 * nu * np.log(l)
        )
        out = cov.s_f * np.exp(log_const - (nu + 0.5) * np.log(2.0 * nu / l**2 + w**2))
    return float(out) if out.ndim == 0 else out


def build_prior_V(spec: BasisSpec, dom: Domain, cov: CovarianceFunction):
    """Diagonal prior column covariance: S evaluated at sqrt(eigenvalue).

    Entry ``j`` is the spectral density at the eigenfrequency of basis
    function ``j``; entries are positive and decay toward zero as the
    multi-index grows, so high-frequency coefficients are pinned near zero.
    """
    return np.diag(spectral_density(cov, np.sqrt(eigenvalues(spec, dom))))


class EigenfunctionBasis:
    """Bundles a BasisSpec and Domain into a regression-feature map."""

    def __init__(self, spec: BasisSpec, dom: Domain):
        if spec.ndim != dom.ndim:
            raise ShapeError("basis and domain dimensions differ")
        self.spec = spec
        self.dom = dom

    @property
    def m(self):
        return self.spec.m

    def matrix(self, X, U=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if U is not None and np.size(U) > 0:
            U = np.atleast_2d(np.asarray(U, dtype=float))
            if U.shape[0] == 1 and X.shape[0] > 1:
                U = np.broadcast_to(U, (X.shape[0], U.shape[1]))
            Z = np.concatenate([X, U], axis=1)
        else:
            Z = X
        return regression_matrix(self.spec, self.dom, Z)

    def vector(self, x, u=None):
        return regression_vector(self.spec, self.dom, x, u)


class LinearBasis:
    """Plain linear features: the regression vector is (x, u) itself."""

    def __init__(self, n_x, n_u=0):
        self.n_x = int(n_x)
        self.n_u = int(n_u)

    @property
    def m(self):
        return self.n_x + self.n_u

    def matrix(self, X, U=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.n_u == 0:
            return X.copy()
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if U.shape[0] == 1 and X.shape[0] > 1:
            U = np.broadcast_to(U, (X.shape[0], U.shape[1]))
        return np.concatenate([X, U], axis=1)

    def vector(self, x, u=None):
        return self.matrix(np.atleast_1d(x)[None, :], None if self.n_u == 0 else np.atleast_1d(u)[None, :])[0]
