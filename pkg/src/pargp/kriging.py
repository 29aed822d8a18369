"""Exact GP linear algebra via Cholesky: simple kriging, likelihood and GLS."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotrf

from .covariance import cov_matrix, cross_cov_matrix
from .errors import NotPositiveDefinite, RankDeficient
from .model import CovParams, CovParamsFull, Observations

JITTER = 1e-10
# cross-covariance rows are formed in blocks of at most this many entries
_CROSS_BLOCK_ENTRIES = 1 << 22


def _factor(locs: np.ndarray, lam: float, theta: float, kernel: str) -> tuple[np.ndarray, bool]:
    """Lower Cholesky factor of ``Sigma(theta) + lam I``; one jitter retry when ``lam == 0``."""
    for attempt_lam, regularized in ((lam, False), (JITTER, True)):
        K = cov_matrix(locs, theta, kernel)
        K.flat[:: K.shape[0] + 1] += attempt_lam
        # K is C-ordered and symmetric, so K.T is the same matrix in Fortran order
        # and LAPACK factors it in place.
        c, info = dpotrf(K.T, lower=1, clean=1, overwrite_a=1)
        if info == 0:
            return c, regularized
        if info < 0:
            raise ValueError(f"dpotrf: illegal argument {-info}")
        if lam != 0:
            break
    raise NotPositiveDefinite(
        f"covariance matrix of {locs.shape[0]} points is not positive definite "
        f"(lambda={lam}, theta={theta}); duplicate locations need lambda > 0")


@dataclass(frozen=True)
class KrigingSystem:
    """Factorised ``Sigma(theta) + lambda I`` with cached weights ``alpha``."""

    train_locs: np.ndarray
    train_values: np.ndarray
    params: CovParams
    chol: np.ndarray
    alpha: np.ndarray
    regularized: bool = False
    kernel: str = "exponential"

    @property
    def n(self) -> int:
        return self.train_values.shape[0]


def build_system(train: Observations, params: CovParams, kernel: str = "exponential") -> KrigingSystem:
    if len(train) < 1:
        raise ValueError("build_system needs at least one training observation")
    chol, reg = _factor(train.locs, params.lam, params.theta, kernel)
    alpha = cho_solve((chol, True), train.values, check_finite=False)
    return KrigingSystem(train.locs, train.values, params, chol, alpha, reg, kernel)


def krige(system: KrigingSystem, targets) -> np.ndarray:
    """Simple kriging predictions ``Sigma_p^T alpha`` at ``targets`` (m x 2)."""
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    m = targets.shape[0]
    out = np.empty(m)
    step = max(1, _CROSS_BLOCK_ENTRIES // max(system.n, 1))
    for p0 in range(0, m, step):
        C = cross_cov_matrix(system.train_locs, targets[p0:p0 + step], system.params.theta, system.kernel)
        out[p0:p0 + step] = C @ system.alpha
    return out


def neg2_log_likelihood(data: Observations, xi: CovParamsFull, kernel: str = "exponential") -> float:
    """``n log(2 pi) + log det(V) + y^T V^{-1} y`` with ``V = sigma2 Sigma + tau I``."""
    n = len(data)
    if n < 1:
        raise ValueError("likelihood needs at least one observation")
    zeta = xi.to_prediction_params()
    chol, _ = _factor(data.locs, zeta.lam, zeta.theta, kernel)
    logdet = n * math.log(xi.sigma2) + 2.0 * float(np.sum(np.log(np.diag(chol))))
    w = solve_triangular(chol, data.values, lower=True, check_finite=False)
    quad = float(w @ w) / xi.sigma2
    return n * math.log(2.0 * math.pi) + logdet + quad


def gls_estimate(data: Observations, covariates, params: CovParams, kernel: str = "exponential") -> np.ndarray:
    """``(X^T M^-1 X)^-1 X^T M^-1 y`` with ``M = Sigma + lambda I``."""
    X = np.asarray(covariates, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if n != len(data):
        raise ValueError(f"covariates have {n} rows, data has {len(data)}")
    if not n > p >= 1:
        raise ValueError(f"need n > p >= 1, got n={n}, p={p}")
    chol, _ = _factor(data.locs, params.lam, params.theta, kernel)
    MiX = cho_solve((chol, True), X, check_finite=False)
    Miy = cho_solve((chol, True), data.values, check_finite=False)
    A = X.T @ MiX
    A = 0.5 * (A + A.T)
    b = X.T @ Miy
    scale = float(np.max(np.diag(A)))
    c, info = dpotrf(A, lower=1, clean=1)
    if info != 0 or scale <= 0 or float(np.min(np.diag(c))) ** 2 <= 1e-10 * scale:
        raise RankDeficient(f"X^T M^-1 X is singular beyond tolerance (p={p})")
    return cho_solve((c, True), b, check_finite=False)


def precision_matrix(locs, params: CovParams, kernel: str = "exponential") -> np.ndarray:
    """``M^-1 = (Sigma + lambda I)^-1`` via Cholesky solves."""
    locs = np.asarray(locs, dtype=float).reshape(-1, 2)
    chol, _ = _factor(locs, params.lam, params.theta, kernel)
    return cho_solve((chol, True), np.eye(locs.shape[0]), check_finite=False)


def smoother_matrix(locs, params: CovParams, kernel: str = "exponential") -> np.ndarray:
    """``H = Sigma (Sigma + lambda I)^-1``: kriging predictions at the observed sites are ``H y``."""
    locs = np.asarray(locs, dtype=float).reshape(-1, 2)
    S = cov_matrix(locs, params.theta, kernel)
    chol, _ = _factor(locs, params.lam, params.theta, kernel)
    # M and Sigma are symmetric, so H^T = M^-1 Sigma
    return cho_solve((chol, True), S, check_finite=False).T
