"""Effect-size analogs: project posterior function draws onto the design."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DataError, NumericalError
from .gp import PosteriorDraws
from .simdata import GenotypeMatrix

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_RIDGE = 1e-6


@dataclass(frozen=True)
class EffectSizePosterior:
    """Gaussian summary ``(mu, Sigma, Lambda)`` of the effect-size analog draws.

    ``ridge`` is the stabilization actually added to the diagonal of the
    sample covariance (``ridge_fraction * mean(diag)``).
    """

    mu: np.ndarray
    sigma: np.ndarray
    lambda_: np.ndarray
    rank_sigma: int
    n_draws: int
    ridge: float = 0.0
    ridge_fraction: float = 0.0

    @property
    def p(self):
        return self.mu.shape[0]


def pseudoinverse(X, tol=DEFAULT_TOL):
    """Moore-Penrose inverse via SVD.

    Singular values below ``tol * s_max`` are treated as zero.

    Returns
    -------
    pinv : (p, n) array
    rank : int
    """
    Xv = X.values if isinstance(X, GenotypeMatrix) else np.asarray(X, dtype=np.float64)
    if Xv.ndim != 2:
        raise DataError("pseudoinverse needs a matrix")
    if not np.all(np.isfinite(Xv)):
        raise DataError("matrix has non-finite entries")
    try:
        U, s, Vt = linalg.svd(Xv, full_matrices=False, lapack_driver="gesdd")
    except linalg.LinAlgError:
        try:
            U, s, Vt = linalg.svd(Xv, full_matrices=False, lapack_driver="gesvd")
        except linalg.LinAlgError as exc:
            raise NumericalError(f"SVD did not converge: {exc}") from exc
    if s.size == 0 or s[0] == 0:
        return np.zeros(Xv.shape[::-1]), 0
    keep = s > tol * s[0]
    rank = int(keep.sum())
    pinv = (Vt[keep].T / s[keep]) @ U[:, keep].T
    return pinv, rank


def symmetric_pinv(S, tol=DEFAULT_TOL):
    """Pseudoinverse of a symmetric matrix through its eigendecomposition."""
    S = 0.5 * (S + S.T)
    w, Q = linalg.eigh(S)
    top = np.max(np.abs(w)) if w.size else 0.0
    keep = np.abs(w) > tol * top if top > 0 else np.zeros_like(w, dtype=bool)
    inv = (Q[:, keep] / w[keep]) @ Q[:, keep].T
    return 0.5 * (inv + inv.T), int(keep.sum())


def project_draws(X, draws, tol=DEFAULT_TOL):
    """Row ``t`` of the result is ``X^+ f_t``."""
    F = draws.f_draws if isinstance(draws, PosteriorDraws) else np.atleast_2d(np.asarray(draws, dtype=np.float64))
    pinv, _ = pseudoinverse(X, tol)
    if F.shape[1] != pinv.shape[1]:
        raise DataError(f"draws have length {F.shape[1]}, design has {pinv.shape[1]} samples")
    return F @ pinv.T


def summarize_posterior(beta_draws, ridge=DEFAULT_RIDGE, tol=DEFAULT_TOL):
    """Empirical mean, covariance (divisor T-1) and precision of the draws.

    The covariance is stabilized by ``ridge * mean(diag(S)) * I``; when the
    sample covariance is exactly zero the ridge falls back to ``ridge * I``.
    """
    B = np.asarray(beta_draws, dtype=np.float64)
    if B.ndim != 2:
        raise DataError("beta draws must be a (T, p) matrix")
    T, p = B.shape
    if T < 2:
        raise DataError(f"need at least two draws, got {T}")
    if ridge < 0:
        raise DataError("ridge must be non-negative")
    if ridge == 0 and T <= p:
        raise DataError(f"T={T} draws <= p={p}: sample covariance is singular, set ridge > 0")
    mu = B.mean(axis=0)
    centered = B - mu
    S = centered.T @ centered / (T - 1)
    S = 0.5 * (S + S.T)
    level = float(np.mean(np.diag(S)))
    added = ridge * (level if level > 0 else 1.0)
    sigma = S + added * np.eye(p)
    lam, rank = symmetric_pinv(sigma, tol)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(lam))):
        raise NumericalError("posterior summary is not finite")
    if rank < p:
        log.warning("covariance rank %d < p=%d after stabilization", rank, p)
    return EffectSizePosterior(mu, sigma, lam, rank, T, ridge=added, ridge_fraction=ridge)
