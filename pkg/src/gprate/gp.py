"""Gibbs sampler for conjugate Gaussian process regression.

The hierarchy is::

    y = f + eps,   f ~ N(0, K),   eps ~ N(0, tau2 I),   tau2 ~ Scale-Inv-chi2(a, b)

Scale-Inv-chi2(a, b) here has density proportional to
``tau2^-(a/2 + 1) exp(-a b / (2 tau2))`` and mean ``a b / (a - 2)``. A draw is
``a * b / chi2_a``. The full conditionals are

* ``f | tau2, y ~ N(K (K + tau2 I)^-1 y, K - K (K + tau2 I)^-1 K)``
* ``tau2 | f, y ~ Scale-Inv-chi2(a + n, (a b + |y - f|^2) / (a + n))``
"""

import csv
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import _accel
from .errors import DataError, NumericalError
from .kernel import CovarianceMatrix

log = logging.getLogger(__name__)

_CHUNK = 512


@dataclass(frozen=True)
class GpConfig:
    n_iter: int = 10_000
    burn_in: int = 1_000
    thin: int = 1
    a: float = 5.0
    b: float = 0.4
    seed: int = 0
    method: str = "eigen"
    tau2_init: float | None = None

    def __post_init__(self):
        if self.n_iter < 1:
            raise DataError(f"n_iter must be positive, got {self.n_iter}")
        if not 0 <= self.burn_in < self.n_iter:
            raise DataError(f"burn_in must lie in [0, n_iter), got {self.burn_in}")
        if self.thin < 1:
            raise DataError(f"thin must be >= 1, got {self.thin}")
        if not (self.a > 0 and self.b > 0):
            raise DataError(f"a and b must be positive, got a={self.a}, b={self.b}")
        if self.method not in ("eigen", "cholesky"):
            raise DataError(f"unknown sampler method {self.method!r}")
        if (self.n_iter - self.burn_in) // self.thin < 1:
            raise DataError("no draws retained with this burn_in/thin")

    @property
    def n_retained(self):
        return (self.n_iter - self.burn_in) // self.thin


@dataclass(frozen=True)
class PosteriorDraws:
    f_draws: np.ndarray
    tau2_draws: np.ndarray
    config: GpConfig

    @property
    def n_draws(self):
        return self.f_draws.shape[0]


def _retained_mask(cfg):
    it = np.arange(cfg.n_iter)
    offset = it - cfg.burn_in
    keep = (offset >= 0) & (offset % cfg.thin == cfg.thin - 1)
    keep &= offset < cfg.n_retained * cfg.thin
    return keep


def sample_scaled_inv_chi2(rng, dof, scale, size=None):
    """Draws from Scale-Inv-chi2(dof, scale) as ``dof * scale / chi2_dof``."""
    return dof * scale / rng.chisquare(dof, size=size)


def tau2_conditional_params(y, f, a, b):
    """Degrees of freedom and scale of ``tau2 | f, y``: ``(a + n, (a b + |y - f|^2) / (a + n))``."""
    resid = np.asarray(y, dtype=np.float64) - np.asarray(f, dtype=np.float64)
    dof = a + resid.shape[0]
    return dof, (a * b + resid @ resid) / dof


def gibbs_fit(y, K, cfg=None, fixed_tau2=None):
    """Run the two-block Gibbs sampler and return the retained draws.

    Parameters
    ----------
    y : (n,) array
    K : CovarianceMatrix or (n, n) array
        Prior covariance of f (jitter already applied).
    cfg : GpConfig
    fixed_tau2 : float, optional
        Hold the noise variance at this value (the tau2 update is skipped).

    Notes
    -----
    ``method="eigen"`` diagonalizes K once and samples in its eigenbasis;
    ``method="cholesky"`` refactorizes ``K + tau2 I`` and ``V*`` every sweep.
    Both target the same conditional distributions.
    """
    cfg = cfg or GpConfig()
    Kv = K.values if isinstance(K, CovarianceMatrix) else np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.shape[0]
    if Kv.shape != (n, n):
        raise DataError(f"covariance is {Kv.shape}, expected ({n}, {n})")
    if not np.all(np.isfinite(y)):
        raise DataError("response has non-finite entries")
    if fixed_tau2 is not None and not fixed_tau2 > 0:
        raise DataError("fixed_tau2 must be positive")

    if cfg.method == "eigen":
        f_draws, tau2_draws = _fit_eigen(y, Kv, cfg, fixed_tau2)
    else:
        f_draws, tau2_draws = _fit_cholesky(y, Kv, cfg, fixed_tau2)

    if not (np.all(np.isfinite(f_draws)) and np.all(tau2_draws > 0)):
        raise NumericalError("sampler produced non-finite draws or non-positive tau2")
    return PosteriorDraws(f_draws, tau2_draws, cfg)


def _initial_tau2(cfg, fixed_tau2):
    if fixed_tau2 is not None:
        return float(fixed_tau2)
    return cfg.tau2_init if cfg.tau2_init is not None else cfg.b


def _fit_eigen(y, Kv, cfg, fixed_tau2):
    n = y.shape[0]
    d, U = linalg.eigh(0.5 * (Kv + Kv.T))
    d = np.clip(d, 0.0, None)
    ytil = U.T @ y
    rng = np.random.default_rng(cfg.seed)
    dof = cfg.a + n
    prior_ab = cfg.a * cfg.b
    tau2 = _initial_tau2(cfg, fixed_tau2)
    keep = _retained_mask(cfg)

    g_kept = np.empty((cfg.n_retained, n))
    tau_kept = np.empty(cfg.n_retained)
    filled = 0
    for start in range(0, cfg.n_iter, _CHUNK):
        stop = min(start + _CHUNK, cfg.n_iter)
        z = rng.standard_normal((stop - start, n))
        chi = rng.chisquare(dof, size=stop - start)
        g, taus, tau2 = _accel.gibbs_sweep(ytil, d, z, chi, tau2, prior_ab, fixed_tau2 is not None)
        sel = keep[start:stop]
        m = int(sel.sum())
        g_kept[filled:filled + m] = g[sel]
        tau_kept[filled:filled + m] = taus[sel]
        filled += m
    return g_kept @ U.T, tau_kept


def _cholesky_with_jitter(M, what, tau2):
    scale = max(float(np.mean(np.diag(M))), np.finfo(float).tiny)
    for jitter in (0.0, 1e-10, 1e-9, 1e-8, 1e-7):
        try:
            return linalg.cholesky(M + jitter * scale * np.eye(M.shape[0]), lower=True)
        except linalg.LinAlgError:
            continue
    cond = np.linalg.cond(M)
    raise NumericalError(f"cannot factorize {what} at tau2={tau2:.6g} (condition estimate {cond:.3g})")


def _fit_cholesky(y, Kv, cfg, fixed_tau2):
    n = y.shape[0]
    rng = np.random.default_rng(cfg.seed)
    dof = cfg.a + n
    tau2 = _initial_tau2(cfg, fixed_tau2)
    keep = _retained_mask(cfg)
    eye = np.eye(n)

    f_kept = np.empty((cfg.n_retained, n))
    tau_kept = np.empty(cfg.n_retained)
    filled = 0
    for it in range(cfg.n_iter):
        L = _cholesky_with_jitter(Kv + tau2 * eye, "K + tau2 I", tau2)
        solve_K = linalg.cho_solve((L, True), Kv)
        mean = solve_K.T @ y
        V = Kv - Kv @ solve_K
        V = 0.5 * (V + V.T)
        LV = _cholesky_with_jitter(V, "posterior covariance V*", tau2)
        f = mean + LV @ rng.standard_normal(n)
        chi = rng.chisquare(dof)
        if fixed_tau2 is None:
            _, scale = tau2_conditional_params(y, f, cfg.a, cfg.b)
            tau2 = dof * scale / chi
        if keep[it]:
            f_kept[filled] = f
            tau_kept[filled] = tau2
            filled += 1
    return f_kept, tau_kept


def posterior_mean_f(draws):
    return np.asarray(draws.f_draws).mean(axis=0)


def write_draws(path, draws):
    """Dump draws as TSV rows ``(iteration, tau2, f_1..f_n)``."""
    n = draws.f_draws.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["iteration", "tau2"] + [f"f_{i + 1}" for i in range(n)])
        for t, (tau2, f) in enumerate(zip(draws.tau2_draws, draws.f_draws)):
            w.writerow([t, f"{tau2:.17g}"] + [f"{v:.17g}" for v in f])
