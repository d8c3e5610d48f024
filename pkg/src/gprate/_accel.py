"""Hot numeric kernels with numba and pure-numpy implementations.

Every kernel exists twice: a ``_nb_*`` version compiled with ``numba.njit``
and a ``_np_*`` version written with vectorized numpy/scipy. Both consume
identical inputs (including pre-drawn random numbers), so switching the
backend never changes the random stream.

The backend is chosen at import time from the ``GPRATE_DISABLE_NUMBA``
environment variable (``1``/``true``/``yes`` selects numpy) and falls back
to numpy when numba cannot be imported. :func:`backend` switches it
temporarily, which the benchmark and the equivalence tests use.
"""

import contextlib
import os

import numpy as np
from scipy.spatial.distance import pdist

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    # the TBB layer probes the system TBB and warns on old versions
    if numba.config.THREADING_LAYER == "default":
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_DISABLED = os.environ.get("GPRATE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}
_state = {"name": "numba" if (HAVE_NUMBA and not _DISABLED) else "numpy"}


def active_backend():
    return _state["name"]


@contextlib.contextmanager
def backend(name):
    """Temporarily force ``"numba"`` or ``"numpy"`` kernels."""
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    previous = _state["name"]
    _state["name"] = name
    try:
        yield
    finally:
        _state["name"] = previous


# ---------------------------------------------------------------------------
# pairwise distances
# ---------------------------------------------------------------------------

def _np_pairwise_distances(X):
    return pdist(X, "euclidean")


def _np_squared_distance_matrix(X):
    n = X.shape[0]
    D = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    D[iu] = pdist(X, "sqeuclidean")
    return D + D.T


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _nb_squared_distance_matrix(X):
        n, p = X.shape
        D = np.zeros((n, n))
        for i in prange(n):
            for j in range(i + 1, n):
                acc = 0.0
                for k in range(p):
                    diff = X[i, k] - X[j, k]
                    acc += diff * diff
                D[i, j] = acc
                D[j, i] = acc
        return D

    @njit(cache=True, parallel=True)
    def _nb_pairwise_distances(X):
        n, p = X.shape
        out = np.empty(n * (n - 1) // 2)
        for i in prange(n):
            # condensed (pdist) ordering: row i starts after all pairs of rows < i
            base = i * n - i * (i + 1) // 2
            for j in range(i + 1, n):
                acc = 0.0
                for k in range(p):
                    diff = X[i, k] - X[j, k]
                    acc += diff * diff
                out[base + j - i - 1] = np.sqrt(acc)
        return out


def pairwise_distances(X):
    """Condensed Euclidean distances over pairs ``i < j`` (scipy ordering)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if _state["name"] == "numba":
        return _nb_pairwise_distances(X)
    return _np_pairwise_distances(X)


def squared_distance_matrix(X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if _state["name"] == "numba":
        return _nb_squared_distance_matrix(X)
    return _np_squared_distance_matrix(X)


# ---------------------------------------------------------------------------
# Gibbs sweep in the eigenbasis of K
# ---------------------------------------------------------------------------
#
# With K = U diag(d) U^T and g = U^T f, the conditional f | tau2, y becomes
# independent coordinates g_i ~ N(s_i * ytil_i, s_i * tau2) with
# s_i = d_i / (d_i + tau2) and ytil = U^T y. Because U is orthogonal the
# residual sum of squares is ||ytil - g||^2, so a full sweep is O(n).

def _np_gibbs_sweep(ytil, d, z, chi, tau2, prior_ab, fixed_tau2):
    n_iter = z.shape[0]
    g_out = np.empty_like(z)
    tau_out = np.empty(n_iter)
    for t in range(n_iter):
        shrink = d / (d + tau2)
        g = shrink * ytil + np.sqrt(shrink * tau2) * z[t]
        if not fixed_tau2:
            resid = ytil - g
            tau2 = (prior_ab + resid @ resid) / chi[t]
        g_out[t] = g
        tau_out[t] = tau2
    return g_out, tau_out, tau2


if HAVE_NUMBA:

    @njit(cache=True)
    def _nb_gibbs_sweep(ytil, d, z, chi, tau2, prior_ab, fixed_tau2):
        n_iter, n = z.shape
        g_out = np.empty_like(z)
        tau_out = np.empty(n_iter)
        for t in range(n_iter):
            rss = 0.0
            for i in range(n):
                shrink = d[i] / (d[i] + tau2)
                gi = shrink * ytil[i] + np.sqrt(shrink * tau2) * z[t, i]
                g_out[t, i] = gi
                r = ytil[i] - gi
                rss += r * r
            if not fixed_tau2:
                tau2 = (prior_ab + rss) / chi[t]
            tau_out[t] = tau2
        return g_out, tau_out, tau2


def gibbs_sweep(ytil, d, z, chi, tau2, prior_ab, fixed_tau2=False):
    """Run ``len(z)`` Gibbs iterations in spectral coordinates.

    Parameters
    ----------
    ytil : (n,) array
        Response rotated into the eigenbasis of K.
    d : (n,) array
        Non-negative eigenvalues of K.
    z : (m, n) array
        Standard normal draws, one row per iteration.
    chi : (m,) array
        Chi-square draws with ``a + n`` degrees of freedom.
    tau2 : float
        Noise variance entering the first iteration.
    prior_ab : float
        ``a * b`` from the scaled-inverse-chi-square prior.
    fixed_tau2 : bool
        Skip the noise-variance update.

    Returns
    -------
    g_draws, tau2_draws, tau2_last
    """
    args = (
        np.ascontiguousarray(ytil, dtype=np.float64),
        np.ascontiguousarray(d, dtype=np.float64),
        np.ascontiguousarray(z, dtype=np.float64),
        np.ascontiguousarray(chi, dtype=np.float64),
        float(tau2),
        float(prior_ab),
        bool(fixed_tau2),
    )
    if _state["name"] == "numba":
        return _nb_gibbs_sweep(*args)
    return _np_gibbs_sweep(*args)


# ---------------------------------------------------------------------------
# single-predictor regression scan
# ---------------------------------------------------------------------------

def _np_scan_stats(X, y):
    n = X.shape[0]
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sxx = np.einsum("ij,ij->j", xc, xc)
    sxy = xc.T @ yc
    syy = yc @ yc
    beta = sxy / sxx
    rss = np.maximum(syy - beta * sxy, 0.0)
    se = np.sqrt(rss / (n - 2) / sxx)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.copysign(np.inf, beta))
    return beta, t


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _nb_scan_stats(X, y):
        n, p = X.shape
        ybar = 0.0
        for i in range(n):
            ybar += y[i]
        ybar /= n
        syy = 0.0
        for i in range(n):
            syy += (y[i] - ybar) ** 2
        beta = np.empty(p)
        t = np.empty(p)
        for j in prange(p):
            xbar = 0.0
            for i in range(n):
                xbar += X[i, j]
            xbar /= n
            sxx = 0.0
            sxy = 0.0
            for i in range(n):
                dx = X[i, j] - xbar
                sxx += dx * dx
                sxy += dx * (y[i] - ybar)
            b = sxy / sxx
            rss = syy - b * sxy
            if rss < 0.0:
                rss = 0.0
            se = np.sqrt(rss / (n - 2) / sxx)
            beta[j] = b
            if se > 0.0:
                t[j] = b / se
            else:
                t[j] = np.inf if b >= 0 else -np.inf
        return beta, t


def scan_stats(X, y):
    """Per-column simple regression slope and t statistic (with intercept)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if _state["name"] == "numba":
        return _nb_scan_stats(X, y)
    return _np_scan_stats(X, y)


def num_threads():
    """Worker count from ``GPRATE_NUM_THREADS`` (default 1)."""
    raw = os.environ.get("GPRATE_NUM_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)


if HAVE_NUMBA:
    numba_version = numba.__version__
else:  # pragma: no cover
    numba_version = None
