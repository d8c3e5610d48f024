"""KLD centrality, RATE, uniformity diagnostics and the nullification cascade.

For a Gaussian posterior ``N(mu, Sigma)`` with precision ``Lambda``, the
divergence between the marginal of all other variables and their
conditional given variable ``j`` is zero has the closed form::

    KLD_j = 1/2 [ -log|S L| + tr(S L) + 1 - p + alpha_j * mu_j^2 ]

with ``S = Sigma[-j, -j]``, ``L = Lambda[-j, -j]``, ``l = Lambda[-j, j]`` and
``alpha_j = l^T L^-1 l``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DataError, NumericalError
from .projection import DEFAULT_TOL, EffectSizePosterior, symmetric_pinv

log = logging.getLogger(__name__)

EIG_CUTOFF = 1e-12
# |KLD| below ROUNDING_FLOOR * p_effective is indistinguishable from rounding
ROUNDING_FLOOR = 1e-12
CLAMP_WARN_FRACTION = 0.05
SIGNIFICANCE_RTOL = 1e-12
DEFAULT_STOP_DELTA = 0.01


@dataclass(frozen=True)
class ConditionedPosterior:
    """Posterior over the variables still in play.

    ``indices`` maps each position to the original variable index;
    ``provenance`` lists ``(original index, value)`` conditioning events.
    """

    mu: np.ndarray
    sigma: np.ndarray
    lambda_: np.ndarray
    indices: tuple
    provenance: tuple = ()

    def __post_init__(self):
        k = self.mu.shape[0]
        if self.sigma.shape != (k, k) or self.lambda_.shape != (k, k) or len(self.indices) != k:
            raise DataError("conditioned posterior has inconsistent dimensions")

    @property
    def p_effective(self):
        return self.mu.shape[0]

    @property
    def nullified(self):
        return tuple(j for j, _ in self.provenance)


@dataclass(frozen=True)
class CentralityReport:
    kld: np.ndarray
    rate: np.ndarray
    delta: float
    ess: float
    significant: np.ndarray
    indices: tuple
    nullified: tuple = ()
    n_clamped: int = 0
    no_signal: bool = False
    warnings: tuple = field(default_factory=tuple)

    @property
    def p_effective(self):
        return len(self.indices)

    def ranking(self):
        """Original variable indices ordered by decreasing RATE (ties: lowest index)."""
        order = np.lexsort((np.asarray(self.indices), -self.rate))
        return [self.indices[i] for i in order]


def as_conditioned(post):
    if isinstance(post, ConditionedPosterior):
        return post
    if isinstance(post, EffectSizePosterior):
        return ConditionedPosterior(post.mu, post.sigma, post.lambda_, tuple(range(post.p)))
    raise TypeError(f"expected a posterior, got {type(post).__name__}")


def _partition(post, j):
    k = post.p_effective
    if k < 2:
        raise DataError(f"need at least two variables in play, got {k}")
    if not 0 <= j < k:
        raise DataError(f"position {j} out of range for {k} variables")
    rest = np.delete(np.arange(k), j)
    S = post.sigma[np.ix_(rest, rest)]
    L = post.lambda_[np.ix_(rest, rest)]
    lam = post.lambda_[rest, j]
    return rest, S, L, lam


def _solve_sym(L, rhs):
    """Solve ``L x = rhs`` for symmetric L; least-squares if L is singular."""
    try:
        c = linalg.cho_factor(L, lower=True)
        return linalg.cho_solve(c, rhs)
    except linalg.LinAlgError:
        pinv, _ = symmetric_pinv(L, EIG_CUTOFF)
        return pinv @ rhs


def alpha(post, j):
    """``alpha_j = l^T L^-1 l``, computed with one symmetric solve."""
    post = as_conditioned(post)
    _, _, L, lam = _partition(post, j)
    return float(lam @ _solve_sym(L, lam))


def _logdet_chol(M):
    c = linalg.cholesky(M, lower=True)
    return 2.0 * np.sum(np.log(np.diag(c)))


def _divergence_terms(S, L):
    """``-log|S L| + tr(S L) - dim`` via factorizations, eigen fallback if singular."""
    dim = S.shape[0]
    try:
        logdet = _logdet_chol(S) + _logdet_chol(L)
        trace = float(np.sum(S * L.T))
        return -logdet + trace - dim
    except linalg.LinAlgError:
        pass
    # The eigenvalues m_i of S^1/2 L S^1/2 give sum(m_i - log m_i - 1); eigen-directions
    # with m_i below the cutoff are dropped from both the log-det and the trace.
    ws, Qs = linalg.eigh(S)
    ws = np.clip(ws, 0.0, None)
    root = (Qs * np.sqrt(ws)) @ Qs.T
    m = linalg.eigvalsh(root @ L @ root)
    top = np.max(np.abs(m)) if m.size else 0.0
    kept = m[m > EIG_CUTOFF * top] if top > 0 else m[:0]
    return float(np.sum(kept - np.log(kept) - 1.0))


def kld_at_zero(post, j):
    """Closed-form divergence for setting the analog at position ``j`` to zero."""
    post = as_conditioned(post)
    _, S, L, lam = _partition(post, j)
    a = alpha(post, j)
    value = 0.5 * (_divergence_terms(S, L) + a * post.mu[j] ** 2)
    if not np.isfinite(value):
        cond = np.linalg.cond(L)
        raise NumericalError(f"non-finite KLD at position {j} (cond(Lambda_-j) = {cond:.3g})")
    return value


def entropic_difference(rates):
    """``log(p) - H(rates)`` with ``0 log 0 = 0``, floored at zero."""
    r = np.asarray(rates, dtype=np.float64)
    nz = r[r > 0]
    H = -float(np.sum(nz * np.log(nz)))
    return max(float(np.log(r.size)) - H, 0.0)


def ess(delta):
    """Effective sample size in percent: ``100 / (1 + delta)``."""
    return 100.0 / (1.0 + delta)


def compute_rates(post):
    """KLD for every variable in play, normalized to RATE, plus Delta and ESS."""
    post = as_conditioned(post)
    k = post.p_effective
    if k < 2:
        raise DataError(f"need at least two variables in play, got {k}")
    raw = np.array([kld_at_zero(post, j) for j in range(k)])
    floor = ROUNDING_FLOOR * k
    n_clamped = int(np.sum(raw < -floor))
    kld = np.where(raw > floor, raw, 0.0)
    warnings = []
    if n_clamped:
        log.debug("clamped %d negative KLDs (min %.3g)", n_clamped, raw.min())
        if n_clamped > CLAMP_WARN_FRACTION * k:
            warnings.append(f"{n_clamped} of {k} KLDs were negative and clamped to zero")
    total = kld.sum()
    no_signal = not total > 0
    if no_signal:
        warnings.append("no centrality signal: all KLDs are zero")
        rate = np.full(k, 1.0 / k)
    else:
        rate = kld / total
    delta = entropic_difference(rate)
    significant = rate > (1.0 / k) * (1.0 + SIGNIFICANCE_RTOL)
    return CentralityReport(
        kld=kld,
        rate=rate,
        delta=delta,
        ess=ess(delta),
        significant=significant,
        indices=tuple(post.indices),
        nullified=post.nullified,
        n_clamped=n_clamped,
        no_signal=no_signal,
        warnings=tuple(warnings),
    )


def nullify_and_condition(post, j, tol=DEFAULT_TOL):
    """Condition on the analog at position ``j`` being zero.

    New mean ``mu_-j + theta_j (0 - mu_j)`` with ``theta_j = -L^-1 l``; new
    precision ``L``; new covariance its pseudoinverse.
    """
    post = as_conditioned(post)
    rest, _, L, lam = _partition(post, j)
    theta = -_solve_sym(L, lam)
    mu = post.mu[rest] - theta * post.mu[j]
    lam_new = 0.5 * (L + L.T)
    sigma_new, _ = symmetric_pinv(lam_new, tol)
    return ConditionedPosterior(
        mu=mu,
        sigma=sigma_new,
        lambda_=lam_new,
        indices=tuple(post.indices[i] for i in rest),
        provenance=post.provenance + ((post.indices[j], 0.0),),
    )


def nullify_variable(post, variable):
    """Condition on an original variable index (rather than a position)."""
    post = as_conditioned(post)
    try:
        j = post.indices.index(variable)
    except ValueError:
        raise DataError(f"variable {variable} is not in play") from None
    return nullify_and_condition(post, j)


def centrality_cascade(post, max_steps, stop_delta=DEFAULT_STOP_DELTA):
    """Repeatedly nullify the top-RATE variable and recompute.

    Returns one report per nullification step, each computed on the
    posterior after that step. Stops early once a report has
    ``delta < stop_delta``.
    """
    post = as_conditioned(post)
    if not 0 <= max_steps <= post.p_effective - 2:
        raise DataError(f"max_steps must lie in [0, {post.p_effective - 2}], got {max_steps}")
    reports = []
    if max_steps == 0:
        return reports
    current = compute_rates(post)
    for _ in range(max_steps):
        top = int(np.argmax(current.rate))
        ties = np.flatnonzero(current.rate == current.rate[top])
        if ties.size > 1:
            log.info("argmax RATE tie among variables %s; nullifying %d", [post.indices[t] for t in ties], post.indices[top])
        post = nullify_and_condition(post, top)
        current = compute_rates(post)
        reports.append(current)
        if current.delta < stop_delta:
            break
    return reports


def nullify_sequence(post, variables):
    """Nullify a fixed list of original variable indices, one report per step."""
    post = as_conditioned(post)
    reports = []
    for v in variables:
        post = nullify_variable(post, v)
        reports.append(compute_rates(post))
    return reports
