"""Single-SNP regression scan (SCANONE) and ROC power evaluation."""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _accel
from .errors import DataError
from .rate import CentralityReport
from .simdata import GenotypeMatrix

DEFAULT_LEVEL = 0.05
_TINY = np.finfo(np.float64).tiny
_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class ScanResult:
    p_values: np.ndarray
    betas: np.ndarray
    t_stats: np.ndarray
    level: float = DEFAULT_LEVEL

    @property
    def bonferroni_threshold(self):
        return bonferroni(self.level, self.p_values.shape[0])

    @property
    def significant(self):
        return self.p_values < self.bonferroni_threshold


@dataclass(frozen=True)
class PowerCurve:
    """ROC curve of a variable ranking against the causal set.

    ``scores`` are stored with their original orientation; ``higher_is_better``
    says which direction means "more significant".
    """

    scores: np.ndarray
    higher_is_better: bool
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    degenerate: bool = False


def bonferroni(level, p):
    return level / p


def scanone(X, y, level=DEFAULT_LEVEL):
    """Regress y on each column separately (with intercept); two-sided t-test, n-2 dof."""
    Xv = X.values if isinstance(X, GenotypeMatrix) else np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = Xv.shape[0]
    if y.shape[0] != n:
        raise DataError(f"phenotype has {y.shape[0]} entries, genotypes have {n} rows")
    if n < 3:
        raise DataError("scan needs at least three samples")
    if not np.all(np.isfinite(y)):
        raise DataError("phenotype has non-finite entries")
    beta, t = _accel.scan_stats(Xv, y)
    pvals = 2.0 * stats.t.sf(np.abs(t), df=n - 2)
    pvals = np.clip(pvals, _TINY, 1.0)
    return ScanResult(pvals, beta, t, level)


def roc_auc(scores, truth, higher_is_better=True):
    """ROC curve over all score thresholds with tied scores grouped.

    Parameters
    ----------
    scores : (p,) array
    truth : iterable of int
        Indices of the causal variables.
    higher_is_better : bool
        Orientation of ``scores``; p-values use ``False``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    p = scores.shape[0]
    causal = np.zeros(p, dtype=bool)
    truth = np.asarray(sorted(set(int(j) for j in truth)), dtype=int)
    if truth.size == 0 or truth.size >= p:
        raise DataError("truth must be a non-empty proper subset of the variables")
    if truth.min() < 0 or truth.max() >= p:
        raise DataError("truth indices out of range")
    causal[truth] = True

    key = scores if higher_is_better else -scores
    order = np.argsort(-key, kind="mergesort")
    key_sorted = key[order]
    hits = causal[order]
    # last position of each run of tied scores
    boundaries = np.r_[np.flatnonzero(np.diff(key_sorted) != 0), p - 1]
    tp = np.cumsum(hits)[boundaries]
    fp = np.cumsum(~hits)[boundaries]
    tpr = np.r_[0.0, tp / causal.sum()]
    fpr = np.r_[0.0, fp / (~causal).sum()]
    auc = float(_trapezoid(tpr, fpr))
    degenerate = boundaries.size == 1
    if degenerate:
        auc = 0.5
    return PowerCurve(scores, higher_is_better, fpr, tpr, auc, degenerate)


def threshold_power(result, truth, n_variables=None):
    """True/false positive rates at the method's own cutoff.

    RATE selects ``rate > 1/p``; SCANONE selects ``p < level / p``.

    Returns
    -------
    (tpr, fpr)
    """
    if isinstance(result, CentralityReport):
        selected = {result.indices[i] for i in np.flatnonzero(result.significant)}
        total = n_variables or (len(result.indices) + len(result.nullified))
    elif isinstance(result, ScanResult):
        selected = set(np.flatnonzero(result.significant).tolist())
        total = n_variables or result.p_values.shape[0]
    else:
        raise TypeError(f"cannot threshold {type(result).__name__}")
    truth = set(int(j) for j in truth)
    negatives = total - len(truth)
    tpr = len(selected & truth) / len(truth) if truth else 0.0
    fpr = len(selected - truth) / negatives if negatives > 0 else 0.0
    return tpr, fpr
