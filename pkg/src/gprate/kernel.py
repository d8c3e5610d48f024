"""Sample covariance matrices for GP regression."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _accel
from .errors import DataError, NumericalError
from .simdata import GenotypeMatrix

DEFAULT_JITTER = 1e-6


class KernelKind(str, Enum):
    GAUSSIAN = "gaussian"
    LINEAR = "linear"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, bandwidth and diagonal jitter.

    A Gaussian spec without a bandwidth uses the median heuristic.
    """

    kind: KernelKind = KernelKind.GAUSSIAN
    bandwidth: float | None = None
    jitter: float = DEFAULT_JITTER

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise DataError(f"bandwidth must be positive, got {self.bandwidth}")
        if not self.jitter >= 0:
            raise DataError(f"jitter must be non-negative, got {self.jitter}")


@dataclass(frozen=True)
class CovarianceMatrix:
    values: np.ndarray
    spec: KernelSpec
    bandwidth: float | None = None

    @property
    def n(self):
        return self.values.shape[0]


def _design(X):
    if isinstance(X, GenotypeMatrix):
        return X.values
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return X


def median_heuristic(X):
    """Median Euclidean distance over all sample pairs ``i < j``."""
    Xv = _design(X)
    if Xv.shape[0] < 2:
        raise DataError("median heuristic needs at least two samples")
    theta = float(np.median(_accel.pairwise_distances(Xv)))
    if theta <= 0:
        raise DataError("degenerate design: median pairwise distance is zero")
    return theta


def build_covariance(X, spec=None):
    """Gaussian ``exp(-|x - x'|^2 / (2 theta^2))`` or linear ``X X^T / p`` kernel, plus jitter."""
    spec = spec or KernelSpec()
    Xv = _design(X)
    bandwidth = None
    if spec.kind is KernelKind.GAUSSIAN:
        bandwidth = spec.bandwidth if spec.bandwidth is not None else median_heuristic(Xv)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            K = np.exp(-_accel.squared_distance_matrix(Xv) / (2.0 * bandwidth**2))
    else:
        K = Xv @ Xv.T / Xv.shape[1]
        K = 0.5 * (K + K.T)
    if not np.all(np.isfinite(K)):
        raise NumericalError("covariance matrix has non-finite entries")
    K[np.diag_indices_from(K)] += spec.jitter
    K.setflags(write=False)
    return CovarianceMatrix(K, spec, bandwidth)
