"""Variable prioritization for Gaussian process regression via relative KLD centrality."""

from .errors import DataError, NumericalError, RateError
from .gp import GpConfig, PosteriorDraws, gibbs_fit, posterior_mean_f
from .kernel import CovarianceMatrix, KernelKind, KernelSpec, build_covariance, median_heuristic
from .projection import EffectSizePosterior, project_draws, pseudoinverse, summarize_posterior
from .rate import (
    CentralityReport,
    ConditionedPosterior,
    alpha,
    centrality_cascade,
    compute_rates,
    ess,
    kld_at_zero,
    nullify_and_condition,
    nullify_sequence,
)
from .simdata import (
    GenotypeMatrix,
    Model,
    SimConfig,
    SimTruth,
    simulate_genotypes,
    simulate_phenotype,
    simulate_structured_genotypes,
)

__version__ = "0.1.0"
