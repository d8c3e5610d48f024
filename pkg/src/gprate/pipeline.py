"""End-to-end RATE fits and the replicate power harness."""

import contextlib
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import baseline, gp, kernel, projection, rate, simdata
from .errors import NumericalError

log = logging.getLogger(__name__)


@contextlib.contextmanager
def _stage(name, timings):
    t0 = time.perf_counter()
    try:
        yield
    except NumericalError as exc:
        raise NumericalError(f"[{name}] {exc}") from exc
    finally:
        timings[name] = time.perf_counter() - t0


@dataclass
class RateFit:
    report: rate.CentralityReport
    posterior: projection.EffectSizePosterior
    draws: gp.PosteriorDraws
    covariance: kernel.CovarianceMatrix
    beta_draws: np.ndarray
    timings: dict = field(default_factory=dict)


def fit_rate(
    X,
    y,
    kernel_spec=None,
    gp_config=None,
    tol=projection.DEFAULT_TOL,
    ridge=projection.DEFAULT_RIDGE,
    keep_draws=True,
):
    """Kernel, Gibbs fit, projection, posterior summary and first-order RATE."""
    timings = {}
    with _stage("kernel", timings):
        K = kernel.build_covariance(X, kernel_spec or kernel.KernelSpec())
    with _stage("gibbs", timings):
        draws = gp.gibbs_fit(y, K, gp_config or gp.GpConfig())
    with _stage("projection", timings):
        beta_draws = projection.project_draws(X, draws, tol)
        post = projection.summarize_posterior(beta_draws, ridge=ridge, tol=tol)
    with _stage("rate", timings):
        report = rate.compute_rates(post)

    if not keep_draws:
        draws = gp.PosteriorDraws(draws.f_draws[:0], draws.tau2_draws[:0], draws.config)
    return RateFit(report, post, draws, K, beta_draws if keep_draws else beta_draws[:0], timings)


SCENARIOS = {
    # name: (model, structured genotypes, n_pcs)
    "I": (simdata.Model.STANDARD, False, 0),
    "II": (simdata.Model.STRATIFIED, True, 5),
    "III": (simdata.Model.STRATIFIED, True, 10),
}


@dataclass(frozen=True)
class PowerDesign:
    """One power-study setting; defaults are the desk-scale scenario II design."""

    scenario: str = "II"
    n: int = 500
    p: int = 200
    n_causal: int = 30
    group_split: tuple = (5, 25)
    h2: float = 0.3
    rho: float = 1.0
    pc_variance_fraction: float = 0.3
    n_subpops: int = 3
    fst: float = 0.1
    n_iter: int = 10_000
    burn_in: int = 1_000
    a: float = 5.0
    b: float = 0.4

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {sorted(SCENARIOS)}")


@dataclass
class ReplicateResult:
    seed: int
    causal: tuple
    rate_curve: baseline.PowerCurve
    scan_curve: baseline.PowerCurve
    rate_threshold: tuple
    scan_threshold: tuple
    delta: float
    ess: float


def simulate_design(design, seed):
    """Genotypes and phenotype for one replicate of ``design``."""
    model, structured, n_pcs = SCENARIOS[design.scenario]
    rng = np.random.default_rng(seed)
    geno_seed, causal_seed, pheno_seed = rng.integers(0, 2**31 - 1, size=3)
    if structured:
        X = simdata.simulate_structured_genotypes(
            design.n, design.p, design.n_subpops, design.fst, seed=int(geno_seed)
        )
    else:
        X = simdata.simulate_genotypes(design.n, design.p, seed=int(geno_seed))
    causal = tuple(int(j) for j in np.random.default_rng(causal_seed).choice(design.p, design.n_causal, replace=False))
    cfg = simdata.SimConfig(
        n=design.n,
        p=design.p,
        causal_indices=causal,
        h2=design.h2,
        rho=design.rho,
        model=model,
        n_pcs=n_pcs,
        pc_variance_fraction=design.pc_variance_fraction if model is simdata.Model.STRATIFIED else 0.0,
        group_split=design.group_split,
        seed=int(pheno_seed),
    )
    return X, simdata.simulate_phenotype(X, cfg)


def run_replicate(design, seed):
    X, truth = simulate_design(design, seed)
    gp_cfg = gp.GpConfig(n_iter=design.n_iter, burn_in=design.burn_in, a=design.a, b=design.b, seed=seed)
    fit = fit_rate(X, truth.y, kernel.KernelSpec(), gp_cfg, keep_draws=False)
    scan = baseline.scanone(X, truth.y)
    causal = truth.causal_indices
    return ReplicateResult(
        seed=seed,
        causal=causal,
        rate_curve=baseline.roc_auc(fit.report.rate, causal, higher_is_better=True),
        scan_curve=baseline.roc_auc(scan.p_values, causal, higher_is_better=False),
        rate_threshold=baseline.threshold_power(fit.report, causal),
        scan_threshold=baseline.threshold_power(scan, causal),
        delta=fit.report.delta,
        ess=fit.report.ess,
    )


def _safe_replicate(args):
    design, seed = args
    try:
        return run_replicate(design, seed)
    except Exception as exc:  # recorded per replicate, summarized by the caller
        log.warning("replicate seed=%d failed: %s", seed, exc)
        return exc


def run_power(design, seeds, workers=1):
    """Run replicates, possibly in worker processes.

    Returns
    -------
    results : list of ReplicateResult
    failures : list of (seed, exception)
    """
    jobs = [(design, int(s)) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_safe_replicate, jobs))
    else:
        outcomes = [_safe_replicate(job) for job in jobs]
    results, failures = [], []
    for (_, seed), out in zip(jobs, outcomes):
        if isinstance(out, Exception):
            failures.append((seed, out))
        else:
            results.append(out)
    return results, failures


FPR_GRID = np.linspace(0.0, 1.0, 101)


def mean_curve(curves, grid=FPR_GRID):
    """Vertical average of step ROC curves on a common FPR grid."""
    stacked = []
    for c in curves:
        # right-continuous step interpolation keeps the ROC's vertical jumps
        idx = np.searchsorted(c.fpr, grid, side="right") - 1
        stacked.append(c.tpr[idx])
    return grid, np.mean(stacked, axis=0)


def summarize_power(results):
    """Mean AUC, its standard error and native-threshold rates per method."""
    out = {}
    for method in ("rate", "scan"):
        aucs = np.array([getattr(r, f"{method}_curve").auc for r in results])
        thr = np.array([getattr(r, f"{method}_threshold") for r in results])
        se = aucs.std(ddof=1) / np.sqrt(aucs.size) if aucs.size > 1 else float("nan")
        out[method] = {
            "mean_auc": float(aucs.mean()),
            "se_auc": float(se),
            "mean_tpr": float(thr[:, 0].mean()),
            "mean_fpr": float(thr[:, 1].mean()),
        }
    wins = sum(r.rate_threshold[0] > r.scan_threshold[0] for r in results)
    out["rate_tpr_wins"] = int(wins)
    out["n_replicates"] = len(results)
    return out
