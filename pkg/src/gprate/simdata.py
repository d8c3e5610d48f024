"""Synthetic genotypes and phenotypes with exact variance budgeting."""

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations, product

import numpy as np

from .errors import DataError

MAX_REDRAWS = 100


@dataclass(frozen=True)
class GenotypeMatrix:
    """Standardized ``n x p`` genotype design.

    ``raw_frequencies`` holds the allele frequency each column was drawn
    with (simulated data only). ``populations`` holds the subpopulation label
    of each sample for structured simulations.
    """

    values: np.ndarray
    snp_ids: tuple
    raw_frequencies: np.ndarray | None = None
    populations: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError("genotype matrix must be two-dimensional")
        n, p = values.shape
        if n < 2 or p < 2:
            raise DataError(f"genotype matrix needs n >= 2 and p >= 2, got {n}x{p}")
        if not np.all(np.isfinite(values)):
            raise DataError("genotype matrix has non-finite entries")
        if len(self.snp_ids) != p:
            raise DataError(f"{len(self.snp_ids)} SNP ids for {p} columns")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "snp_ids", tuple(str(s) for s in self.snp_ids))

    @property
    def n_samples(self):
        return self.values.shape[0]

    @property
    def n_snps(self):
        return self.values.shape[1]

    @classmethod
    def from_raw(cls, raw, snp_ids=None, **kwargs):
        """Standardize a raw dosage matrix; constant columns are rejected."""
        raw = np.asarray(raw, dtype=np.float64)
        if snp_ids is None:
            snp_ids = default_snp_ids(raw.shape[1])
        return cls(standardize(raw, snp_ids=snp_ids), snp_ids, **kwargs)


def default_snp_ids(p):
    return tuple(f"snp{j + 1}" for j in range(p))


def standardize(A, snp_ids=None):
    """Center each column and scale it to unit (population) standard deviation."""
    A = np.asarray(A, dtype=np.float64)
    centered = A - A.mean(axis=0)
    sd = np.sqrt(np.mean(centered**2, axis=0))
    scale = np.max(np.abs(A), axis=0) if A.size else 0.0
    constant = sd <= 1e-12 * np.maximum(scale, 1.0)
    if np.any(constant):
        j = int(np.flatnonzero(constant)[0])
        name = snp_ids[j] if snp_ids is not None else f"column {j}"
        raise DataError(f"constant column cannot be standardized: {name}")
    return centered / sd


class Model(str, Enum):
    STANDARD = "standard"
    STRATIFIED = "stratified"


@dataclass(frozen=True)
class SimConfig:
    """Phenotype simulation settings.

    ``causal_indices`` are 0-based. ``group_split`` gives the sizes of the two
    causal groups (taken in order from ``causal_indices``); when present only
    cross-group pairs interact. ``fixed_beta`` replaces the N(0, 1) additive
    draws by a constant, which is how null-uniformity data are produced.
    """

    n: int
    p: int
    causal_indices: tuple
    h2: float
    rho: float = 1.0
    model: Model = Model.STANDARD
    n_pcs: int = 0
    pc_variance_fraction: float = 0.0
    group_split: tuple | None = None
    fixed_beta: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "causal_indices", tuple(int(j) for j in self.causal_indices))
        causal = self.causal_indices
        if len(set(causal)) != len(causal):
            raise DataError("causal indices contain duplicates")
        if any(j < 0 or j >= self.p for j in causal):
            raise DataError(f"causal indices must lie in [0, {self.p})")
        if not 0.0 <= self.h2 < 1.0:
            raise DataError(f"h2 must lie in [0, 1), got {self.h2}")
        if not 0.0 < self.rho <= 1.0:
            raise DataError(f"rho must lie in (0, 1], got {self.rho}")
        if self.h2 > 0 and not causal:
            raise DataError("h2 > 0 needs at least one causal index")
        if self.rho < 1.0 and self.h2 > 0 and len(causal) < 2:
            raise DataError("rho < 1 needs at least two causal indices to form interaction pairs")
        if self.group_split is not None:
            sizes = tuple(int(s) for s in self.group_split)
            if len(sizes) != 2 or min(sizes) < 1 or sum(sizes) != len(causal):
                raise DataError(f"group_split {self.group_split} must be two positive sizes summing to {len(causal)}")
            object.__setattr__(self, "group_split", sizes)
        if self.model is Model.STRATIFIED:
            if self.n_pcs < 1:
                raise DataError("stratified model needs n_pcs >= 1")
            if not 0.0 <= self.pc_variance_fraction <= 1.0 - self.h2:
                raise DataError(
                    f"pc_variance_fraction must lie in [0, 1 - h2] = [0, {1.0 - self.h2}], "
                    f"got {self.pc_variance_fraction}"
                )

    @property
    def noise_fraction(self):
        pc = self.pc_variance_fraction if self.model is Model.STRATIFIED else 0.0
        return 1.0 - self.h2 - pc


@dataclass(frozen=True)
class SimTruth:
    beta: np.ndarray
    gamma: np.ndarray
    interaction_pairs: tuple
    y: np.ndarray
    causal_indices: tuple
    omega: np.ndarray | None = None
    variance_report: dict = field(default_factory=dict)


def draw_dosages(n, p, freq_range=(0.05, 0.5), seed=None):
    """Raw Binomial(2, f_j) dosages with f_j ~ U(lo, hi).

    Columns that come out constant are redrawn. Returns ``(dosages, freqs)``.
    """
    lo, hi = freq_range
    if not 0.0 < lo < hi < 1.0:
        raise DataError(f"frequency range must satisfy 0 < lo < hi < 1, got {freq_range}")
    _check_dims(n, p)
    rng = np.random.default_rng(seed)
    freqs = rng.uniform(lo, hi, size=p)
    raw = rng.binomial(2, freqs, size=(n, p)).astype(np.float64)
    for j in range(p):
        for _ in range(MAX_REDRAWS):
            if np.ptp(raw[:, j]) > 0:
                break
            raw[:, j] = rng.binomial(2, freqs[j], size=n)
        else:
            raise DataError(f"column snp{j + 1} stayed constant after {MAX_REDRAWS} redraws")
    return raw, freqs


def simulate_genotypes(n, p, freq_range=(0.05, 0.5), seed=None):
    """Independent SNPs, standardized column-wise."""
    raw, freqs = draw_dosages(n, p, freq_range, seed)
    ids = default_snp_ids(p)
    return GenotypeMatrix(standardize(raw, ids), ids, raw_frequencies=freqs)


def simulate_structured_genotypes(n, p, n_subpops=3, fst=0.1, freq_range=(0.05, 0.5), seed=None):
    """Balding-Nichols genotypes: samples split into equal subpopulation blocks.

    Each subpopulation frequency is Beta(f(1-F)/F, (1-f)(1-F)/F) around the
    shared ancestral frequency f ~ U(lo, hi).
    """
    if n_subpops < 2:
        raise DataError(f"structured genotypes need at least 2 subpopulations, got {n_subpops}")
    if not 0.0 < fst < 0.5:
        raise DataError(f"fst must lie in (0, 0.5), got {fst}")
    lo, hi = freq_range
    if not 0.0 < lo < hi < 1.0:
        raise DataError(f"frequency range must satisfy 0 < lo < hi < 1, got {freq_range}")
    _check_dims(n, p)
    if n < n_subpops:
        raise DataError("fewer samples than subpopulations")
    rng = np.random.default_rng(seed)
    labels = np.concatenate([np.full(len(block), k) for k, block in enumerate(np.array_split(np.arange(n), n_subpops))])
    ancestral = rng.uniform(lo, hi, size=p)
    shape = (1.0 - fst) / fst
    raw = np.empty((n, p))
    for j in range(p):
        for _ in range(MAX_REDRAWS):
            sub = rng.beta(ancestral[j] * shape, (1.0 - ancestral[j]) * shape, size=n_subpops)
            raw[:, j] = rng.binomial(2, sub[labels])
            if np.ptp(raw[:, j]) > 0:
                break
        else:
            raise DataError(f"column snp{j + 1} stayed constant after {MAX_REDRAWS} redraws")
    ids = default_snp_ids(p)
    return GenotypeMatrix(standardize(raw, ids), ids, raw_frequencies=ancestral, populations=labels)


def _check_dims(n, p):
    if n < 2 or p < 2:
        raise DataError(f"need n >= 2 and p >= 2, got n={n}, p={p}")


def interaction_pairs(causal, group_split=None):
    """All causal pairs, or only cross-group pairs when a split is given."""
    causal = tuple(causal)
    if group_split is None:
        return tuple(combinations(causal, 2))
    g1 = causal[: group_split[0]]
    g2 = causal[group_split[0]:]
    return tuple(product(g1, g2))


def principal_components(X, k):
    """Top-k PC scores of X; each loading vector's largest-magnitude entry is positive."""
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    U, s, Vt = U[:, :k], s[:k], Vt[:k]
    pivots = np.argmax(np.abs(Vt), axis=1)
    signs = np.sign(Vt[np.arange(k), pivots])
    signs[signs == 0] = 1.0
    return U * (s * signs)


def _rescale(component, target):
    """Scale ``component`` so its population variance equals ``target`` exactly."""
    var = np.var(component)
    if var <= 0:
        raise DataError("cannot rescale a constant component")
    return np.sqrt(target / var)


def simulate_phenotype(X, cfg):
    """Draw y from the standard or stratified generative model.

    Components are rescaled by their realized sample standard deviation, so
    ``V(X beta) = rho * h2``, ``V(W gamma) = (1 - rho) * h2``,
    ``V(Z omega) = pc_variance_fraction`` and ``V(eps)`` fills the rest;
    the budget total is 1. Variances use the ``1/n`` convention.
    """
    Xv = X.values if isinstance(X, GenotypeMatrix) else np.asarray(X, dtype=np.float64)
    n, p = Xv.shape
    if (n, p) != (cfg.n, cfg.p):
        raise DataError(f"config expects {cfg.n}x{cfg.p} genotypes, got {n}x{p}")
    rng = np.random.default_rng(cfg.seed)
    causal = np.asarray(cfg.causal_indices, dtype=int)

    beta = np.zeros(p)
    additive = np.zeros(n)
    gamma = np.zeros(0)
    interaction = np.zeros(n)
    pairs = ()
    omega = None
    strat = np.zeros(n)

    additive_target = cfg.rho * cfg.h2
    interaction_target = (1.0 - cfg.rho) * cfg.h2

    if cfg.h2 > 0:
        if cfg.fixed_beta is None:
            beta[causal] = rng.standard_normal(len(causal))
        else:
            beta[causal] = cfg.fixed_beta
        additive = Xv @ beta
        c = _rescale(additive, additive_target)
        beta *= c
        additive *= c

        if cfg.rho < 1.0:
            pairs = interaction_pairs(cfg.causal_indices, cfg.group_split)
            W = np.column_stack([Xv[:, a] * Xv[:, b] for a, b in pairs])
            W = standardize(W, [f"{a}x{b}" for a, b in pairs])
            gamma = rng.standard_normal(W.shape[1])
            interaction = W @ gamma
            c = _rescale(interaction, interaction_target)
            gamma *= c
            interaction *= c

    if cfg.model is Model.STRATIFIED:
        Z = principal_components(Xv, cfg.n_pcs)
        omega = rng.standard_normal(cfg.n_pcs)
        strat = Z @ omega
        if cfg.pc_variance_fraction > 0:
            c = _rescale(strat, cfg.pc_variance_fraction)
            omega *= c
            strat *= c
        else:
            omega[:] = 0.0
            strat = np.zeros(n)

    noise = rng.standard_normal(n)
    if cfg.noise_fraction > 0:
        noise *= _rescale(noise, cfg.noise_fraction)
    else:
        noise[:] = 0.0

    y = additive + interaction + strat + noise
    components = {
        "additive": float(np.var(additive)),
        "interaction": float(np.var(interaction)),
        "stratification": float(np.var(strat)),
        "noise": float(np.var(noise)),
    }
    report = dict(components)
    report["total"] = sum(components.values())
    report["var_y"] = float(np.var(y))
    return SimTruth(
        beta=beta,
        gamma=gamma,
        interaction_pairs=tuple(pairs),
        y=y,
        causal_indices=cfg.causal_indices,
        omega=omega,
        variance_report=report,
    )
