"""Plain TSV readers and writers.

Numbers are written with 17 significant digits so a write/read cycle
reproduces float64 values exactly. Lines starting with ``#`` carry
``key<TAB>value`` metadata and are skipped by the table readers.
"""

import hashlib

import numpy as np

from .errors import DataError
from .simdata import GenotypeMatrix, standardize

FLOAT_FMT = "{:.17g}"


def fmt(x):
    return FLOAT_FMT.format(float(x))


def _write(path, header, rows, meta=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}\t{value}\n")
        if header is not None:
            fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")


def read_table(path, header=True):
    """Return ``(meta, header, rows)`` with rows as lists of strings."""
    meta, head, rows = {}, None, []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("\t")
                meta.setdefault(key, []).append(value)
                continue
            if not line.strip():
                continue
            fields = line.split("\t")
            if header and head is None:
                head = fields
            else:
                rows.append(fields)
    return meta, head, rows


def _floats(rows, path):
    try:
        return np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from exc


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# genotypes ------------------------------------------------------------------

def write_genotypes(path, X):
    _write(path, X.snp_ids, ([fmt(v) for v in row] for row in X.values))


def is_standardized(values, atol=1e-8):
    mean = values.mean(axis=0)
    sd = values.std(axis=0)
    return bool(np.all(np.abs(mean) < atol) and np.all(np.abs(sd - 1.0) < atol))


def read_genotypes(path, standardize_if_needed=True):
    """Read a genotype TSV; raw dosages are standardized on the way in."""
    _, head, rows = read_table(path)
    if head is None or not rows:
        raise DataError(f"{path}: empty genotype file")
    if any(len(r) != len(head) for r in rows):
        raise DataError(f"{path}: ragged rows (expected {len(head)} columns)")
    values = _floats(rows, path)
    if standardize_if_needed and not is_standardized(values):
        values = standardize(values, head)
    return GenotypeMatrix(values, tuple(head))


# phenotype -------------------------------------------------------------------

def write_phenotype(path, y):
    _write(path, None, ([fmt(v)] for v in y))


def read_phenotype(path):
    _, _, rows = read_table(path, header=False)
    if not rows or any(len(r) != 1 for r in rows):
        raise DataError(f"{path}: phenotype file must hold exactly one column")
    y = _floats(rows, path)[:, 0]
    if not np.all(np.isfinite(y)):
        raise DataError(f"{path}: non-finite phenotype values")
    return y


# simulation truth ------------------------------------------------------------

def write_truth(path, X, truth):
    causal = set(truth.causal_indices)
    meta = {f"variance_{k}": fmt(v) for k, v in truth.variance_report.items()}
    meta["causal_1based"] = ",".join(str(j + 1) for j in truth.causal_indices)
    meta["causal_0based"] = ",".join(str(j) for j in truth.causal_indices)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}\t{value}\n")
        for (a, b), g in zip(truth.interaction_pairs, truth.gamma):
            fh.write(f"# interaction_pair\t{X.snp_ids[a]}\t{X.snp_ids[b]}\t{fmt(g)}\n")
        if truth.omega is not None:
            for k, w in enumerate(truth.omega):
                fh.write(f"# pc_effect\tPC{k + 1}\t{fmt(w)}\n")
        fh.write("snp_id\tbeta\tis_causal\n")
        for j, sid in enumerate(X.snp_ids):
            fh.write(f"{sid}\t{fmt(truth.beta[j])}\t{int(j in causal)}\n")


def read_truth(path):
    """Return ``(snp_ids, beta, is_causal, meta)``."""
    meta, head, rows = read_table(path)
    if head != ["snp_id", "beta", "is_causal"]:
        raise DataError(f"{path}: unexpected truth header {head}")
    ids = tuple(r[0] for r in rows)
    beta = np.array([float(r[1]) for r in rows])
    causal = np.array([r[2] == "1" for r in rows])
    return ids, beta, causal, meta


# centrality reports ----------------------------------------------------------

def write_report(path, report, variable_ids):
    meta = {
        "delta": fmt(report.delta),
        "ess": fmt(report.ess),
        "p_effective": report.p_effective,
        "nullified": ",".join(variable_ids[j] for j in report.nullified) or "-",
        "n_clamped": report.n_clamped,
    }
    for w in report.warnings:
        meta.setdefault("warning", w)
    rows = (
        [variable_ids[idx], fmt(k), fmt(r), str(int(s))]
        for idx, k, r, s in zip(report.indices, report.kld, report.rate, report.significant)
    )
    _write(path, ["variable_id", "kld", "rate", "significant"], rows, meta)


def read_report(path):
    """Return ``(variable_ids, kld, rate, significant, meta)``."""
    meta, head, rows = read_table(path)
    if head != ["variable_id", "kld", "rate", "significant"]:
        raise DataError(f"{path}: unexpected report header {head}")
    ids = tuple(r[0] for r in rows)
    kld = np.array([float(r[1]) for r in rows])
    rate = np.array([float(r[2]) for r in rows])
    sig = np.array([r[3] == "1" for r in rows])
    return ids, kld, rate, sig, {k: v[0] for k, v in meta.items()}


def write_posterior(path, post, variable_ids):
    meta = {"n_draws": post.n_draws, "rank_sigma": post.rank_sigma, "ridge": fmt(post.ridge)}
    rows = ([variable_ids[j], fmt(post.mu[j]), fmt(post.sigma[j, j])] for j in range(post.p))
    _write(path, ["variable_id", "mu", "sigma_diag"], rows, meta)


# scan and power --------------------------------------------------------------

def write_scan(path, scan, variable_ids):
    meta = {"level": fmt(scan.level), "bonferroni_threshold": fmt(scan.bonferroni_threshold)}
    rows = (
        [variable_ids[j], fmt(b), fmt(t), fmt(p)]
        for j, (b, t, p) in enumerate(zip(scan.betas, scan.t_stats, scan.p_values))
    )
    _write(path, ["variable_id", "beta", "t", "p_value"], rows, meta)


def read_scan(path):
    meta, head, rows = read_table(path)
    if head != ["variable_id", "beta", "t", "p_value"]:
        raise DataError(f"{path}: unexpected scan header {head}")
    vals = _floats([r[1:] for r in rows], path)
    return tuple(r[0] for r in rows), vals[:, 0], vals[:, 1], vals[:, 2], {k: v[0] for k, v in meta.items()}


def write_power_curve(path, fpr, tpr, auc, extra=None):
    meta = {"auc": fmt(auc)}
    meta.update(extra or {})
    _write(path, ["fpr", "tpr"], ([fmt(f), fmt(t)] for f, t in zip(fpr, tpr)), meta)


def read_power_curve(path):
    meta, head, rows = read_table(path)
    if head != ["fpr", "tpr"]:
        raise DataError(f"{path}: unexpected power header {head}")
    vals = _floats(rows, path)
    return vals[:, 0], vals[:, 1], float(meta["auc"][0])


def write_rows(path, header, rows, meta=None):
    """Generic writer; floats are formatted with 17 significant digits."""
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return fmt(v)
        return str(v)

    _write(path, header, ([cell(v) for v in row] for row in rows), meta)
