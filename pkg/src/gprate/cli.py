"""Command-line interface: ``gprate {simulate,rate,scan,power,replay}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__, _accel, baseline, gp, kernel, pipeline, projection, rate, simdata, tsv
from .errors import DataError, NumericalError

log = logging.getLogger("gprate")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# argument types ---------------------------------------------------------------

def _int_at_least(lo):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {v}")
        return v

    return parse


def _float_in(lo, hi, lo_open=False, hi_open=False):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
        low_ok = v > lo if lo_open else v >= lo
        high_ok = v < hi if hi_open else v <= hi
        if not (low_ok and high_ok and np.isfinite(v)):
            lb = "(" if lo_open else "["
            rb = ")" if hi_open else "]"
            raise argparse.ArgumentTypeError(f"must lie in {lb}{lo}, {hi}{rb}, got {v}")
        return v

    return parse


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


_positive = _float_in(0.0, np.inf, lo_open=True, hi_open=True)
_nonneg = _float_in(0.0, np.inf, hi_open=True)


# manifest ---------------------------------------------------------------------

def _write_manifest(out_dir, command, argv, params, inputs, seed, timings, extra=None):
    manifest = {
        "command": command,
        "argv": list(argv),
        "parameters": params,
        "inputs": {path: tsv.sha256(path) for path in inputs},
        "seed": seed,
        "version": __version__,
        "backend": _accel.active_backend(),
        "timings_seconds": timings,
    }
    manifest.update(extra or {})
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _params(args):
    return {k: v for k, v in vars(args).items() if k not in ("func",)}


def _prepare_out(path):
    os.makedirs(path, exist_ok=True)
    return path


# simulate ---------------------------------------------------------------------

def cmd_simulate(args, argv):
    timings = {}
    t0 = time.perf_counter()
    if args.freq_lo >= args.freq_hi:
        raise UsageError("argument --freq-hi: must exceed --freq-lo")
    if args.structured:
        X = simdata.simulate_structured_genotypes(
            args.n, args.p, args.subpops, args.fst, (args.freq_lo, args.freq_hi), seed=args.seed
        )
    else:
        X = simdata.simulate_genotypes(args.n, args.p, (args.freq_lo, args.freq_hi), seed=args.seed)
    timings["genotypes"] = time.perf_counter() - t0

    causal1 = args.causal or []
    bad = [c for c in causal1 if not 1 <= c <= args.p]
    if bad:
        raise UsageError(f"argument --causal: indices {bad} outside 1..{args.p}")
    if len(set(causal1)) != len(causal1):
        raise UsageError("argument --causal: duplicate indices")
    causal0 = tuple(c - 1 for c in causal1)
    if args.h2 > 0 and not causal0:
        raise UsageError("argument --causal: required when --h2 > 0")
    if args.rho < 1 and args.h2 > 0 and len(causal0) < 2:
        raise UsageError("argument --rho: interactions need at least two --causal indices")
    groups = None
    if args.groups is not None:
        if len(args.groups) != 2 or sum(args.groups) != len(causal0) or min(args.groups) < 1:
            raise UsageError(f"argument --groups: sizes must be two positive integers summing to {len(causal0)}")
        groups = tuple(args.groups)
    if args.model == "stratified":
        if args.pcs < 1:
            raise UsageError("argument --pcs: stratified model needs at least one PC")
        if args.pc_var > 1 - args.h2:
            raise UsageError(f"argument --pc-var: must not exceed 1 - h2 = {1 - args.h2}")

    t0 = time.perf_counter()
    cfg = simdata.SimConfig(
        n=args.n,
        p=args.p,
        causal_indices=causal0,
        h2=args.h2,
        rho=args.rho,
        model=args.model,
        n_pcs=args.pcs if args.model == "stratified" else 0,
        pc_variance_fraction=args.pc_var if args.model == "stratified" else 0.0,
        group_split=groups,
        fixed_beta=args.fixed_beta,
        seed=args.seed + 1,
    )
    truth = simdata.simulate_phenotype(X, cfg)
    timings["phenotype"] = time.perf_counter() - t0

    out = _prepare_out(args.out)
    tsv.write_genotypes(os.path.join(out, "genotypes.tsv"), X)
    tsv.write_phenotype(os.path.join(out, "phenotype.tsv"), truth.y)
    tsv.write_truth(os.path.join(out, "truth.tsv"), X, truth)
    _write_manifest(
        out, "simulate", argv, _params(args), [], args.seed, timings,
        {
            "causal_1based": list(causal1),
            "causal_0based": list(causal0),
            "variance_report": truth.variance_report,
        },
    )
    log.info("wrote simulation to %s", out)
    return EXIT_OK


# rate -------------------------------------------------------------------------

def _load_inputs(args):
    X = tsv.read_genotypes(args.genotypes)
    y = tsv.read_phenotype(args.phenotype)
    if y.shape[0] != X.n_samples:
        raise DataError(f"phenotype has {y.shape[0]} rows, genotypes have {X.n_samples} samples")
    return X, y


def cmd_rate(args, argv):
    X, y = _load_inputs(args)
    if args.burn_in >= args.iter:
        raise UsageError("argument --burn-in: must be smaller than --iter")
    spec = kernel.KernelSpec(args.kernel, args.bandwidth, args.jitter)
    cfg = gp.GpConfig(
        n_iter=args.iter, burn_in=args.burn_in, thin=args.thin, a=args.a, b=args.b,
        seed=args.seed, method=args.method,
    )
    nullify0 = None
    if args.nullify:
        bad = [v for v in args.nullify if not 1 <= v <= X.n_snps]
        if bad:
            raise UsageError(f"argument --nullify: indices {bad} outside 1..{X.n_snps}")
        if len(args.nullify) > X.n_snps - 2:
            raise UsageError(f"argument --nullify: at most {X.n_snps - 2} variables")
        nullify0 = [v - 1 for v in args.nullify]
    if args.cascade and args.cascade > X.n_snps - 2:
        raise UsageError(f"argument --cascade: at most {X.n_snps - 2} steps for p={X.n_snps}")

    fit = pipeline.fit_rate(X, y, spec, cfg, tol=args.tol, ridge=args.ridge)
    timings = dict(fit.timings)
    out = _prepare_out(args.out)
    ids = X.snp_ids
    tsv.write_report(os.path.join(out, "rate.tsv"), fit.report, ids)
    if args.dump_posterior:
        tsv.write_posterior(os.path.join(out, "posterior.tsv"), fit.posterior, ids)
    if args.dump_draws:
        gp.write_draws(os.path.join(out, "draws.tsv"), fit.draws)

    t0 = time.perf_counter()
    if args.cascade:
        for k, rep in enumerate(rate.centrality_cascade(fit.posterior, args.cascade, args.stop_delta), 1):
            tsv.write_report(os.path.join(out, f"cascade_step{k}.tsv"), rep, ids)
    if nullify0:
        for k, rep in enumerate(rate.nullify_sequence(fit.posterior, nullify0), 1):
            tsv.write_report(os.path.join(out, f"nullify_step{k}.tsv"), rep, ids)
    timings["cascade"] = time.perf_counter() - t0

    _write_manifest(
        out, "rate", argv, _params(args), [args.genotypes, args.phenotype], args.seed, timings,
        {
            "bandwidth": fit.covariance.bandwidth,
            "n_draws": fit.posterior.n_draws,
            "rank_sigma": fit.posterior.rank_sigma,
            "ridge_added": fit.posterior.ridge,
        },
    )
    sig = [ids[fit.report.indices[i]] for i in np.flatnonzero(fit.report.significant)]
    print(f"delta={fit.report.delta:.4f} ess={fit.report.ess:.2f}% significant={','.join(sig) or '-'}")
    return EXIT_OK


# scan -------------------------------------------------------------------------

def cmd_scan(args, argv):
    t0 = time.perf_counter()
    X, y = _load_inputs(args)
    result = baseline.scanone(X, y, level=args.level)
    out = _prepare_out(args.out)
    tsv.write_scan(os.path.join(out, "scan.tsv"), result, X.snp_ids)
    _write_manifest(
        out, "scan", argv, _params(args), [args.genotypes, args.phenotype], None,
        {"scan": time.perf_counter() - t0},
    )
    print(f"bonferroni={result.bonferroni_threshold:.3g} significant={int(result.significant.sum())}")
    return EXIT_OK


# power ------------------------------------------------------------------------

def cmd_power(args, argv):
    if args.burn_in >= args.iter:
        raise UsageError("argument --burn-in: must be smaller than --iter")
    groups = tuple(args.groups) if args.groups else None
    if groups is not None and (len(groups) != 2 or sum(groups) != args.n_causal):
        raise UsageError(f"argument --groups: two sizes summing to --n-causal={args.n_causal}")
    if args.n_causal >= args.p:
        raise UsageError("argument --n-causal: must be smaller than --p")
    design = pipeline.PowerDesign(
        scenario=args.scenario, n=args.n, p=args.p, n_causal=args.n_causal, group_split=groups,
        h2=args.h2, rho=args.rho, pc_variance_fraction=args.pc_var, n_subpops=args.subpops,
        fst=args.fst, n_iter=args.iter, burn_in=args.burn_in, a=args.a, b=args.b,
    )
    seeds = [args.seed + i for i in range(args.replicates)]
    workers = args.workers or _accel.num_threads()
    t0 = time.perf_counter()
    results, failures = pipeline.run_power(design, seeds, workers=workers)
    timings = {"replicates": time.perf_counter() - t0}
    out = _prepare_out(args.out)

    if results:
        summary = pipeline.summarize_power(results)
        for method, label in (("rate", "rate"), ("scan", "scanone")):
            grid, tpr = pipeline.mean_curve([getattr(r, f"{method}_curve") for r in results])
            s = summary[method]
            tsv.write_power_curve(
                os.path.join(out, f"power_{label}.tsv"), grid, tpr, s["mean_auc"],
                {"auc_se": tsv.fmt(s["se_auc"]), "replicates": len(results)},
            )
        tsv.write_rows(
            os.path.join(out, "replicates.tsv"),
            ["seed", "rate_auc", "scanone_auc", "rate_tpr", "rate_fpr", "scanone_tpr", "scanone_fpr", "delta", "ess"],
            (
                [r.seed, r.rate_curve.auc, r.scan_curve.auc, *r.rate_threshold, *r.scan_threshold, r.delta, r.ess]
                for r in results
            ),
        )
        tsv.write_rows(
            os.path.join(out, "summary.tsv"),
            ["method", "mean_auc", "se_auc", "mean_tpr", "mean_fpr"],
            (
                [label, summary[m]["mean_auc"], summary[m]["se_auc"], summary[m]["mean_tpr"], summary[m]["mean_fpr"]]
                for m, label in (("rate", "rate"), ("scan", "scanone"))
            ),
            {"rate_tpr_wins": summary["rate_tpr_wins"], "replicates": len(results), "failures": len(failures)},
        )
        print(
            f"rate auc={summary['rate']['mean_auc']:.3f} scanone auc={summary['scan']['mean_auc']:.3f} "
            f"rate tpr={summary['rate']['mean_tpr']:.3f} scanone tpr={summary['scan']['mean_tpr']:.3f}"
        )
    _write_manifest(
        out, "power", argv, _params(args), [], args.seed, timings,
        {"seeds": seeds, "failures": [[s, repr(e)] for s, e in failures]},
    )
    if failures and len(failures) > 0.1 * len(seeds):
        print(f"{len(failures)} of {len(seeds)} replicates failed", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


# replay -----------------------------------------------------------------------

def cmd_replay(args, argv):
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
        original = list(manifest["argv"])
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read manifest {args.manifest}: {exc}") from exc
    if args.out:
        if "--out" in original:
            original[original.index("--out") + 1] = args.out
        else:
            original += ["--out", args.out]
    return main(original)


# parser -----------------------------------------------------------------------

def _add_gp_flags(p):
    p.add_argument("--iter", type=_int_at_least(1), default=10_000, help="total Gibbs iterations")
    p.add_argument("--burn-in", type=_int_at_least(0), default=1_000)
    p.add_argument("--a", type=_positive, default=5.0, help="Scale-Inv-chi2 degrees of freedom")
    p.add_argument("--b", type=_positive, default=0.4, help="Scale-Inv-chi2 scale")


def build_parser():
    parser = _Parser(prog="gprate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate genotypes, phenotype and truth files")
    s.add_argument("--n", type=_int_at_least(2), required=True)
    s.add_argument("--p", type=_int_at_least(2), required=True)
    s.add_argument("--causal", type=_int_list, help="1-based causal SNP indices, e.g. 23,24,25")
    s.add_argument("--h2", type=_float_in(0.0, 1.0, hi_open=True), default=0.6)
    s.add_argument("--rho", type=_float_in(0.0, 1.0, lo_open=True), default=1.0)
    s.add_argument("--model", choices=["standard", "stratified"], default="standard")
    s.add_argument("--pcs", type=_int_at_least(0), default=5)
    s.add_argument("--pc-var", type=_float_in(0.0, 1.0), default=0.3)
    s.add_argument("--groups", type=_int_list, help="causal group sizes, e.g. 5,25")
    s.add_argument("--fixed-beta", type=float, default=None, help="use this additive effect for every causal SNP")
    s.add_argument("--seed", type=_int_at_least(0), default=0)
    s.add_argument("--structured", action="store_true", help="Balding-Nichols structured genotypes")
    s.add_argument("--subpops", type=_int_at_least(2), default=3)
    s.add_argument("--fst", type=_float_in(0.0, 0.5, lo_open=True, hi_open=True), default=0.1)
    s.add_argument("--freq-lo", type=_float_in(0.0, 1.0, lo_open=True, hi_open=True), default=0.05)
    s.add_argument("--freq-hi", type=_float_in(0.0, 1.0, lo_open=True, hi_open=True), default=0.5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("rate", help="fit the GP and compute RATE centrality")
    r.add_argument("--genotypes", required=True)
    r.add_argument("--phenotype", required=True)
    r.add_argument("--kernel", choices=["gaussian", "linear"], default="gaussian")
    r.add_argument("--bandwidth", type=_positive, default=None, help="Gaussian bandwidth (default: median heuristic)")
    r.add_argument("--jitter", type=_nonneg, default=kernel.DEFAULT_JITTER)
    _add_gp_flags(r)
    r.add_argument("--thin", type=_int_at_least(1), default=1)
    r.add_argument("--method", choices=["eigen", "cholesky"], default="eigen")
    r.add_argument("--seed", type=_int_at_least(0), default=0)
    r.add_argument("--tol", type=_positive, default=projection.DEFAULT_TOL, help="relative singular-value cutoff")
    r.add_argument("--ridge", type=_nonneg, default=projection.DEFAULT_RIDGE, help="covariance stabilization")
    r.add_argument("--cascade", type=_int_at_least(0), default=0, help="nullify the top variable this many times")
    r.add_argument("--stop-delta", type=_nonneg, default=rate.DEFAULT_STOP_DELTA)
    r.add_argument("--nullify", type=_int_list, help="1-based variables to nullify in order")
    r.add_argument("--dump-posterior", action="store_true")
    r.add_argument("--dump-draws", action="store_true")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_rate)

    c = sub.add_parser("scan", help="single-SNP regression scan")
    c.add_argument("--genotypes", required=True)
    c.add_argument("--phenotype", required=True)
    c.add_argument("--level", type=_float_in(0.0, 1.0, lo_open=True, hi_open=True), default=baseline.DEFAULT_LEVEL)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_scan)

    w = sub.add_parser("power", help="replicate power comparison of RATE and SCANONE")
    w.add_argument("--scenario", choices=sorted(pipeline.SCENARIOS), default="II")
    w.add_argument("--replicates", type=_int_at_least(1), default=20)
    w.add_argument("--seed", type=_int_at_least(0), default=0, help="seed of the first replicate")
    w.add_argument("--n", type=_int_at_least(3), default=500)
    w.add_argument("--p", type=_int_at_least(2), default=200)
    w.add_argument("--n-causal", type=_int_at_least(2), default=30)
    w.add_argument("--groups", type=_int_list, default=[5, 25])
    w.add_argument("--h2", type=_float_in(0.0, 1.0, lo_open=True, hi_open=True), default=0.3)
    w.add_argument("--rho", type=_float_in(0.0, 1.0, lo_open=True), default=1.0)
    w.add_argument("--pc-var", type=_float_in(0.0, 1.0), default=0.3)
    w.add_argument("--subpops", type=_int_at_least(2), default=3)
    w.add_argument("--fst", type=_float_in(0.0, 0.5, lo_open=True, hi_open=True), default=0.1)
    _add_gp_flags(w)
    w.add_argument("--workers", type=_int_at_least(1), default=None, help="default: $GPRATE_NUM_THREADS or 1")
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_power)

    m = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    m.add_argument("manifest")
    m.add_argument("--out", default=None, help="write to this directory instead")
    m.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"gprate {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"gprate {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DataError as exc:
        print(f"gprate {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
