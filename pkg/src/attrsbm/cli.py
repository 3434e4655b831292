"""Command-line entry point: ``attrsbm <subcommand> ...``.

Every subcommand writes its data files plus ``metadata.json`` (config,
seeds, version, timing) into ``--out``. Exit codes: 0 success, 2 config
error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import secrets
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, NumericalError
from .graph import (align, correlation_network, khop_label_counts, load_edge_list, read_attributes,
                    read_labels, read_partition, save_edge_list, write_attributes, write_partition)
from .metrics import community_entropy, nmi
from .model import ATTRIBUTED, CLASSIC, ATTRIBUTES_ONLY, FitConfig, dumps, fit, select_k
from .predict import CFConfig, LinkPredConfig, collab_experiment, link_prediction_experiment
from .stats import pca_project, standardize
from .synth import DEFAULT_P_IN_GRID, SyntheticSpec, detectability_sweep, pout_for_mean_degree

logger = logging.getLogger("attrsbm")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbelow(2**31 - 1)
        logger.info("no --seed given, using %d", args.seed)
    return args.seed


def _fit_config(args, seed=None) -> FitConfig:
    return FitConfig(tol=args.tol, max_iter=args.max_iter, restarts=args.restarts,
                     seed=args.seed if seed is None else seed, init=getattr(args, "init", "auto"),
                     smoothing=getattr(args, "smoothing", 0.1), jobs=args.jobs)


def _load_inputs(args, need_attributes=True):
    names = X = None
    if getattr(args, "attributes", None):
        names, _, X = read_attributes(args.attributes)
    elif need_attributes:
        raise ConfigError("--attributes is required")
    g = load_edge_list(args.edges, weighted=args.weighted, nodes=names)
    return g, X


def _parse_k_range(text):
    if ":" in text:
        lo, hi = (int(v) for v in text.split(":"))
        return list(range(lo, hi + 1))
    return [int(v) for v in text.split(",")]


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


# --------------------------------------------------------------------------
# subcommands

def cmd_generate(args, out: Path):
    seed = _seed(args)
    p_out = args.p_out
    if args.mean_degree is not None:
        p_out = pout_for_mean_degree(args.p_in, args.n, args.k, args.mean_degree)
    spec = SyntheticSpec(N=args.n, K=args.k, p_in=args.p_in, p_out=p_out, p=args.dim,
                         cov_scale=args.cov_scale, seed=seed,
                         community_sizes=_parse_k_range(args.sizes) if args.sizes else None)
    g, X, z = spec.sample()
    names = g.names()
    save_edge_list(g, out / "edges.txt")
    if X is not None:
        write_attributes(out / "attributes.csv", names, [f"x{k}" for k in range(X.shape[1])], X)
    write_partition(out / "partition.csv", names, z)
    return {"seed": seed, "p_out": p_out, "edges": g.n_edges}


def _summary(result, extra=None):
    lines = [f"mode: {result.mode}", f"K: {result.K}", f"loglik bound: {result.loglik!r}",
             f"iterations: {result.iterations}", f"converged: {result.converged}",
             "community sizes: " + " ".join(str(int(s)) for s in result.community_sizes())]
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    return "\n".join(lines) + "\n"


def cmd_fit(args, out: Path):
    seed = _seed(args)
    g, X = _load_inputs(args, need_attributes=args.mode in (ATTRIBUTED, ATTRIBUTES_ONLY))
    if args.mode == CLASSIC:
        X = None
    config = _fit_config(args, seed)
    info = {"seed": seed}
    if args.k_range:
        K, result, scores = select_k(g, X, _parse_k_range(args.k_range), config, args.mode)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["K", "icl"])
        for k in sorted(scores):
            w.writerow([k, repr(float(scores[k]))])
        _write(out / "k_scores.csv", buf.getvalue())
        info["chosen_K"] = K
    elif args.k:
        result = fit(g, X, args.k, config, args.mode)
    else:
        raise ConfigError("one of --k or --k-range is required")
    _write(out / "fit.json", result.to_json())
    write_partition(out / "partition.csv", g.names(), result.partition)
    extra = {}
    if args.truth:
        tnames, truth = read_partition(args.truth)
        score = nmi(align(tnames, g.names(), truth), result.partition)
        extra["nmi_vs_truth"] = repr(score)
        info["nmi_vs_truth"] = score
    _write(out / "summary.txt", _summary(result, extra))
    return info


def cmd_sweep(args, out: Path):
    seed = _seed(args)
    base = SyntheticSpec(N=args.n, K=args.k, p=args.dim, cov_scale=args.cov_scale, seed=seed)
    grid = _float_list(args.p_in_grid) if args.p_in_grid else list(DEFAULT_P_IN_GRID)
    result = detectability_sweep(base, grid, args.mean_degree, args.replicates, seed,
                                 _fit_config(args, seed), args.jobs)
    result.to_csv(out / "sweep.csv")
    return {"seed": seed, **result.metadata}


def cmd_linkpred(args, out: Path):
    seed = _seed(args)
    g, X = _load_inputs(args)
    cfg = LinkPredConfig(K=args.k, samples=args.samples, positives=args.positives, negatives=args.negatives,
                         seed=seed, knn=args.knn, vote=args.vote, protocol=args.protocol,
                         fit=_fit_config(args, seed), jobs=args.jobs)
    result = link_prediction_experiment(g, X, cfg)
    names = g.names()
    _write(out / "linkpred.csv", result.to_csv(names))
    _write(out / "linkpred_summary.json", dumps(result.summary()))
    for method, roc in result.roc.items():
        _write(out / f"roc_{method}.csv", roc.to_csv())
    return {"seed": seed, "auc": result.auc, "protocol": args.protocol}


def cmd_collabfilter(args, out: Path):
    seed = _seed(args)
    g, X = _load_inputs(args)
    cfg = CFConfig(K=args.k, k_neighbors=args.k_neighbors, fit=_fit_config(args, seed), jobs=args.jobs)
    result = collab_experiment(g, X, cfg)
    _write(out / "collab.csv", result.to_csv(g.names()))
    _write(out / "collab_summary.json", dumps({"mean_relative_error": result.means(),
                                               "skipped": {g.names()[n]: r for n, r in result.skipped().items()}}))
    return {"seed": seed, "means": result.means()}


def cmd_prep(args, out: Path):
    info = {}
    if not (args.corr_network is not None or args.pca or args.standardize or args.khop_attrs):
        raise ConfigError("nothing to do: pass --corr-network, --pca, --standardize or --khop-attrs")
    if args.khop_attrs:
        if not (args.edges and args.labels):
            raise ConfigError("--khop-attrs needs --edges and --labels")
        g = load_edge_list(args.edges, weighted=args.weighted)
        lnames, labels = read_labels(args.labels)
        labels = align(lnames, g.names(), labels)
        X, classes = khop_label_counts(g, labels, args.khop_attrs)
        names, columns = g.names(), [f"count_{c}" for c in classes]
    else:
        if not args.raw:
            raise ConfigError("--raw is required unless --khop-attrs is used")
        names, columns, X = read_attributes(args.raw)
        if args.corr_network is not None:
            g = correlation_network(X, args.corr_network, names)
            save_edge_list(g, out / "edges.txt")
            info["edges"] = g.n_edges
    derived = X
    steps = []
    if args.pca:
        steps.append("pca")
    if args.standardize:
        steps.insert(0 if args.order == "standardize-first" else len(steps), "standardize")
    for step in steps:
        if step == "pca":
            derived = pca_project(derived, args.pca)
            columns = [f"pc{k + 1}" for k in range(args.pca)]
        else:
            derived = standardize(derived, columns)
    info["steps"] = steps
    if args.pca or args.standardize or args.khop_attrs:
        write_attributes(out / "attributes.csv", names, columns, derived)
        info["attribute_shape"] = list(np.shape(derived))
    info["nodes"] = len(names)
    return info


def cmd_eval(args, out: Path):
    pnames, part = read_partition(args.partition)
    result = {}
    if args.reference:
        rnames, ref = read_partition(args.reference)
        result["nmi"] = nmi(part, align(rnames, pnames, ref), args.normalization)
        result["normalization"] = args.normalization
    if args.labels:
        lnames, labels = read_labels(args.labels)
        labels = align(lnames, pnames, labels)
        ent, empty = community_entropy(part, labels)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["community", "size", "entropy", "empty"])
        sizes = np.bincount(part, minlength=len(ent))
        for c, (e, flag) in enumerate(zip(ent, empty)):
            w.writerow([c, int(sizes[c]), repr(float(e)), int(flag)])
        _write(out / "entropy.csv", buf.getvalue())
        result["entropy"] = ent.tolist()
    if not result:
        raise ConfigError("pass --reference and/or --labels")
    _write(out / "eval.json", dumps(result))
    return result


# --------------------------------------------------------------------------
# parser

def _common(p, fitting=True):
    p.add_argument("--seed", type=int, default=None, help="random seed (auto-generated and recorded if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    if fitting:
        p.add_argument("--tol", type=float, default=1e-6, help="absolute bound change for convergence")
        p.add_argument("--max-iter", type=int, default=200)
        p.add_argument("--restarts", type=int, default=5)
        p.add_argument("--init", default="auto", choices=["auto", "louvain", "kmeans", "random"])
        p.add_argument("--smoothing", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attrsbm", description="Stochastic block models with Gaussian node attributes.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a planted attributed network")
    _common(p, fitting=False)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--p-in", type=float, default=0.25)
    p.add_argument("--p-out", type=float, default=0.10)
    p.add_argument("--mean-degree", type=float, default=None, help="derive p_out from a target mean degree")
    p.add_argument("--dim", type=int, default=8, help="attribute dimension (0 for none)")
    p.add_argument("--cov-scale", type=float, default=1.25)
    p.add_argument("--sizes", default=None, help="comma-separated community sizes")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit the classic, attributed or attributes-only model")
    _common(p)
    p.add_argument("--edges", required=True)
    p.add_argument("--attributes", default=None)
    p.add_argument("--weighted", action="store_true", help="edge list carries a weight column (ignored by the model)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--k-range", default=None, help="e.g. 1:8 or 2,3,4; selects K by ICL")
    p.add_argument("--mode", default=None, choices=[ATTRIBUTED, CLASSIC, ATTRIBUTES_ONLY])
    p.add_argument("--truth", default=None, help="partition CSV to score against")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="detectability sweep over p_in at fixed mean degree")
    _common(p)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--cov-scale", type=float, default=1.25)
    p.add_argument("--mean-degree", type=float, default=20.0)
    p.add_argument("--p-in-grid", default=None, help="comma-separated p_in values")
    p.add_argument("--replicates", type=int, default=10)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("linkpred", help="held-out link prediction")
    _common(p)
    p.add_argument("--edges", required=True)
    p.add_argument("--attributes", required=True)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--positives", type=int, default=25)
    p.add_argument("--negatives", type=int, default=25)
    p.add_argument("--knn", type=int, default=3)
    p.add_argument("--vote", default="knn", choices=["knn", "direct"])
    p.add_argument("--protocol", default="per-dyad", choices=["per-dyad", "fast"])
    p.set_defaults(func=cmd_linkpred)

    p = sub.add_parser("collabfilter", help="leave-one-out attribute prediction")
    _common(p)
    p.add_argument("--edges", required=True)
    p.add_argument("--attributes", required=True)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--k-neighbors", type=int, default=None)
    p.set_defaults(func=cmd_collabfilter)

    p = sub.add_parser("prep", help="build networks and attributes from raw tables")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p.add_argument("--raw", default=None, help="CSV with one row per node")
    p.add_argument("--corr-network", type=float, default=None, metavar="T",
                   help="write a Pearson-correlation network thresholded at T")
    p.add_argument("--pca", type=int, default=None, metavar="D")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--order", default="pca-first", choices=["pca-first", "standardize-first"],
                   help="order of --pca and --standardize when both are given")
    p.add_argument("--khop-attrs", type=int, default=None, metavar="H")
    p.add_argument("--edges", default=None)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--labels", default=None)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("eval", help="NMI between partitions and per-community label entropy")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p.add_argument("--partition", required=True)
    p.add_argument("--reference", default=None)
    p.add_argument("--labels", default=None)
    p.add_argument("--normalization", default="arithmetic", choices=["arithmetic", "geometric", "max", "min"])
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    config = {k: v for k, v in vars(args).items() if k != "func"}
    try:
        out.mkdir(parents=True, exist_ok=True)
        info = args.func(args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    config["seed"] = args.seed
    meta = {
        "command": args.command,
        "config": config,
        "seed": args.seed,
        "version": __version__,
        "started": started.isoformat(),
        "duration_seconds": time.perf_counter() - t0,
        "result": info,
    }
    _write(out / "metadata.json", json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
