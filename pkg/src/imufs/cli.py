"""Command-line entry point: ``imufs {run,bench,synth}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import DatasetError, chunkify, load_dataset, mask_incomplete
from .impute import ImputeState, impute_chunk
from .metrics import evaluate_selection
from .reference import BENCH_COLUMNS, speedup_benchmark
from .solver import (C_I2MUFS, I2MUFS, DivergenceError, Hyperparams, init_solver,
                     load_checkpoint, process_chunk, rank_features, save_checkpoint,
                     select_features)
from .synth import planted_dataset, write_planted

log = logging.getLogger("imufs")

REPORT_SCHEMA = 1
VARIANT_FLAGS = {"i2mufs": I2MUFS, "c-i2mufs": C_I2MUFS}


class ConfigError(ValueError):
    pass


def parse_seeds(text):
    """``"1..5"`` -> [1, 2, 3, 4, 5]; also accepts ``"3"`` and ``"1,4,7"``."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            a, b = int(a), int(b)
            if b < a:
                raise ConfigError(f"empty seed range {part!r}")
            seeds.extend(range(a, b + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise ConfigError("no seeds given")
    return seeds


def parse_ints(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _hyperparams(args):
    return Hyperparams(
        K=args.k_clusters, lam=args.lam, beta=args.beta, theta=args.theta, eta=args.eta,
        xi=args.xi, max_iters=args.max_iters, rel_tol=args.rel_tol, graph_k=args.graph_k,
        variant=VARIANT_FLAGS[args.variant])


def _threads():
    try:
        return max(1, int(os.environ.get("IMUFS_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------- run

def _replay_imputation(chunks, dims, upto):
    """Filled data of the first ``upto`` chunks (imputation is solver-independent)."""
    state = ImputeState.empty(dims)
    filled = []
    for chunk in chunks[:upto]:
        out, state, _ = impute_chunk(state, chunk, cold_start_weight=1e-9)
        filled.append([np.asarray(x) for x in out.data])
    return filled


def run_seed(ds, hp, seed, args, out):
    """Full pipeline for one seed; returns the per-seed report dict."""
    masked = mask_incomplete(ds, args.ratio_incomplete, seed)
    chunks = chunkify(masked, args.chunks, seed)
    dims = [v.dim for v in ds.views]

    history = {"iterations": [], "converged": [], "alpha": [], "traces": []}
    state = init_solver(ds.views, hp, seed)
    ckpt = Path(args.checkpoint) / f"seed{seed}.json" if args.checkpoint else None
    if ckpt is not None and ckpt.exists():
        state, meta = load_checkpoint(ckpt)
        if meta is None or meta.get("config") != _config_key(args, hp, seed):
            raise ConfigError(f"checkpoint {ckpt} was written with a different configuration")
        history = meta["history"]
        log.info("seed %d: resuming after chunk %d", seed, state.chunks_seen)

    filled = _replay_imputation(chunks, dims, state.chunks_seen)
    for chunk in chunks[state.chunks_seen:]:
        state, rep = process_chunk(state, chunk, hp)
        filled.append([np.asarray(x) for x in rep.workspace.X])
        history["iterations"].append(rep.iterations)
        history["converged"].append(rep.converged)
        history["alpha"].append([float(a) for a in rep.alpha])
        history["traces"].append([float(f) for f in rep.objective_trace])
        if ckpt is not None:
            ckpt.parent.mkdir(parents=True, exist_ok=True)
            save_checkpoint(state, ckpt, meta={"config": _config_key(args, hp, seed),
                                               "history": history})

    # reassemble the imputed views in original instance order
    order = np.concatenate([c.instance_ids for c in chunks])
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    views = [np.hstack([f[v] for f in filled])[:, inv] for v in range(len(dims))]

    ranking = rank_features(state)
    evaluations = []
    for ratio in args.ratio_features:
        selected = select_features(ranking, ratio)
        entry = {"feature_ratio": ratio,
                 "selected_indices": [[int(i) for i in idx] for idx in selected]}
        if ds.labels is not None:
            entry.update(evaluate_selection(views, selected, ds.labels, hp.K,
                                            seed=seed, restarts=args.restarts))
        else:
            entry.update({"nmi": None, "ari": None, "f_measure": None})
        evaluations.append(entry)

    return {
        "schema": REPORT_SCHEMA,
        "variant": hp.variant,
        "seed": seed,
        "iterations": history["iterations"],
        "converged": history["converged"],
        "alpha_trajectory": history["alpha"],
        "evaluations": evaluations,
        "_traces": history["traces"],
    }


def _config_key(args, hp, seed):
    return {"manifest": str(args.manifest), "ratio_incomplete": args.ratio_incomplete,
            "chunks": args.chunks, "seed": seed, "hyperparams": hp.to_dict()}


def _average(reports, hp, args):
    by_ratio = []
    for i, ratio in enumerate(args.ratio_features):
        entry = {"feature_ratio": ratio}
        for key in ("nmi", "ari", "f_measure"):
            values = [r["evaluations"][i][key] for r in reports]
            entry[key] = None if any(v is None for v in values) else float(np.mean(values))
            entry[f"{key}_per_seed"] = values
        by_ratio.append(entry)
    return {
        "schema": REPORT_SCHEMA,
        "variant": hp.variant,
        "seeds": [r["seed"] for r in reports],
        "mean_iterations": float(np.mean([np.mean(r["iterations"]) for r in reports])),
        "evaluations": by_ratio,
        "config": {"manifest": str(args.manifest), "ratio_incomplete": args.ratio_incomplete,
                   "chunks": args.chunks, "ratio_features": args.ratio_features,
                   "hyperparams": hp.to_dict()},
    }


def _dump(obj, path):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _write_trace(traces, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["chunk", "iteration", "objective"])
        for t, trace in enumerate(traces, start=1):
            for i, value in enumerate(trace, start=1):
                w.writerow([t, i, repr(value)])


def cmd_run(args):
    if not 0 <= args.ratio_incomplete < 1:
        raise ConfigError("--ratio-incomplete must be in [0, 1)")
    if args.chunks < 1:
        raise ConfigError("--chunks must be >= 1")
    args.ratio_features = args.ratio_features or [0.4]
    for r in args.ratio_features:
        if not 0 < r <= 1:
            raise ConfigError("--ratio-features must be in (0, 1]")
    seeds = parse_seeds(args.seeds)
    hp = _hyperparams(args)
    ds = load_dataset(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with ThreadPoolExecutor(max_workers=min(_threads(), len(seeds))) as pool:
        reports = list(pool.map(lambda s: run_seed(ds, hp, s, args, out), seeds))
    for rep in reports:
        _write_trace(rep.pop("_traces"), out / f"trace_seed{rep['seed']}.csv")
        _dump(rep, out / f"report_seed{rep['seed']}.json")
    _dump(_average(reports, hp, args), out / "report_average.json")
    print(f"wrote {len(reports)} seed reports and report_average.json to {out}")
    return 0


# ---------------------------------------------------------------- bench

def cmd_bench(args):
    hp = _hyperparams(args)
    if args.manifest:
        ds = load_dataset(args.manifest)
        name = Path(args.manifest).stem
    else:
        ds, _ = planted_dataset(args.n, parse_ints(args.dims), hp.K, parse_ints(args.noise), args.seed)
        name = f"synthetic-N{args.n}"
    if args.ratio_incomplete > 0:
        ds = mask_incomplete(ds, args.ratio_incomplete, args.seed)
    rows = speedup_benchmark(ds, hp, args.seed, n_chunks=args.chunks, name=name)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bench.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({**row, "elapsed_ms": f"{row['elapsed_ms']:.3f}", "IncS": f"{row['IncS']:.4f}"})
    for row in rows[::2]:
        print(f"{row['workload']:<32} IncS={row['IncS']:.2f}")
    return 0


# ---------------------------------------------------------------- synth

def cmd_synth(args):
    dims = parse_ints(args.dims)
    noise = parse_ints(args.noise)
    if len(noise) == 1:
        noise = noise * len(dims)
    if args.n < 1 or not dims or args.k_clusters < 1:
        raise ConfigError("invalid synthetic sizes")
    path = write_planted(args.out, args.n, dims, args.k_clusters, noise, args.seed)
    print(path)
    return 0


# ---------------------------------------------------------------- parser

def _add_solver_flags(p):
    p.add_argument("--k-clusters", type=int, default=3)
    p.add_argument("--lambda", dest="lam", type=float, default=3.0)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--xi", type=float, default=1e5)
    p.add_argument("--graph-k", type=int, default=5)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--rel-tol", type=float, default=1e-5)
    p.add_argument("--variant", choices=sorted(VARIANT_FLAGS), default="i2mufs")


def build_parser():
    parser = argparse.ArgumentParser(prog="imufs", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="stream-solve, select features and evaluate")
    run.add_argument("--manifest", required=True)
    run.add_argument("--ratio-incomplete", type=float, default=0.5)
    run.add_argument("--chunks", type=int, default=5)
    run.add_argument("--ratio-features", type=float, action="append")
    run.add_argument("--seeds", default="1..1")
    run.add_argument("--restarts", type=int, default=10, help="k-means restarts for evaluation")
    run.add_argument("--out", default="imufs-out")
    run.add_argument("--checkpoint", help="directory for per-seed resumable checkpoints")
    _add_solver_flags(run)
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="incremental vs recompute-from-scratch timing")
    bench.add_argument("--manifest")
    bench.add_argument("--n", type=int, default=500)
    bench.add_argument("--dims", default="20,20")
    bench.add_argument("--noise", default="10,10")
    bench.add_argument("--ratio-incomplete", type=float, default=0.5)
    bench.add_argument("--chunks", type=int, default=5)
    bench.add_argument("--seed", type=int, default=1)
    bench.add_argument("--out", default="imufs-bench")
    _add_solver_flags(bench)
    bench.set_defaults(func=cmd_bench)

    synth = sub.add_parser("synth", help="write a planted-feature synthetic dataset")
    synth.add_argument("--n", type=int, default=300)
    synth.add_argument("--dims", default="20,20")
    synth.add_argument("--k-clusters", type=int, default=3)
    synth.add_argument("--noise", default="10")
    synth.add_argument("--seed", type=int, default=1)
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DatasetError, DivergenceError, ValueError, OSError) as exc:
        print(f"imufs {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
