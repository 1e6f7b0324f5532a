"""Command-line interface: ``dif <subcommand> ...``.

Exit codes
----------
0 success; 1 other library error; 2 usage error; 3 parse/input error;
4 configuration error; 5 dimension mismatch; 6 metric undefined;
7 verification failed; 8 bad model file; 9 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import experiments
from .baselines import verify_eif_reduction, verify_iforest_reduction
from .config import RunConfig, load_config, parse_value
from .data import BLOB_KINDS, DataMatrix, gen_blobs, gen_ring, load_csv, score_map_grid
from .errors import EXIT_CODES, ConfigError, DifError, InputError, ParseError, ShapeError, VerificationError
from .metrics import aii, auc_pr, auc_roc
from .model_io import load_model, save_model
from .models import DeepIsolationForest
from .representation import forward_ensemble
from .scoring import path_score, score_dataset

THREADS_ENV = "DIF_THREADS"
SCORE_COLUMNS = ("object_id", "score", "mean_path", "mean_deviation")


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def _config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("configuration (flags override --config)")
    g.add_argument("--config", help="flat 'key = value' configuration file")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or all cores)")
    g.add_argument("--algo", choices=("dif", "iforest", "eif"))
    g.add_argument("--r", type=int, help="number of representations")
    g.add_argument("--t", type=int, help="trees per representation")
    g.add_argument("--n", type=int, help="subsample size per tree")
    g.add_argument("--depth", help="depth limit (integer or 'auto')")
    g.add_argument("--hidden", help="comma-separated hidden widths, or 'auto'")
    g.add_argument("--out-dim", type=int, help="representation dimensionality")
    g.add_argument("--activation", choices=("tanh", "relu", "leaky_relu"))
    g.add_argument("--init", choices=("normal", "uniform"))
    g.add_argument("--batch", type=int, help="mini-batch size of the forward pass")
    g.add_argument("--mode", choices=("deas", "path-only"))
    g.add_argument("--trees", type=int, help="number of trees of the baselines")
    g.add_argument("--label-col", help="name of the 0/1 label column (excluded from features)")
    g.add_argument("--out", help="output path (default: stdout)")


def resolve_config(args) -> RunConfig:
    overrides = dict(algorithm=args.algo, seed=args.seed, r=args.r, t=args.t, n=args.n,
                     out_dim=args.out_dim, activation=args.activation, init=args.init,
                     batch=args.batch, mode=args.mode, trees=args.trees)
    reset = {}
    for key in ("depth", "hidden"):
        text = getattr(args, key)
        if text is not None:
            value = parse_value(key, text)
            # an explicit 'auto' on the command line resets a value set in the file
            if value is None:
                reset[key] = None
            else:
                overrides[key] = value
    cfg = load_config(args.config, overrides)
    return replace(cfg, **reset) if reset else cfg


def _threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        return args.threads
    return default_threads()


def _emit(text: str, out: str | None):
    """Write the fully rendered output at once so failures leave no partial file."""
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load(path, label_col) -> DataMatrix:
    data = load_csv(path, label_column=label_col)
    if data.n_rows == 0:
        raise InputError(f"{path}: no data rows")
    return data


# ---------------------------------------------------------------- fit / score


def cmd_fit(args) -> int:
    cfg = resolve_config(args)
    if not args.out:
        raise ConfigError("fit needs --out for the model file")
    data = _load(args.train_csv, args.label_col)
    model = cfg.make_detector(_threads(args)).fit(data)
    save_model(args.out, model, dict(config_hash=cfg.config_hash(), seed=cfg.seed,
                                     run_config=asdict(cfg), feature_names=list(data.feature_names or ())))
    n_trees = len(model.forest_.trees) if isinstance(model, DeepIsolationForest) else model.n_trees
    sys.stdout.write(_json(dict(model=args.out, algorithm=cfg.algorithm, n_trees=n_trees,
                                config_hash=cfg.config_hash(), seed=cfg.seed)))
    return 0


def score_model(model, data: DataMatrix, mode: str, threads: int = 1) -> dict:
    """Score with a loaded model; returns ``dict(score, mean_path, mean_deviation)`` arrays."""
    if isinstance(model, DeepIsolationForest):
        res = score_dataset(model.forest_, data, mode, threads)
        return dict(score=res.scores, mean_path=res.mean_path, mean_deviation=res.mean_deviation)
    if data.n_cols != model.n_features_:
        raise ShapeError(f"model expects {model.n_features_} features, data has {data.n_cols}")
    model.threads = threads
    paths = model.path_lengths(data)
    mean_path = paths.mean(axis=1)
    return dict(score=path_score(mean_path, model.effective_subsample_), mean_path=mean_path,
                mean_deviation=np.full(len(mean_path), np.nan))


def _num(v: float) -> str:
    return repr(float(v))


def render_scores(cols: dict, meta: dict, fmt: str = "csv") -> str:
    n = len(cols["score"])
    buf = io.StringIO()
    if fmt == "jsonl":
        for i in range(n):
            rec = dict(object_id=i, score=float(cols["score"][i]), mean_path=float(cols["mean_path"][i]),
                       mean_deviation=None if np.isnan(cols["mean_deviation"][i])
                       else float(cols["mean_deviation"][i]),
                       config_hash=meta["config_hash"], seed=meta["seed"])
            buf.write(json.dumps(rec) + "\n")
        return buf.getvalue()
    buf.write(f"# config_hash={meta['config_hash']} seed={meta['seed']} mode={meta['mode']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCORE_COLUMNS)
    for i in range(n):
        w.writerow([i, _num(cols["score"][i]), _num(cols["mean_path"][i]), _num(cols["mean_deviation"][i])])
    return buf.getvalue()


def cmd_score(args) -> int:
    model, meta = load_model(args.model)
    run_cfg = RunConfig(**meta["run_config"]) if "run_config" in meta else RunConfig()
    mode = args.mode or meta.get("mode", "deas")
    if mode != run_cfg.mode:
        run_cfg = replace(run_cfg, mode=mode)
    data = _load(args.test_csv, args.label_col)
    threads = _threads(args)
    cols = score_model(model, data, mode, threads)
    out_meta = dict(config_hash=run_cfg.config_hash(), seed=run_cfg.seed, mode=mode)
    text = render_scores(cols, out_meta, args.format)
    if args.dump_rep:
        Path(args.dump_rep).write_text(render_representation(model, data, args.rep_member, out_meta, threads))
    _emit(text, args.out)
    return 0


def render_representation(model, data: DataMatrix, member: int, meta: dict, threads: int = 1) -> str:
    """CSV of one ensemble member's representation (standardised inputs for baselines)."""
    if isinstance(model, DeepIsolationForest):
        forest = model.forest_
        if data.n_cols != forest.input_dim:
            raise ShapeError(f"model expects {forest.input_dim} features, data has {data.n_cols}")
        if not 0 <= member < forest.network.ensemble_size:
            raise ConfigError(f"--rep-member must lie in [0, {forest.network.ensemble_size})")
        z = forest.training_stats.transform(data.values)
        rep = forward_ensemble(forest.network, z, forest.config.batch_size, threads)[member]
    else:
        rep = model.stats_.transform(data.values)
    buf = io.StringIO()
    buf.write(f"# config_hash={meta['config_hash']} seed={meta['seed']} member={member}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"r{j}" for j in range(rep.shape[1])])
    for row in rep:
        w.writerow([_num(v) for v in row])
    return buf.getvalue()


def read_comment_meta(path) -> dict:
    """Parse ``key=value`` pairs from the leading ``#`` lines of a CSV file."""
    meta = {}
    with Path(path).open() as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
    return meta


def read_scores(path) -> tuple[np.ndarray, dict]:
    data = load_csv(path, missing="mean")
    names = list(data.feature_names)
    if "score" not in names:
        raise ParseError(f"{path}: no 'score' column")
    return data.values[:, names.index("score")], read_comment_meta(path)


# ---------------------------------------------------------------- eval


def cmd_eval(args) -> int:
    scores, meta = read_scores(args.scores_csv)
    label_col = args.label_col or "label"
    labels = load_csv(args.labels, label_column=label_col).labels
    if len(labels) != len(scores):
        raise ShapeError(f"{len(scores)} scores but {len(labels)} labels")
    seed = int(meta["seed"]) if "seed" in meta else (args.seed or 0)
    report = dict(auc_roc=auc_roc(scores, labels), auc_pr=auc_pr(scores, labels),
                  seed=seed, config_hash=meta.get("config_hash"))
    if args.rep:
        rep = load_csv(args.rep).values
        if rep.shape[0] != len(labels):
            raise ShapeError(f"representation has {rep.shape[0]} rows, labels have {len(labels)}")
        report["aii"] = aii(rep, labels, rng=seed, anchors=args.anchors, normals=args.normals)
    _emit(_json(report), args.out)
    return 0


# ---------------------------------------------------------------- benchmark / scaling


def cmd_benchmark(args) -> int:
    cfg = resolve_config(args)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    report = experiments.run_benchmark(cfg, args.suite, seeds, methods, _threads(args))
    _emit(_json(report), args.out)
    return 0


def cmd_scaling(args) -> int:
    cfg = resolve_config(args)
    if args.full:
        from .data import DEFAULT_SCALING_DIMS, DEFAULT_SCALING_SIZES
        sizes, dims = DEFAULT_SCALING_SIZES, DEFAULT_SCALING_DIMS
    else:
        sizes, dims = experiments.REDUCED_SIZES, experiments.REDUCED_DIMS
    if args.sizes:
        sizes = tuple(int(v) for v in args.sizes.split(","))
    if args.dims:
        dims = tuple(int(v) for v in args.dims.split(","))
    report = experiments.run_scaling(cfg, sizes, dims, args.repeats, _threads(args))
    _emit(_json(report), args.out)
    return 0


# ---------------------------------------------------------------- score map


def cmd_score_map(args) -> int:
    cfg = resolve_config(args)
    if args.data:
        train = _load(args.data, args.label_col)
        source = args.data
    else:
        train = gen_blobs(args.kind, args.size, args.noise if args.noise is not None else
                          (0.1 if args.kind == "sinusoid" else 1.0), cfg.seed)
        source = args.kind
    if train.n_cols != 2:
        raise ShapeError(f"score maps need 2-D data, got {train.n_cols} columns")
    if args.bounds:
        try:
            x0, x1, y0, y1 = (float(v) for v in args.bounds.split(","))
        except ValueError:
            raise ConfigError("--bounds must be 'xmin,xmax,ymin,ymax'") from None
    else:
        lo, hi = train.values.min(axis=0), train.values.max(axis=0)
        pad = 0.25 * (hi - lo)
        (x0, y0), (x1, y1) = lo - pad, hi + pad
    model = cfg.make_detector(_threads(args)).fit(train)
    grid = score_map_grid(model, ((x0, x1), (y0, y1)), args.resolution, train)
    buf = io.StringIO()
    buf.write(f"# config_hash={cfg.config_hash()} seed={cfg.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "score"])
    for x, y, s in grid.triples():
        w.writerow([_num(x), _num(y), _num(s)])
    side = dict(threshold=grid.threshold, threshold_percentile=99, source=source,
                bounds=[x0, x1, y0, y1], resolution=args.resolution,
                config_hash=cfg.config_hash(), seed=cfg.seed, algorithm=cfg.algorithm)
    if args.out:
        Path(args.out + ".json").write_text(_json(side))
    _emit(buf.getvalue(), args.out)
    return 0


# ---------------------------------------------------------------- verify


def cmd_verify(args) -> int:
    cfg = resolve_config(args)
    if args.data:
        x = _load(args.data, args.label_col).values
        source = args.data
    elif args.dataset == "ring":
        x = gen_ring(seed=cfg.seed).values
        source = "ring"
    else:
        x = gen_blobs(args.dataset, seed=cfg.seed).values
        source = args.dataset
    n_trees = args.trees or 50
    it = verify_iforest_reduction(x, cfg.seed, n_trees, cfg.n, inject_fault=args.inject_fault)
    ef = verify_eif_reduction(x, cfg.seed, max(1, n_trees // 5), cfg.n, inject_fault=args.inject_fault)
    report = dict(source=source, seed=cfg.seed, config_hash=cfg.config_hash(),
                  inject_fault=args.inject_fault,
                  iforest_max_diff=it.max_abs_diff, eif_predicate_agreement=ef.triple_agreement,
                  eif_branch_agreement=ef.node_agreement,
                  iforest=it.to_dict(), eif=ef.to_dict(), passed=it.passed and ef.passed)
    _emit(_json(report), args.out)
    if not report["passed"]:
        raise VerificationError("equivalence check failed")
    return 0


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dif", description="Deep isolation forest anomaly detection.",
                                     epilog=__doc__.split("Exit codes", 1)[1].strip("-\n "),
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a detector and write a model file")
    p.add_argument("train_csv")
    _config_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score a CSV file with a model")
    p.add_argument("model")
    p.add_argument("test_csv")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--dump-rep", help="also write one member's representation as CSV")
    p.add_argument("--rep-member", type=int, default=0)
    _config_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="AUC-ROC / AUC-PR (and AII) of a score file")
    p.add_argument("scores_csv")
    p.add_argument("--labels", required=True, help="CSV holding the label column")
    p.add_argument("--rep", help="representation dump for the isolability index")
    p.add_argument("--anchors", type=int, default=20)
    p.add_argument("--normals", type=int, default=1000)
    _config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("benchmark", help="run all methods on a synthetic suite")
    p.add_argument("--suite", choices=experiments.SUITES, default="ring")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--methods", default=",".join(experiments.METHODS))
    _config_flags(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("score-map", help="score a 2-D lattice (plot-ready CSV)")
    p.add_argument("--kind", choices=BLOB_KINDS, default="single-blob")
    p.add_argument("--data", help="2-D training CSV instead of a generated scenario")
    p.add_argument("--size", type=int, default=500, help="generated points")
    p.add_argument("--noise", type=float)
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--bounds", help="xmin,xmax,ymin,ymax")
    _config_flags(p)
    p.set_defaults(func=cmd_score_map)

    p = sub.add_parser("verify", help="check the isolation-forest and extended-forest reductions")
    p.add_argument("--data", help="CSV file (default: generated data)")
    p.add_argument("--dataset", choices=("ring",) + BLOB_KINDS, default="ring")
    p.add_argument("--inject-fault", action="store_true", help="perturb one split to self-test the check")
    _config_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("scaling", help="fit-time sweep over data size and dimensionality")
    p.add_argument("--full", action="store_true", help="full grid instead of the reduced one")
    p.add_argument("--sizes")
    p.add_argument("--dims")
    p.add_argument("--repeats", type=int, default=3)
    _config_flags(p)
    p.set_defaults(func=cmd_scaling)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DifError as exc:
        print(f"dif {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"dif {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
