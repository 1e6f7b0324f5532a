"""Synthetic benchmark and scalability harnesses."""

from __future__ import annotations

import math
import time
from dataclasses import replace
from typing import Sequence

import numpy as np

from .config import RunConfig
from .data import BLOB_KINDS, DataMatrix, adjust_contamination, gen_labeled_blobs, gen_ring, gen_scaling_suite
from .errors import ConfigError
from .metrics import auc_pr, auc_roc

METHODS = ("dif", "iforest", "eif")
SUITES = ("ring", "blobs", "contamination")
CONTAMINATION_LEVELS = (0.0, 0.02, 0.04, 0.06, 0.08, 0.10)
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
REDUCED_SIZES = (1000, 2000, 4000, 8000)
REDUCED_DIMS = (16, 64, 256, 1024)


def fit_score(cfg: RunConfig, method: str, train: DataMatrix, test: DataMatrix, seed: int,
              threads: int = 1) -> np.ndarray:
    """Fit ``method`` on ``train`` with master seed ``seed`` and score ``test``."""
    model = replace(cfg, algorithm=method, seed=seed).make_detector(threads)
    return np.asarray(model.fit(train).score_samples(test.values))


def _summary(entries: list[dict]) -> dict:
    roc = [e["auc_roc"] for e in entries]
    pr = [e["auc_pr"] for e in entries]
    return dict(per_seed=entries, mean_auc_roc=float(np.mean(roc)), std_auc_roc=float(np.std(roc)),
                mean_auc_pr=float(np.mean(pr)), std_auc_pr=float(np.std(pr)))


def _evaluate(cfg, method, train, test, seed, threads):
    s = fit_score(cfg, method, train, test, seed, threads)
    return dict(seed=seed, auc_roc=auc_roc(s, test.labels), auc_pr=auc_pr(s, test.labels))


def run_benchmark(cfg: RunConfig, suite: str, seeds: Sequence[int] = DEFAULT_SEEDS,
                  methods: Sequence[str] = METHODS, threads: int = 1,
                  levels: Sequence[float] = CONTAMINATION_LEVELS) -> dict:
    """Run ``methods`` on a synthetic suite over ``seeds``.

    Seed ``s`` generates the data and is the master seed of every detector.
    ``ring`` and ``blobs`` fit and score the same labeled set. The
    ``contamination`` suite trains on a copy of the ring set adjusted to each
    ratio in ``levels`` and tests on the original set.

    The report maps ``settings -> setting -> method`` to a summary holding
    the per-seed AUCs and their means and (population) standard deviations.
    """
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; expected one of {SUITES}")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ConfigError("need at least one seed")
    settings: dict[str, dict] = {}

    def add(setting, method, entry):
        settings.setdefault(setting, {}).setdefault(method, []).append(entry)

    for seed in seeds:
        if suite == "ring":
            data = gen_ring(seed=seed)
            for m in methods:
                add("ring", m, _evaluate(cfg, m, data, data, seed, threads))
        elif suite == "blobs":
            for kind in BLOB_KINDS:
                data = gen_labeled_blobs(kind, seed=seed)
                for m in methods:
                    add(kind, m, _evaluate(cfg, m, data, data, seed, threads))
        else:
            data = gen_ring(seed=seed)
            for rho in levels:
                train = adjust_contamination(data, rho, seed)
                for m in methods:
                    add(f"rho={rho:.2f}", m, _evaluate(cfg, m, train, data, seed, threads))
    return dict(suite=suite, config_hash=cfg.config_hash(), seed=cfg.seed, seeds=seeds,
                methods=list(methods),
                settings={k: {m: _summary(v) for m, v in per.items()} for k, per in settings.items()})


def check_report(report: dict, tol: float = 1e-12) -> bool:
    """Recompute every mean/std from the per-seed entries."""
    for per in report["settings"].values():
        for summary in per.values():
            for key in ("auc_roc", "auc_pr"):
                vals = [e[key] for e in summary["per_seed"]]
                if len(vals) != len(report["seeds"]):
                    return False
                if abs(summary[f"mean_{key}"] - sum(vals) / len(vals)) > tol:
                    return False
                if abs(summary[f"std_{key}"] - float(np.std(vals))) > tol:
                    return False
    return True


def time_fit(cfg: RunConfig, data: DataMatrix, repeats: int = 3, threads: int = 1) -> list[float]:
    times = []
    for _ in range(repeats):
        model = cfg.make_detector(threads)
        t0 = time.perf_counter()
        model.fit(data)
        times.append(time.perf_counter() - t0)
    return times


def growth_factors(rows: list[dict], axis: str) -> list[dict]:
    """Per-doubling growth between consecutive sweep points along ``axis``.

    For a step from ``a`` to ``b`` with time ratio ``q`` the per-doubling
    factor is ``q ** (1 / log2(b / a))``.
    """
    out = []
    for prev, cur in zip(rows, rows[1:]):
        doublings = math.log2(cur[axis] / prev[axis])
        ratio = cur["seconds"] / prev["seconds"]
        out.append(dict(axis=axis, start=prev[axis], stop=cur[axis], ratio=ratio,
                        per_doubling=ratio ** (1.0 / doublings)))
    return out


def run_scaling(cfg: RunConfig, sizes: Sequence[int] = REDUCED_SIZES, dims: Sequence[int] = REDUCED_DIMS,
                repeats: int = 3, threads: int = 1, fixed_size: int = 5000, fixed_dim: int = 32,
                limit: float = 2.5) -> dict:
    """Median-of-``repeats`` fit times over the dimensionality and size sweeps."""
    suite = gen_scaling_suite(sizes, dims, cfg.seed, fixed_size, fixed_dim)
    rows = []
    for data in suite:
        times = time_fit(cfg, data, repeats, threads)
        rows.append(dict(N=data.n_rows, D=data.n_cols, seconds=float(np.median(times)), times=times))
    dim_rows = rows[:len(dims)]
    size_rows = rows[len(dims):]
    growth = growth_factors(dim_rows, "D") + growth_factors(size_rows, "N")
    return dict(config_hash=cfg.config_hash(), seed=cfg.seed, algorithm=cfg.algorithm,
                repeats=repeats, rows=rows, growth=growth, limit=limit,
                passed=all(g["per_doubling"] <= limit for g in growth))
