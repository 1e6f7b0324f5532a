"""Acceptance criteria.

Each test prints one ``ACCEPTANCE <n> PASS|FAIL`` line (also collected in the
terminal summary) and then asserts the criterion at its stated tolerance.
Runtime budgets are part of the criteria where they are stated.
"""

import hashlib
import time

import numpy as np
import pytest

from dif.baselines import IsolationForest, verify_eif_reduction, verify_iforest_reduction
from dif.cli import main
from dif.config import RunConfig
from dif.core import RngStream, activation
from dif.data import DataMatrix, gen_blobs, gen_ring, save_csv
from dif.experiments import CONTAMINATION_LEVELS, check_report, run_benchmark, run_scaling
from dif.forest import ForestConfig, build_forest
from dif.metrics import aii, auc_pr, auc_roc
from dif.models import DeepIsolationForest
from dif.representation import build_network, forward_ensemble, forward_member
from dif.scoring import score_dataset

pytestmark = pytest.mark.slow


# ----------------------------------------------------------------------------- 1

def materialised(net, x, member):
    h = x
    for layer, w in zip(net.layers, net.member_weights(member)):
        h = h @ w
        if layer.apply_activation:
            h = activation(h, layer.activation, layer.alpha)
    return h


def test_1_cere_oracle_equivalence(record_acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    n_instances = 120
    for k in range(n_instances):
        s = RngStream(2024).child("instance", k)
        d_in = int(s.integers(1, 24))
        hidden = tuple(int(h) for h in s.integers(1, 48, size=int(s.integers(0, 3))))
        out = int(s.integers(1, 20))
        r = int(s.integers(1, 21))
        act = ("tanh", "relu", "leaky_relu")[int(s.integers(3))]
        init = ("normal", "uniform")[int(s.integers(2))]
        net = build_network(d_in, hidden, out, r, act, s.child("net"), init=init,
                            final_activation=bool(s.integers(2)))
        x = s.child("x").standard_normal((int(s.integers(1, 120)), d_in)) * 2
        reps = forward_ensemble(net, x, int(s.integers(1, 80)))
        for u in range(r):
            oracle = materialised(net, x, u)
            for got in (reps[u], forward_member(net, x, u)):
                worst = max(worst, float(np.max(np.abs(got - oracle) / np.maximum(1.0, np.abs(oracle)))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 30
    record_acceptance(1, "CERE batched == per-member == materialised weights",
                      ok, f"{n_instances} instances, max rel err {worst:.2e} (tol 1e-10), {elapsed:.1f}s (<30s)")
    assert ok


# ----------------------------------------------------------------------------- 2

def test_2_iforest_reduction(record_acceptance):
    t0 = time.perf_counter()
    runs = []
    for kind in ("ring", "two-blob", "sinusoid"):
        for seed in range(10):
            x = gen_ring(seed=seed).values if kind == "ring" else gen_blobs(kind, seed=seed).values
            rep = verify_iforest_reduction(x, seed=seed, n_trees=50)
            runs.append((kind, seed, rep))
    elapsed = time.perf_counter() - t0
    worst = max(r.max_abs_diff for _, _, r in runs)
    seqs = all(all(r.split_sequence_equal) for _, _, r in runs)
    ok = all(r.passed for _, _, r in runs) and worst == 0.0 and elapsed < 60
    record_acceptance(2, "identity-network path-only forest == classic forest (no leaf adjustment)",
                      ok, f"{len(runs)} runs (10 seeds x 3 datasets, 50 trees), max |diff| {worst}, "
                          f"split sequences equal: {seqs}, {elapsed:.1f}s (<60s)")
    assert ok


# ----------------------------------------------------------------------------- 3

def test_3_eif_reduction(record_acceptance):
    t0 = time.perf_counter()
    rep = verify_eif_reduction(gen_ring(seed=0).values, seed=0, n_trees=10, n_triples=500)
    elapsed = time.perf_counter() - t0
    ok = rep.triple_agreement == 1.0 and rep.node_agreement == 1.0 and rep.boundary_left and elapsed < 10
    record_acceptance(3, "hyper-plane split == one-unit projection split",
                      ok, f"500 triples agreement {rep.triple_agreement}, branch agreement "
                          f"{rep.node_agreement} over {rep.nodes_checked} nodes / {rep.objects_checked} "
                          f"objects, {elapsed:.1f}s (<10s)")
    assert ok


# ----------------------------------------------------------------------------- 4

def test_4_ring_hard_anomalies(record_acceptance):
    t0 = time.perf_counter()
    dif_auc, if_auc = [], []
    for seed in range(5):
        data = gen_ring(seed=seed)
        dif_auc.append(auc_roc(DeepIsolationForest(seed=seed).fit(data).score_samples(data.values), data.labels))
        if_auc.append(auc_roc(IsolationForest(seed=seed).fit(data).score_samples(data.values), data.labels))
    elapsed = time.perf_counter() - t0
    m_dif, m_if = float(np.mean(dif_auc)), float(np.mean(if_auc))
    ok = m_dif >= 0.9 and m_dif > m_if and elapsed < 120
    record_acceptance(4, "ring: deep forest AUC-ROC >= 0.9 and > isolation forest (5 seeds)",
                      ok, f"deep forest {m_dif:.4f} vs isolation forest {m_if:.4f}, "
                          f"per seed {np.round(dif_auc, 3).tolist()} / {np.round(if_auc, 3).tolist()}, "
                          f"{elapsed:.1f}s (<120s)")
    assert ok


# ----------------------------------------------------------------------------- 5

def test_5_deas_factorisation(record_acceptance):
    cases = []
    for seed in range(3):
        cases.append((f"ring seed {seed}", gen_ring(seed=seed).values, ForestConfig(seed=seed)))
    for kind in ("single-blob", "two-blob", "sinusoid"):
        cases.append((kind, gen_blobs(kind, seed=1).values, ForestConfig(r=10, seed=1)))
    x = RngStream(8).standard_normal((300, 12))
    cases.append(("gaussian 12-D relu", x, ForestConfig(r=8, activation="relu", depth=4, seed=2)))
    checked = 0
    bad = 0
    for _, values, cfg in cases:
        forest = build_forest(values, cfg)
        deas = score_dataset(forest, values, "deas")
        path = score_dataset(forest, values, "path-only")
        bad += int(np.sum(deas.scores != path.scores * deas.mean_deviation))
        bad += int(np.sum(deas.scores != deas.depth_factor * deas.mean_deviation))
        checked += len(values)
    ok = bad == 0
    record_acceptance(5, "final score == path-only score x mean deviation (exact)",
                      ok, f"{checked} objects over {len(cases)} runs, {bad} mismatches")
    assert ok


# ----------------------------------------------------------------------------- 6

def roc_brute(s, y):
    pos, neg = s[y == 1], s[y == 0]
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0) + 0.5 * (diff == 0)).sum() / (len(pos) * len(neg)))


def pr_brute(s, y):
    ap, prev = 0.0, 0.0
    for tau in sorted(set(s.tolist()), reverse=True):
        flagged = s >= tau
        tp = int(y[flagged].sum())
        rec = tp / y.sum()
        ap += (rec - prev) * tp / flagged.sum()
        prev = rec
    return ap


def test_6_metric_oracles(record_acceptance):
    t0 = time.perf_counter()
    worst_roc = worst_pr = 0.0
    for k in range(200):
        s = RngStream(77).child("metric", k)
        n = int(s.integers(2, 201))
        y = (s.uniform(size=n) < s.uniform(0.05, 0.6)).astype(int)
        y[0], y[1] = 0, 1
        scores = s.standard_normal(n)
        if k % 2:
            scores = np.round(scores, 1)  # heavy ties
        worst_roc = max(worst_roc, abs(auc_roc(scores, y) - roc_brute(scores, y)))
        worst_pr = max(worst_pr, abs(auc_pr(scores, y) - pr_brute(scores, y)))
    elapsed = time.perf_counter() - t0
    ok = worst_roc <= 1e-12 and worst_pr <= 1e-12 and elapsed < 30
    record_acceptance(6, "AUC-ROC / AUC-PR == brute-force oracles",
                      ok, f"200 instances, max err ROC {worst_roc:.1e} PR {worst_pr:.1e} (tol 1e-12), "
                          f"{elapsed:.1f}s (<30s)")
    assert ok


# ----------------------------------------------------------------------------- 7

def test_7_aii_sanity(record_acceptance):
    r = RngStream(31)
    normal = r.standard_normal((1500, 2))
    normal /= np.maximum(1.0, np.linalg.norm(normal, axis=1))[:, None]
    ang = r.uniform(0, 2 * np.pi, 25)
    far = np.vstack([normal, 100 * np.column_stack([np.cos(ang), np.sin(ang)])])
    far_aii = aii(far, np.r_[np.zeros(1500), np.ones(25)], rng=0, anchors=20, normals=1000)

    trials = []
    for k in range(20):
        s = RngStream(32).child("null", k)
        x = s.standard_normal((1700, 4))
        y = np.r_[np.zeros(1500), np.ones(200)]
        trials.append(aii(x, y, rng=s.child("aii"), anchors=20, normals=1000))
    inside = sum(abs(v - 0.5) <= 0.15 for v in trials)
    ok = far_aii == 1.0 and inside == 20
    record_acceptance(7, "AII: far anomalies -> 1.0; same-distribution anomalies -> 0.5 +- 0.15",
                      ok, f"far {far_aii}; null trials in band {inside}/20, range "
                          f"[{min(trials):.3f}, {max(trials):.3f}], mean {np.mean(trials):.3f}")
    assert ok


# ----------------------------------------------------------------------------- 8

def test_8_scalability_shape(record_acceptance):
    t0 = time.perf_counter()
    rep = run_scaling(RunConfig(), repeats=3, threads=1)
    elapsed = time.perf_counter() - t0
    worst = max(g["per_doubling"] for g in rep["growth"])
    ok = rep["passed"] and worst <= 2.5 and elapsed < 600
    steps = ", ".join(f"{g['axis']} {g['start']}->{g['stop']}: {g['per_doubling']:.2f}" for g in rep["growth"])
    record_acceptance(8, "median fit time grows <= 2.5x per doubling of N and of D",
                      ok, f"per-doubling factors [{steps}], {elapsed:.0f}s (<600s)")
    assert ok


# ----------------------------------------------------------------------------- 9

def test_9_determinism(record_acceptance, tmp_path):
    save_csv(gen_ring(seed=3), tmp_path / "train.csv")
    digests = []
    for k in (1, 2):
        out = tmp_path / f"m{k}.bin"
        assert main(["fit", str(tmp_path / "train.csv"), "--label-col", "label", "--seed", "11",
                     "--threads", "1", "--out", str(out)]) == 0
        digests.append(hashlib.sha256(out.read_bytes()).hexdigest())
    scores = []
    for threads in ("1", "4"):
        out = tmp_path / f"s{threads}.csv"
        assert main(["score", str(tmp_path / "m1.bin"), str(tmp_path / "train.csv"), "--label-col", "label",
                     "--threads", threads, "--out", str(out)]) == 0
        scores.append(out.read_bytes())
    ok = digests[0] == digests[1] and scores[0] == scores[1]
    record_acceptance(9, "byte-identical refit; scores invariant to --threads 1 vs 4",
                      ok, f"model sha256 {digests[0][:12]} == {digests[1][:12]}: {digests[0] == digests[1]}; "
                          f"score files identical: {scores[0] == scores[1]}")
    assert ok


# ----------------------------------------------------------------------------- 10

def test_10_contamination_protocol(record_acceptance):
    t0 = time.perf_counter()
    seeds = [0, 1, 2, 3, 4]
    rep = run_benchmark(RunConfig(), "contamination", seeds=seeds)
    elapsed = time.perf_counter() - t0
    expected = {f"rho={rho:.2f}" for rho in CONTAMINATION_LEVELS}
    well_formed = (set(rep["settings"]) == expected
                   and all(set(per) == {"dif", "iforest", "eif"} for per in rep["settings"].values())
                   and "config_hash" in rep and rep["seeds"] == seeds)
    consistent = check_report(rep)
    clean = {e["seed"]: e["auc_roc"] for e in rep["settings"]["rho=0.00"]["dif"]["per_seed"]}
    dirty = {e["seed"]: e["auc_roc"] for e in rep["settings"]["rho=0.10"]["dif"]["per_seed"]}
    wins = sum(clean[s] >= dirty[s] for s in seeds)
    ok = well_formed and consistent and wins >= 4
    means = ", ".join(f"{k[4:]}: {v['dif']['mean_auc_roc']:.3f}" for k, v in sorted(rep["settings"].items()))
    record_acceptance(10, "contamination sweep: report consistent; deep forest AUC(0%) >= AUC(10%) on >= 4/5 seeds",
                      ok, f"well-formed {well_formed}, means recompute {consistent}, seeds with "
                          f"AUC(0%) >= AUC(10%): {wins}/5; deep forest mean AUC by rho [{means}], {elapsed:.0f}s")
    assert ok
