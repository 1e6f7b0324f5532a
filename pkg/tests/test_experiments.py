"""Benchmark and scaling harness bookkeeping (small configurations)."""

import numpy as np
import pytest

from dif.config import RunConfig
from dif.data import DataMatrix, adjust_contamination, gen_ring
from dif.errors import ConfigError
from dif.experiments import check_report, fit_score, growth_factors, run_benchmark, run_scaling
from dif.metrics import auc_roc

TINY = RunConfig(r=2, t=3, trees=10)


class TestBenchmark:
    def test_ring_entries(self):
        rep = run_benchmark(TINY, "ring", seeds=[0, 1, 2])
        assert set(rep["settings"]["ring"]) == {"dif", "iforest", "eif"}
        assert all(len(v["per_seed"]) == 3 for v in rep["settings"]["ring"].values())
        assert rep["config_hash"] == TINY.config_hash()
        assert check_report(rep)

    def test_means_recompute(self):
        rep = run_benchmark(TINY, "ring", seeds=[3, 4], methods=["iforest"])
        s = rep["settings"]["ring"]["iforest"]
        assert s["mean_auc_roc"] == pytest.approx(np.mean([e["auc_roc"] for e in s["per_seed"]]), abs=1e-15)

    def test_tampered_report_detected(self):
        rep = run_benchmark(TINY, "ring", seeds=[0, 1], methods=["iforest"])
        rep["settings"]["ring"]["iforest"]["mean_auc_roc"] += 0.01
        assert not check_report(rep)

    def test_blobs_settings(self):
        rep = run_benchmark(TINY, "blobs", seeds=[0], methods=["dif"])
        assert set(rep["settings"]) == {"single-blob", "two-blob", "sinusoid"}

    def test_contamination_zero_is_clean_training(self):
        rep = run_benchmark(TINY, "contamination", seeds=[2], methods=["dif"], levels=[0.0, 0.1])
        data = gen_ring(seed=2)
        clean = data.values[data.labels == 0]
        s = fit_score(TINY, "dif", DataMatrix(clean), data, 2)
        assert rep["settings"]["rho=0.00"]["dif"]["per_seed"][0]["auc_roc"] == auc_roc(s, data.labels)
        assert adjust_contamination(data, 0.0).labels.sum() == 0

    def test_unknown_suite(self):
        with pytest.raises(ConfigError):
            run_benchmark(TINY, "graphs")
        with pytest.raises(ConfigError):
            run_benchmark(TINY, "ring", methods=["lof"])


class TestScaling:
    def test_rows_and_growth(self):
        rep = run_scaling(TINY, sizes=[300, 600], dims=[4, 16], repeats=1, fixed_size=200, fixed_dim=3)
        assert [(r["N"], r["D"]) for r in rep["rows"]] == [(200, 4), (200, 16), (300, 3), (600, 3)]
        assert all(len(r["times"]) == 1 for r in rep["rows"])
        assert [g["axis"] for g in rep["growth"]] == ["D", "N"]

    def test_per_doubling_normalisation(self):
        rows = [dict(D=16, seconds=1.0), dict(D=64, seconds=4.0)]
        g = growth_factors(rows, "D")[0]
        assert g["ratio"] == 4.0 and g["per_doubling"] == pytest.approx(2.0)
