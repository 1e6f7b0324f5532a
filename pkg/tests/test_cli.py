"""Command-line subcommands, artifacts and exit codes."""

import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from dif.cli import default_threads, main, read_comment_meta
from dif.core import RngStream
from dif.data import DataMatrix, gen_ring, load_csv, save_csv
from dif.metrics import auc_pr, auc_roc
from dif.model_io import load_model
from dif.scoring import score_dataset

SMALL = ["--r", "3", "--t", "4", "--threads", "1"]


@pytest.fixture(scope="module")
def ring_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "ring.csv"
    save_csv(gen_ring(seed=1), p)
    return p


@pytest.fixture(scope="module")
def model_file(ring_csv):
    out = ring_csv.parent / "model.bin"
    assert main(["fit", str(ring_csv), "--label-col", "label", "--out", str(out), *SMALL]) == 0
    return out


def read_score_rows(path):
    with open(path) as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    return rows[0], rows[1:]


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestFit:
    def test_default_tree_count(self, tmp_path):
        x = RngStream(0).standard_normal((1000, 8))
        save_csv(DataMatrix(x), tmp_path / "d.csv")
        assert main(["fit", str(tmp_path / "d.csv"), "--out", str(tmp_path / "m.bin"), "--threads", "1"]) == 0
        _, meta = load_model(tmp_path / "m.bin")
        assert meta["n_trees"] == 300 and meta["seed"] == 0 and len(meta["config_hash"]) == 16

    def test_r_times_t_trees(self, ring_csv, tmp_path):
        main(["fit", str(ring_csv), "--label-col", "label", "--out", str(tmp_path / "m.bin"),
              "--r", "2", "--t", "3"])
        assert load_model(tmp_path / "m.bin")[1]["n_trees"] == 6

    def test_refit_identical(self, ring_csv, tmp_path):
        for name, threads in (("a.bin", "1"), ("b.bin", "4")):
            main(["fit", str(ring_csv), "--label-col", "label", "--out", str(tmp_path / name),
                  "--r", "3", "--t", "4", "--threads", threads, "--seed", "7"])
        assert sha(tmp_path / "a.bin") == sha(tmp_path / "b.bin")

    def test_config_file_and_override(self, ring_csv, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("r = 2\nt = 2\nseed = 4\n")
        main(["fit", str(ring_csv), "--label-col", "label", "--config", str(cfg), "--t", "5",
              "--out", str(tmp_path / "m.bin")])
        meta = load_model(tmp_path / "m.bin")[1]
        assert meta["n_trees"] == 10 and meta["seed"] == 4

    @pytest.mark.parametrize("algo", ["iforest", "eif"])
    def test_baselines(self, ring_csv, tmp_path, algo):
        assert main(["fit", str(ring_csv), "--label-col", "label", "--algo", algo, "--trees", "10",
                     "--out", str(tmp_path / "m.bin")]) == 0
        assert load_model(tmp_path / "m.bin")[1]["algorithm"] == algo

    def test_needs_out(self, ring_csv):
        assert main(["fit", str(ring_csv)]) == 4


class TestScore:
    def test_matches_in_process(self, model_file, ring_csv, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["score", str(model_file), str(ring_csv), "--label-col", "label", "--out", str(out)]) == 0
        header, rows = read_score_rows(out)
        assert header == ["object_id", "score", "mean_path", "mean_deviation"]
        model, _ = load_model(model_file)
        res = score_dataset(model.forest_, load_csv(ring_csv, "label"))
        np.testing.assert_array_equal([float(r[1]) for r in rows], res.scores)
        np.testing.assert_array_equal([float(r[2]) for r in rows], res.mean_path)
        np.testing.assert_array_equal([float(r[3]) for r in rows], res.mean_deviation)
        meta = read_comment_meta(out)
        assert meta["seed"] == "0" and len(meta["config_hash"]) == 16

    def test_mode_toggle(self, model_file, ring_csv, tmp_path):
        for mode in ("deas", "path-only"):
            main(["score", str(model_file), str(ring_csv), "--label-col", "label", "--mode", mode,
                  "--out", str(tmp_path / f"{mode}.csv")])
        _, deas = read_score_rows(tmp_path / "deas.csv")
        _, path = read_score_rows(tmp_path / "path-only.csv")
        for d, p in zip(deas, path):
            assert float(d[1]) == float(p[1]) * float(d[3])
        assert read_comment_meta(tmp_path / "deas.csv")["config_hash"] != \
            read_comment_meta(tmp_path / "path-only.csv")["config_hash"]

    def test_threads_invariant(self, model_file, ring_csv, tmp_path):
        for t in ("1", "4"):
            main(["score", str(model_file), str(ring_csv), "--label-col", "label", "--threads", t,
                  "--out", str(tmp_path / f"t{t}.csv")])
        assert (tmp_path / "t1.csv").read_bytes() == (tmp_path / "t4.csv").read_bytes()

    def test_jsonl(self, model_file, ring_csv, tmp_path):
        main(["score", str(model_file), str(ring_csv), "--label-col", "label", "--format", "jsonl",
              "--out", str(tmp_path / "s.jsonl")])
        recs = [json.loads(l) for l in (tmp_path / "s.jsonl").read_text().splitlines()]
        assert len(recs) == 830
        assert list(recs[0])[:4] == ["object_id", "score", "mean_path", "mean_deviation"]

    def test_empty_file_no_output(self, model_file, tmp_path):
        (tmp_path / "e.csv").write_text("x,y\n")
        assert main(["score", str(model_file), str(tmp_path / "e.csv"), "--out", str(tmp_path / "o.csv")]) == 3
        assert not (tmp_path / "o.csv").exists()

    def test_dimension_mismatch(self, model_file, tmp_path):
        (tmp_path / "w.csv").write_text("a,b,c\n1,2,3\n")
        assert main(["score", str(model_file), str(tmp_path / "w.csv")]) == 5

    def test_bad_model(self, ring_csv, tmp_path):
        (tmp_path / "bad.bin").write_bytes(b"garbage" * 10)
        assert main(["score", str(tmp_path / "bad.bin"), str(ring_csv)]) == 8

    def test_missing_input(self, model_file, tmp_path):
        assert main(["score", str(model_file), str(tmp_path / "absent.csv")]) == 9

    def test_parse_error(self, model_file, tmp_path):
        (tmp_path / "p.csv").write_text("x,y\n1,abc\n")
        assert main(["score", str(model_file), str(tmp_path / "p.csv")]) == 3


class TestEval:
    def write_scores(self, path, scores):
        with open(path, "w") as fh:
            fh.write("# config_hash=abc seed=3 mode=deas\nobject_id,score,mean_path,mean_deviation\n")
            for i, s in enumerate(scores):
                fh.write(f"{i},{float(s)!r},1.0,1.0\n")

    def write_labels(self, path, labels):
        path.write_text("label\n" + "".join(f"{l}\n" for l in labels))

    @pytest.mark.parametrize("scores,expected", [([0.9, 0.8, 0.1, 0.2], (1.0, 1.0)),
                                                 ([0.5, 0.5, 0.5, 0.5], (0.5, 0.5))])
    def test_trivial(self, tmp_path, scores, expected):
        self.write_scores(tmp_path / "s.csv", scores)
        self.write_labels(tmp_path / "l.csv", [1, 1, 0, 0])
        assert main(["eval", str(tmp_path / "s.csv"), "--labels", str(tmp_path / "l.csv"),
                     "--out", str(tmp_path / "m.json")]) == 0
        rep = json.loads((tmp_path / "m.json").read_text())
        assert (rep["auc_roc"], rep["auc_pr"]) == expected
        assert rep["seed"] == 3 and rep["config_hash"] == "abc" and "aii" not in rep

    def test_matches_in_process(self, tmp_path):
        r = RngStream(4)
        s = np.round(r.standard_normal(120), 2)
        y = (r.uniform(size=120) < 0.2).astype(int)
        self.write_scores(tmp_path / "s.csv", s)
        self.write_labels(tmp_path / "l.csv", y)
        main(["eval", str(tmp_path / "s.csv"), "--labels", str(tmp_path / "l.csv"), "--out", str(tmp_path / "m.json")])
        rep = json.loads((tmp_path / "m.json").read_text())
        assert rep["auc_roc"] == auc_roc(s, y) and rep["auc_pr"] == auc_pr(s, y)

    def test_single_class(self, tmp_path):
        self.write_scores(tmp_path / "s.csv", [0.1, 0.2])
        self.write_labels(tmp_path / "l.csv", [0, 0])
        assert main(["eval", str(tmp_path / "s.csv"), "--labels", str(tmp_path / "l.csv")]) == 6

    def test_with_representation_dump(self, model_file, ring_csv, tmp_path):
        main(["score", str(model_file), str(ring_csv), "--label-col", "label", "--out", str(tmp_path / "s.csv"),
              "--dump-rep", str(tmp_path / "rep.csv"), "--rep-member", "1"])
        assert main(["eval", str(tmp_path / "s.csv"), "--labels", str(ring_csv), "--rep", str(tmp_path / "rep.csv"),
                     "--out", str(tmp_path / "m.json")]) == 0
        rep = json.loads((tmp_path / "m.json").read_text())
        assert 0.0 <= rep["aii"] <= 1.0
        assert load_csv(tmp_path / "rep.csv").n_cols == 16


class TestVerify:
    def test_default_passes(self, tmp_path):
        assert main(["verify", "--trees", "10", "--out", str(tmp_path / "v.json")]) == 0
        rep = json.loads((tmp_path / "v.json").read_text())
        assert rep["iforest_max_diff"] == 0.0 and rep["eif_predicate_agreement"] == 1.0
        assert rep["seed"] == 0 and rep["iforest"]["seed"] == 0 and "config_hash" in rep

    def test_injected_fault_exits_7(self, tmp_path):
        assert main(["verify", "--trees", "10", "--inject-fault", "--out", str(tmp_path / "v.json")]) == 7
        assert json.loads((tmp_path / "v.json").read_text())["passed"] is False

    def test_csv_input(self, ring_csv):
        assert main(["verify", "--data", str(ring_csv), "--label-col", "label", "--trees", "5",
                     "--seed", "3", "--out", "/dev/null"]) == 0


class TestOtherCommands:
    def test_benchmark(self, tmp_path):
        assert main(["benchmark", "--suite", "ring", "--seeds", "0,1", "--r", "2", "--t", "3",
                     "--trees", "10", "--out", str(tmp_path / "b.json")]) == 0
        rep = json.loads((tmp_path / "b.json").read_text())
        assert set(rep["settings"]["ring"]) == {"dif", "iforest", "eif"}
        assert all(len(v["per_seed"]) == 2 for v in rep["settings"]["ring"].values())

    def test_score_map(self, tmp_path):
        out = tmp_path / "g.csv"
        assert main(["score-map", "--kind", "two-blob", "--resolution", "12", "--r", "2", "--t", "3",
                     "--out", str(out)]) == 0
        header, rows = read_score_rows(out)
        assert header == ["x", "y", "score"] and len(rows) == 144
        side = json.loads((tmp_path / "g.csv.json").read_text())
        assert side["threshold"] > 0 and side["resolution"] == 12 and "config_hash" in side

    def test_score_map_rejects_3d(self, tmp_path):
        save_csv(DataMatrix(np.zeros((5, 3))), tmp_path / "d.csv")
        assert main(["score-map", "--data", str(tmp_path / "d.csv")]) == 5

    def test_scaling(self, tmp_path):
        assert main(["scaling", "--sizes", "200,400", "--dims", "4,8", "--repeats", "1", "--r", "2", "--t", "2",
                     "--out", str(tmp_path / "s.json")]) == 0
        rep = json.loads((tmp_path / "s.json").read_text())
        assert [(r["N"], r["D"]) for r in rep["rows"]] == [(5000, 4), (5000, 8), (200, 32), (400, 32)]
        assert len(rep["growth"]) == 2

    def test_bad_config_value(self, ring_csv, tmp_path):
        assert main(["fit", str(ring_csv), "--r", "0", "--out", str(tmp_path / "m.bin")]) == 4
        assert main(["fit", str(ring_csv), "--depth", "deep", "--out", str(tmp_path / "m.bin")]) == 4

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2


class TestThreadsSetting:
    def test_env_var(self, monkeypatch):
        monkeypatch.setenv("DIF_THREADS", "3")
        assert default_threads() == 3

    def test_env_var_invalid(self, monkeypatch):
        from dif.errors import ConfigError
        monkeypatch.setenv("DIF_THREADS", "many")
        with pytest.raises(ConfigError):
            default_threads()


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "dif", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "score-map" in out.stdout and "Exit codes" not in out.stdout[:20]
