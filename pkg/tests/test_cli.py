import numpy as np
import pytest

from subcluster.cli import main
from subcluster.evaluate import run_eval, run_scaling_probe
from subcluster.graph import GeneratorConfig
from subcluster.preprocess import PreprocessConfig


def run(args):
    return main(args)


BASE = ["--khat", "3", "--phi", "0.6", "--eps", "0.01", "--tmin", "30", "--vote-fraction", "0.2"]


class TestCliRoundTrip:
    def test_generate_preprocess_query(self, tmp_path, capsys):
        gpath, lpath, opath = str(tmp_path / "g.txt"), str(tmp_path / "l.txt"), str(tmp_path / "o.bin")
        assert run(["generate", "--n", "90", "--k", "3", "--d", "6", "--seed", "2",
                    "--out", gpath, "--labels", lpath]) == 0
        assert run(["preprocess", "--graph", gpath, *BASE, "--seed", "4", "--out", opath]) == 0
        out = str(tmp_path / "q.csv")
        assert run(["query", "--oracle", opath, "--graph", gpath, "--vertex", "5", "--out", out]) == 0
        lines = open(out).read().strip().splitlines()
        assert lines[0] == "vertex,label"
        assert lines[1].startswith("5,")

    def test_batch_query(self, tmp_path):
        gpath, lpath, opath = str(tmp_path / "g.txt"), str(tmp_path / "l.txt"), str(tmp_path / "o.bin")
        run(["generate", "--n", "90", "--k", "3", "--d", "6", "--seed", "2", "--out", gpath, "--labels", lpath])
        run(["preprocess", "--graph", gpath, *BASE, "--seed", "4", "--out", opath])
        batch = tmp_path / "batch.txt"
        batch.write_text("0\n45\n80\n")
        out = str(tmp_path / "q.csv")
        assert run(["query", "--oracle", opath, "--graph", gpath, "--batch", str(batch), "--out", out]) == 0
        assert len(open(out).read().strip().splitlines()) == 4

    def test_approxk_output(self, tmp_path, capsys):
        gpath, lpath = str(tmp_path / "g.txt"), str(tmp_path / "l.txt")
        run(["generate", "--n", "90", "--k", "3", "--d", "6", "--seed", "2", "--out", gpath, "--labels", lpath])
        assert run(["approxk", "--graph", gpath, *BASE, "--samples", "16", "--boost", "2"]) == 0
        out = capsys.readouterr().out
        assert "estimate_k_over_n,estimate_k,L,T" in out

    def test_exact_check_report(self, tmp_path):
        gpath, lpath = str(tmp_path / "g.txt"), str(tmp_path / "l.txt")
        run(["generate", "--n", "90", "--k", "3", "--d", "6", "--seed", "2", "--out", gpath, "--labels", lpath])
        out = str(tmp_path / "r.csv")
        assert run(["exact-check", "--graph", gpath, "--labels", lpath, "--out", out]) == 0
        text = open(out).read()
        assert "check,measured,bound,pass" in text
        assert "lambda_k_plus_1" in text


class TestExitCodes:
    def test_usage_error_is_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["generate", "--n", "not-a-number"])
        assert exc.value.code == 2

    def test_missing_file_is_3(self, tmp_path):
        assert run(["query", "--oracle", str(tmp_path / "no.bin"), "--graph", str(tmp_path / "no.txt"),
                    "--vertex", "0"]) == 3

    def test_validation_failure_is_4(self, tmp_path):
        # strict polynomial validation cannot hold at desk parameters
        assert run(["poly", "--n", "400", "--phi", "0.6", "--eps", "0.03",
                    "--grid", "100", "--out", str(tmp_path / "p.csv")]) == 4

    def test_poly_emits_csv_without_validation(self, tmp_path):
        out = tmp_path / "p.csv"
        assert run(["poly", "--n", "400", "--phi", "0.6", "--eps", "0.03",
                    "--grid", "100", "--no-validate", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# poly n=400")
        assert "t,c_t" in lines
        data = [ln for ln in lines if "," in ln and not ln.startswith("#")][1:]
        assert len(data) >= 2


class TestEvalDeterminism:
    def test_byte_identical_reports(self):
        gen = GeneratorConfig(n=90, k=3, d=6, cross_edge_budget=0.0, seed=0)
        pre = PreprocessConfig(k_hat=3, phi=0.6, eps=0.01, t_min=30, vote_fraction=0.2)
        a = run_eval(gen, pre, seeds=[1, 2]).to_csv()
        b = run_eval(gen, pre, seeds=[1, 2]).to_csv()
        assert a == b
        assert a.startswith("# subcluster-eval-1 config=")

    def test_separable_eval_zero_miss_on_found_clusters(self):
        gen = GeneratorConfig(n=120, k=3, d=8, cross_edge_budget=0.0, seed=0)
        pre = PreprocessConfig(k_hat=3, phi=0.6, eps=0.01, t_min=30, vote_fraction=0.2)
        report = run_eval(gen, pre, seeds=[0, 1, 2])
        for row in report.rows:
            if row.r_size == 3:
                assert row.miss_count == 0

    def test_thread_fanout_matches_serial(self):
        gen = GeneratorConfig(n=90, k=3, d=6, cross_edge_budget=0.0, seed=0)
        pre = PreprocessConfig(k_hat=3, phi=0.6, eps=0.01, t_min=30, vote_fraction=0.2)
        serial = run_eval(gen, pre, seeds=[3, 4], threads=1).to_csv()
        threaded = run_eval(gen, pre, seeds=[3, 4], threads=2).to_csv()
        assert serial == threaded


class TestScalingProbe:
    def test_walks_decrease_with_k(self):
        pre = PreprocessConfig(k_hat=2, phi=0.6, eps=0.01, t_min=24, vote_fraction=0.2, walks_scale=6.0)
        rows = run_scaling_probe(512, [2, 4, 8], 8, pre, probe_queries=16, seed=1)
        walks = [row.query_walks_per_query for row in rows]
        assert walks[0] > walks[1] > walks[2]
