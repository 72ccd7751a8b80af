import hashlib
import json
import subprocess
import sys

import pytest

from slatesim.catalog import load_catalog
from slatesim.agents import load_policy
from slatesim.cli import main


def write_fast_config(tmp_path, **extra):
    cfg = dict(
        num_items=200,
        num_users=8,
        slate_size=4,
        iterations=2,
        episodes_per_iteration=6,
        eval_episodes=20,
        diag_episodes=2,
        candidate_top_m=6,
        candidate_random_r=2,
        gbrt_rounds=8,
        algorithms=["qlearning"],
        gammas=[0.0, 0.8],
        budget_locs=[60.0],
        seeds=[0],
        workers=1,
    )
    cfg.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestGenCatalog:
    def test_writes_loadable_csv(self, tmp_path):
        out = tmp_path / "catalog.csv"
        code = main(["gen-catalog", "--num-items", "150", "--out", str(out)])
        assert code == 0
        assert load_catalog(out).n_items == 150

    def test_seed_changes_output(self, tmp_path):
        a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
        main(["gen-catalog", "--num-items", "50", "--seed", "1", "--out", str(a)])
        main(["gen-catalog", "--num-items", "50", "--seed", "2", "--out", str(b)])
        main(["gen-catalog", "--num-items", "50", "--seed", "1", "--out", str(c)])
        assert sha(a) != sha(b)
        assert sha(a) == sha(c)


class TestTrain:
    def test_writes_model_and_diagnostics(self, tmp_path):
        cfg = write_fast_config(tmp_path)
        model = tmp_path / "policy.json"
        diag = tmp_path / "diag.csv"
        code = main(
            [
                "train", "--config", str(cfg), "--algorithm", "sarsa", "--gamma", "0.5",
                "--out", str(model), "--diagnostics", str(diag),
            ]
        )
        assert code == 0
        policy = load_policy(model)
        assert policy.algorithm == "sarsa"
        assert policy.gamma == 0.5
        assert diag.read_text().startswith("iteration,mean_target,td_mse,eval_play_rate")


class TestSweep:
    def test_deterministic_output(self, tmp_path):
        cfg = write_fast_config(tmp_path)
        r1, r2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        assert main(["sweep", "--config", str(cfg), "--out", str(r1)]) == 0
        assert main(["sweep", "--config", str(cfg), "--out", str(r2), "--workers", "2"]) == 0
        assert sha(r1) == sha(r2)

    def test_does_not_mutate_config(self, tmp_path):
        cfg = write_fast_config(tmp_path)
        before = sha(cfg)
        main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "r.csv")])
        assert sha(cfg) == before

    def test_episode_dump(self, tmp_path):
        cfg = write_fast_config(tmp_path, gammas=[0.8])
        out = tmp_path / "r.csv"
        dump = tmp_path / "episodes"
        main(["sweep", "--config", str(cfg), "--out", str(out), "--episodes-dir", str(dump)])
        assert len(list(dump.glob("*.jsonl"))) == 1


class TestOracle:
    def test_three_item_example(self, tmp_path, capsys):
        inst = tmp_path / "inst.json"
        inst.write_text(json.dumps({"utilities": [0.4, 0.5, 0.6], "costs": [3, 4, 5], "budget": 7}))
        code = main(["oracle", "--instance", str(inst)])
        captured = capsys.readouterr()
        assert code == 0
        assert "S={0, 1}" in captured.out
        assert "utility 0.9" in captured.out

    def test_dp_method_with_output_file(self, tmp_path):
        inst = tmp_path / "inst.json"
        inst.write_text(json.dumps({"utilities": [0.4, 0.5, 0.6], "costs": [3, 4, 5], "budget": 7}))
        out = tmp_path / "sol.json"
        code = main(["oracle", "--instance", str(inst), "--method", "dp", "--resolution", "1", "--out", str(out)])
        assert code == 0
        sol = json.loads(out.read_text())
        assert sol["selected"] == [0, 1]

    def test_bad_instance_exits_nonzero(self, tmp_path, capsys):
        inst = tmp_path / "bad.json"
        inst.write_text("{not json")
        assert main(["oracle", "--instance", str(inst)]) == 1
        assert "error" in capsys.readouterr().err


class TestReport:
    def test_report_from_results(self, tmp_path):
        cfg = write_fast_config(tmp_path, seeds=[0, 1, 2, 3, 4])
        results = tmp_path / "results.csv"
        main(["sweep", "--config", str(cfg), "--out", str(results)])
        report = tmp_path / "report.csv"
        code = main(
            ["report", "--results", str(results), "--gamma-a", "0.0", "--gamma-b", "0.8",
             "--out", str(report)]
        )
        assert code == 0
        lines = report.read_text().strip().splitlines()
        assert lines[0].startswith("algorithm,budget_loc,metric")
        assert len(lines) == 3  # header + 2 metrics x 1 algorithm x 1 budget

    def test_missing_gamma_fails(self, tmp_path, capsys):
        cfg = write_fast_config(tmp_path)
        results = tmp_path / "results.csv"
        main(["sweep", "--config", str(cfg), "--out", str(results)])
        code = main(
            ["report", "--results", str(results), "--gamma-a", "0.3", "--gamma-b", "0.8",
             "--out", str(tmp_path / "r.csv")]
        )
        assert code == 1


class TestUsage:
    def test_no_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["sweep", "--bogus"])
        assert exc.value.code == 2

    def test_module_entry_point(self, tmp_path):
        out = tmp_path / "cat.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "slatesim", "gen-catalog", "--num-items", "20", "--out", str(out)],
            capture_output=True,
            text=True,
            timeout=300,
        )
        assert proc.returncode == 0
        assert out.exists()
