import csv
import json

import numpy as np
import pytest

from mvltl.cli import main, study_summary, study_trial
from mvltl.scenarios.random import enclosed_goals, generate, ring
from mvltl.workspace import Obstacle, Region, Shape, Workspace

FAST = ["--iters", "4000"]
TINY_TRAIN = ["--pop", "6", "--elites", "2", "--generations", "2", "--episodes", "2", "--eval-episodes", "4"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def corridor_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("corridor")
    assert run("plan", "--scenario", "corridor", "--out", out, *FAST) == 0
    return out


@pytest.fixture(scope="module")
def trained(corridor_out):
    assert run("decompose", "--out", corridor_out) == 0
    assert run("train", "--out", corridor_out, *TINY_TRAIN) == 0
    return corridor_out


class TestPlan:
    def test_corridor_feasible(self, corridor_out):
        data = json.loads((corridor_out / "plan.json").read_text())
        assert data["violation"]["prefix"] == data["violation"]["suffix"] == 0.0
        assert data["meta"]["scenario"] == "corridor" and data["meta"]["eta"] == 1.0

    def test_enclosed_g3_suffix_violation(self, tmp_path):
        # the grid oracle gives suffix violation 1 on this scenario
        assert run("plan", "--scenario", "enclosed_g3", "--out", tmp_path, "--iters", "10000") == 0
        assert json.loads((tmp_path / "plan.json").read_text())["violation"]["suffix"] == 1.0

    def test_byte_identical(self, tmp_path, corridor_out):
        assert run("plan", "--scenario", "corridor", "--out", tmp_path, *FAST) == 0
        assert (tmp_path / "plan.json").read_bytes() == (corridor_out / "plan.json").read_bytes()

    def test_malformed_scenario(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"bounds": {"min": [0, 0],\n "max": [1, 1]')
        assert run("plan", "--scenario", bad, "--out", tmp_path) == 1
        assert "line 2" in capsys.readouterr().err
        assert not (tmp_path / "plan.json").exists()

    def test_bad_formula(self, tmp_path, capsys):
        assert run("plan", "--scenario", "corridor", "--formula", "[]<>(G1 &&", "--out", tmp_path) == 1

    def test_undeclared_atom(self, tmp_path):
        assert run("plan", "--scenario", "corridor", "--formula", "<>Z", "--out", tmp_path) == 1

    def test_unknown_option_exits_1(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            run("plan", "--bogus")
        assert e.value.code == 1

    def test_no_plan(self, tmp_path, capsys):
        ws = Workspace(lo=(0, 0), hi=(10, 10), x0=(1, 1), ap=("G1", "O"),
                       regions=(Region("G1", Shape.box((8, 8), (9, 9))),),
                       obstacles=(Obstacle(Shape.box((0.5, 0.5), (1.5, 1.5))),))
        p = tmp_path / "sealed.json"
        p.write_text(json.dumps({**ws.to_json(), "formula": "[]!O && []<>G1"}))
        assert run("plan", "--scenario", p, "--out", tmp_path, *FAST) == 2
        assert "no plan" in capsys.readouterr().err


class TestOracle:
    def test_corridor_report(self, corridor_out):
        assert run("oracle", "--out", corridor_out) == 0
        rep = json.loads((corridor_out / "oracle_report.json").read_text())
        assert rep["violation_equal"] and rep["planner_violation"] == rep["oracle_violation"] == [0.0, 0.0]
        assert 0.75 <= rep["length_ratio"] <= 1.25

    def test_grid_too_large(self, corridor_out, capsys):
        assert run("oracle", "--out", corridor_out, "--grid-step", "0.001") == 1
        assert "--grid-step" in capsys.readouterr().err

    def test_needs_plan(self, tmp_path, capsys):
        assert run("oracle", "--out", tmp_path) == 1
        assert "mvltl plan" in capsys.readouterr().err


class TestPipeline:
    def test_tasks(self, trained):
        data = json.loads((trained / "tasks.json").read_text())
        assert data["meta"]["charges"] == [0.0] * (len(data["prefix"]) + len(data["suffix"]))

    def test_train_outputs(self, trained):
        n = len(json.loads((trained / "tasks.json").read_text())["meta"]["charges"])
        assert len(list((trained / "policies").glob("*.json"))) == n
        assert len(list((trained / "logs").glob("*.csv"))) == n

    def test_eval_and_determinism(self, trained):
        assert run("eval", "--out", trained, "--episodes", "3", "--cycles", "1") == 0
        first = (trained / "metrics.json").read_bytes()
        assert run("eval", "--out", trained, "--episodes", "3", "--cycles", "1") == 0
        assert (trained / "metrics.json").read_bytes() == first
        rows = list(csv.reader((trained / "trace.csv").open()))
        assert rows[0][0] == "t" and len(rows) > 1

    def test_report(self, trained):
        assert run("report", "--out", trained) == 0
        dats = sorted((trained / "report").glob("task_*.dat"))
        assert dats
        lines = [ln for ln in dats[0].read_text().splitlines() if not ln.startswith("#")]
        assert all(len(ln.split()) == 6 for ln in lines)

    def test_eval_without_train(self, tmp_path, corridor_out, capsys):
        (tmp_path / "plan.json").write_bytes((corridor_out / "plan.json").read_bytes())
        assert run("eval", "--out", tmp_path) == 1
        assert "mvltl train" in capsys.readouterr().err

    def test_train_without_decompose(self, tmp_path, capsys):
        assert run("train", "--out", tmp_path) == 1
        assert "mvltl decompose" in capsys.readouterr().err

    def test_report_without_train(self, tmp_path, capsys):
        assert run("report", "--out", tmp_path) == 1
        assert "mvltl train" in capsys.readouterr().err


class TestRandomScenarios:
    def test_deterministic(self):
        assert generate(3).to_json() == generate(3).to_json()

    @pytest.mark.parametrize("seed", range(6))
    def test_goals_disjoint_and_free(self, seed):
        ws = generate(seed)
        centers = np.array([r.shape.center for r in ws.regions])
        assert len(centers) == 12 and all(r.shape.radius == 1.0 for r in ws.regions)
        gaps = np.linalg.norm(centers[:, None] - centers[None], axis=-1) + 10 * np.eye(12)
        assert gaps.min() > 2.0
        rng = np.random.default_rng(seed)
        for reg in ws.regions:
            pts = np.array([reg.shape.sample(rng) for _ in range(50)])
            assert not any(ws.in_obstacle(p) for p in pts)
        assert not ws.in_obstacle(ws.x0)

    def test_ring_is_enclosed(self):
        ws = Workspace(lo=(0, 0), hi=(10, 10), x0=(1, 1), ap=("G1", "G2", "O"),
                       regions=(Region("G1", Shape.ball((5, 5), 1.0)), Region("G2", Shape.ball((8, 2), 1.0))),
                       obstacles=tuple(Obstacle(s, "enclosure") for s in ring((5, 5), 1.1, 0.2)))
        assert enclosed_goals(ws) == ["G1"]
        assert enclosed_goals(ws.without_group("enclosure")) == []

    def test_gap_in_ring_is_open(self):
        walls = ring((5, 5), 1.1, 0.2)[:3]
        ws = Workspace(lo=(0, 0), hi=(10, 10), x0=(1, 1), ap=("G1", "O"),
                       regions=(Region("G1", Shape.ball((5, 5), 1.0)),), obstacles=tuple(Obstacle(s) for s in walls))
        assert enclosed_goals(ws) == []

    def test_some_seeds_enclose(self):
        flags = [bool(generate(s).meta["enclosed"]) for s in range(10)]
        assert any(flags) and not all(flags)


class TestRandomStudy:
    def test_feasible_only_fails_when_enclosed(self):
        seed = next(s for s in range(20) if generate(s).meta["enclosed"])
        assert study_trial("feasible-only", seed, 12, 0.5, 3000)[3] == 0
        assert study_trial("relaxed", seed, 12, 0.5, 3000)[3] == 1

    def test_all_reachable_both_succeed(self):
        # few goals keep the feasible search easy
        seed = next(s for s in range(20) if not generate(s, n_goals=3).meta["enclosed"])
        for mode in ("relaxed", "feasible-only"):
            row = study_trial(mode, seed, 3, 0.5, 20_000)
            assert row[3] == 1 and row[4] == 0

    def test_summary(self):
        rows = [["relaxed", 0, 1, 1, 1.0], ["relaxed", 1, 0, 1, 0.0],
                ["feasible-only", 0, 1, 0, ""], ["feasible-only", 1, 0, 1, 0.0]]
        s = study_summary(rows)
        assert s["relaxed"]["success_rate"] == 1.0
        assert s["feasible-only"]["success_rate"] == 0.5 and s["feasible-only"]["enclosed_success_rate"] == 0.0

    def test_cli(self, tmp_path):
        argv = ["random-study", "--out", tmp_path, "--trials", "2", "--n-goals", "3", "--iters", "2000"]
        assert run(*argv) == 0
        rows = list(csv.reader((tmp_path / "random_study.csv").open()))
        assert rows[0] == ["mode", "seed", "enclosed_goals", "planned", "violation"] and len(rows) == 5
        first = (tmp_path / "random_study.csv").read_bytes()
        assert run(*argv) == 0
        assert (tmp_path / "random_study.csv").read_bytes() == first
        assert run("report", "--out", tmp_path) == 0
        assert (tmp_path / "report" / "random_study.dat").exists()
