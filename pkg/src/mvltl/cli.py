"""Command-line driver: plan, certify, decompose, train, evaluate, study and report.

Every command reads and writes plain JSON/CSV under ``--out``. Later stages
find the artifacts of earlier ones there, so a full run is

    mvltl plan --scenario enclosed_g3 --clearance 0.3
    mvltl oracle
    mvltl decompose
    mvltl train
    mvltl eval
    mvltl report

Exit codes: 0 ok, 1 usage or input error, 2 no plan exists, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import scenarios
from .decomposition import TaskLasso, decompose, segment_violations
from .environment import Dubins, KinematicQuad, dynamics_from_json, write_atomic_csv, write_trace_csv
from .ltl import LtlSyntaxError, UndeclaredAtomError, parse_ltl, to_nba
from .planner import (GridTooLargeError, LassoPlan, NoPlanError, PlanParams, default_beta, grid_oracle_plan,
                      plan_lasso)
from .policy import Budget, GlobalPolicy, evaluate, run_global, train_all
from .scenarios.random import generate
from .workspace import ScenarioError, Workspace

EXIT_OK, EXIT_USAGE, EXIT_NO_PLAN, EXIT_INTERNAL = 0, 1, 2, 3
FORMAT_VERSION = 1


class UsageError(Exception):
    """Bad input or a missing artifact; reported with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- artifact io ------------------------------------------------------------

def dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_json(path: Path, data) -> None:
    write_text(path, dumps(data))


def read_artifact(out: Path, name: str, producer: str) -> dict:
    p = out / name
    if not p.exists():
        raise UsageError(f"{p} not found; run `mvltl {producer}` first")
    with open(p) as fh:
        return json.load(fh)


def load_scenario(spec: str) -> Workspace:
    if spec in scenarios.names():
        return scenarios.load(spec)
    if not Path(spec).exists():
        raise UsageError(f"scenario {spec!r} is neither a bundled name ({', '.join(scenarios.names())}) nor a file")
    return Workspace.load(spec)


def automaton(ws: Workspace, formula: str | None):
    text = formula or ws.meta.get("formula")
    if not text:
        raise UsageError("no formula given and the scenario does not define one; pass --formula")
    return text, to_nba(parse_ltl(text), ap=ws.ap)


def plan_context(args, plan_data: dict):
    """Scenario, formula and planning workspace recorded with a plan (flags override)."""
    meta = plan_data.get("meta", {})
    ws = load_scenario(args.scenario or meta["scenario"])
    text, nba = automaton(ws, args.formula or meta.get("formula"))
    clearance = float(meta.get("clearance", 0.0))
    return ws, (ws.inflated(clearance) if clearance > 0 else ws), text, nba, meta


def _plan_summary(plan: LassoPlan) -> dict:
    return {"violation": {"prefix": plan.prefix_violation, "suffix": plan.suffix_violation},
            "length": plan.prefix_length + plan.suffix_length,
            "nodes": {"prefix": len(plan.prefix), "suffix": len(plan.suffix)}}


# --- commands ---------------------------------------------------------------

def cmd_plan(args) -> int:
    if not args.scenario:
        raise UsageError("plan needs --scenario")
    if args.clearance < 0:
        raise UsageError("--clearance must be non-negative")
    ws = load_scenario(args.scenario)
    text, nba = automaton(ws, args.formula)
    planning_ws = ws.inflated(args.clearance) if args.clearance > 0 else ws
    try:
        params = PlanParams(eta=args.eta, max_iters=args.iters, seed=args.seed, feasible_only=args.feasible_only)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        plan = plan_lasso(planning_ws, nba, params)
    except NoPlanError as exc:
        print(f"no plan: {exc}", file=sys.stderr)
        if exc.reached_states:
            print(f"automaton states reached: {sorted(exc.reached_states)}", file=sys.stderr)
        return EXIT_NO_PLAN
    data = plan.to_json(beta=default_beta(planning_ws))
    data["meta"] = {**data.get("meta", {}), "scenario": args.scenario, "formula": text, "eta": args.eta,
                    "clearance": args.clearance, "feasible_only": args.feasible_only}
    data["version"] = FORMAT_VERSION
    write_json(args.out / "plan.json", data)
    print(dumps(_plan_summary(plan)), end="")
    return EXIT_OK


def cmd_oracle(args) -> int:
    plan_data = read_artifact(args.out, "plan.json", "plan")
    _, planning_ws, _, nba, meta = plan_context(args, plan_data)
    plan = LassoPlan.from_json(plan_data)
    try:
        oracle = grid_oracle_plan(planning_ws, nba, args.grid_step, eta=meta["eta"],
                                  feasible_only=bool(meta.get("feasible_only", False)))
    except GridTooLargeError as exc:
        raise UsageError(f"{exc} (try --grid-step {exc.suggested_step:g})") from exc
    except NoPlanError as exc:
        print(f"no plan on the grid: {exc}", file=sys.stderr)
        return EXIT_NO_PLAN
    data = oracle.to_json()
    data["version"] = FORMAT_VERSION
    write_json(args.out / "oracle_plan.json", data)
    report = {
        "planner_violation": [plan.suffix_violation, plan.prefix_violation],
        "oracle_violation": [oracle.suffix_violation, oracle.prefix_violation],
        "violation_equal": plan.key[:2] == oracle.key[:2],
        "length_ratio": plan.length / oracle.length if oracle.length > 0 else math.nan,
        "grid_step": args.grid_step,
    }
    write_json(args.out / "oracle_report.json", report)
    print(dumps(report), end="")
    return EXIT_OK


def cmd_decompose(args) -> int:
    plan_data = read_artifact(args.out, "plan.json", "plan")
    _, planning_ws, _, nba, meta = plan_context(args, plan_data)
    plan = LassoPlan.from_json(plan_data)
    r = args.radius if args.radius is not None else 2 * float(meta["eta"])
    tasks = decompose(plan, r)
    charges = [s.total for s in segment_violations(plan, nba, planning_ws)]
    data = tasks.to_json()
    data["meta"] = {**data.get("meta", {}), "charges": charges, "r": r}
    write_json(args.out / "tasks.json", data)
    print(f"{len(tasks.prefix_tasks)} prefix and {len(tasks.suffix_tasks)} suffix tasks; charges {charges}")
    return EXIT_OK


def _dynamics(name: str):
    return {"dubins": Dubins, "quad": lambda: KinematicQuad(dim=2)}[name]()


def cmd_train(args) -> int:
    tasks_data = read_artifact(args.out, "tasks.json", "decompose")
    plan_data = read_artifact(args.out, "plan.json", "plan")
    ws, _, _, _, _ = plan_context(args, plan_data)
    tasks = TaskLasso.from_json(tasks_data)
    charges = tasks_data["meta"]["charges"]
    dyn = _dynamics(args.dynamics)
    budget = Budget(pop=args.pop, elites=args.elites, generations=args.generations, episodes=args.episodes,
                    seed=args.seed)
    gp, logs, rates = train_all(ws, tasks, charges, dyn, budget, eval_episodes=args.eval_episodes)
    for i, (pol, log) in enumerate(zip(gp.policies, logs)):
        write_json(args.out / "policies" / f"task_{i:02d}.json", pol.to_json())
        (args.out / "logs").mkdir(parents=True, exist_ok=True)
        header = ["generation", "mean", "max", "elite_threshold", "elite_mean", "best_reach_rate"]
        write_atomic_csv(args.out / "logs" / f"task_{i:02d}.csv", header, ([row[h] for h in header] for row in log))
    write_json(args.out / "global_policy.json", {**gp.to_json(), "dynamics": dyn.to_json(),
                                                 "budget": budget.__dict__, "version": FORMAT_VERSION})
    summary = {"per_task_success": rates, "eval_episodes": args.eval_episodes}
    write_json(args.out / "train_summary.json", summary)
    print(dumps(summary), end="")
    return EXIT_OK


def cmd_eval(args) -> int:
    gp_data = read_artifact(args.out, "global_policy.json", "train")
    plan_data = read_artifact(args.out, "plan.json", "plan")
    ws, _, _, _, _ = plan_context(args, plan_data)
    gp = GlobalPolicy.from_json(gp_data)
    dyn = dynamics_from_json(gp_data["dynamics"])
    metrics = evaluate(gp, ws, dyn, args.episodes, args.cycles, seed=args.seed)
    metrics["cycles"] = args.cycles
    metrics["plan_suffix_violation"] = plan_data["violation"]["suffix"]
    write_json(args.out / "metrics.json", {k: (None if isinstance(v, float) and math.isnan(v) else v)
                                           for k, v in metrics.items()})
    rng = np.random.default_rng(args.seed)
    trace = run_global(gp, ws, dyn, dyn.initial_state(ws.x0, rng), args.cycles, rng, record=True)
    write_trace_csv(args.out / "trace.csv", trace.records)
    print(dumps(metrics), end="")
    return EXIT_OK


@lru_cache(maxsize=8)
def _study_automaton(formula: str, ap: tuple):
    return to_nba(parse_ltl(formula), ap=ap)


def study_trial(mode: str, seed: int, n_goals: int, eta: float, iters: int) -> list:
    ws = generate(seed, n_goals=n_goals, eta=eta)
    nba = _study_automaton(ws.meta["formula"], ws.ap)
    enclosed = len(ws.meta["enclosed"])
    try:
        plan = plan_lasso(ws, nba, PlanParams(eta=eta, max_iters=iters, seed=seed,
                                              feasible_only=mode == "feasible-only"))
    except NoPlanError:
        return [mode, seed, enclosed, 0, ""]
    return [mode, seed, enclosed, 1, plan.prefix_violation + plan.suffix_violation]


def study_summary(rows) -> dict:
    out = {}
    for mode in sorted({r[0] for r in rows}):
        mine = [r for r in rows if r[0] == mode]
        enclosed = [r for r in mine if r[2] > 0]
        out[mode] = {"trials": len(mine), "success_rate": sum(r[3] for r in mine) / len(mine),
                     "enclosed_trials": len(enclosed),
                     "enclosed_success_rate": sum(r[3] for r in enclosed) / len(enclosed) if enclosed else None}
    return out


def cmd_random_study(args) -> int:
    modes = ["relaxed", "feasible-only"] if args.mode == "both" else [args.mode]
    jobs = [(m, args.seed + t, args.n_goals, args.eta, args.iters) for t in range(args.trials) for m in modes]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(study_trial, *zip(*jobs)))
    else:
        rows = [study_trial(*j) for j in jobs]
    write_atomic_csv(_mkdir(args.out) / "random_study.csv", ["mode", "seed", "enclosed_goals", "planned", "violation"],
                     rows)
    summary = study_summary(rows)
    write_json(args.out / "random_study.json", summary)
    print(dumps(summary), end="")
    return EXIT_OK


def _mkdir(p: Path) -> Path:
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_report(args) -> int:
    logs = sorted((args.out / "logs").glob("task_*.csv"))
    study = args.out / "random_study.csv"
    if not logs and not study.exists():
        raise UsageError(f"no training logs in {args.out / 'logs'}; run `mvltl train` first")
    written = []
    for p in logs:
        with open(p) as fh:
            rows = list(csv.reader(fh))
        written.append(_write_dat(args.out / "report" / f"{p.stem}.dat", rows))
    if study.exists():
        with open(study) as fh:
            rows = [r for r in csv.reader(fh)]
        table = [["mode", "success_rate", "enclosed_success_rate"]]
        for mode, s in study_summary([[r[0], int(r[1]), int(r[2]), int(r[3]), r[4]] for r in rows[1:]]).items():
            rate = s["enclosed_success_rate"]
            table.append([mode, f"{s['success_rate']:g}", "nan" if rate is None else f"{rate:g}"])
        written.append(_write_dat(args.out / "report" / "random_study.dat", table))
    for w in written:
        print(w)
    return EXIT_OK


def _write_dat(path: Path, rows) -> Path:
    header, body = rows[0], rows[1:]
    lines = ["# " + " ".join(header)] + [" ".join(r) for r in body]
    write_text(path, "\n".join(lines) + "\n")
    return path


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--scenario", help="bundled scenario name or path to a scenario JSON file")
    common.add_argument("--formula", help="LTL formula (defaults to the scenario's)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, default=Path("out"), help="artifact directory")
    common.add_argument("--jobs", type=int, default=1, help="maximum worker processes")

    parser = _Parser(prog="mvltl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", parents=[common], help="minimum-violation lasso plan")
    p.add_argument("--eta", type=float, default=1.0, help="maximum segment length")
    p.add_argument("--iters", type=int, default=30_000)
    p.add_argument("--clearance", type=float, default=0.0, help="inflate obstacles by this margin for planning")
    p.add_argument("--feasible-only", action="store_true", help="forbid every violating transition")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("oracle", parents=[common], help="grid shortest-path certificate for plan.json")
    p.add_argument("--grid-step", type=float, default=0.25)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("decompose", parents=[common], help="split plan.json into reach-avoid tasks")
    p.add_argument("--radius", type=float, default=None, help="waypoint ball radius (default 2 eta)")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("train", parents=[common], help="train one policy per task")
    p.add_argument("--dynamics", choices=["dubins", "quad"], default="dubins")
    p.add_argument("--pop", type=int, default=Budget.pop)
    p.add_argument("--elites", type=int, default=Budget.elites)
    p.add_argument("--generations", type=int, default=Budget.generations)
    p.add_argument("--episodes", type=int, default=Budget.episodes, help="training starts per candidate")
    p.add_argument("--eval-episodes", type=int, default=100, help="held-out starts per task")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate the concatenated policy")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--cycles", type=int, default=3)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("random-study", parents=[common], help="plan-existence study on random scenarios")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--n-goals", type=int, default=12)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--iters", type=int, default=20_000)
    p.add_argument("--mode", choices=["relaxed", "feasible-only", "both"], default="both")
    p.set_defaults(func=cmd_random_study)

    p = sub.add_parser("report", parents=[common], help="plot-ready .dat files from logs and studies")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("mvltl: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ScenarioError, LtlSyntaxError, UndeclaredAtomError, FileNotFoundError) as exc:
        print(f"mvltl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - last-resort report for the exit code contract
        print(f"mvltl {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
