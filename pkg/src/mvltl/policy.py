"""Per-task controllers trained by the cross-entropy method, and their concatenation.

A policy is affine in a small task-relative feature vector and squashed into
the action bounds. Features look at a target waypoint: the furthest one
along the segment that is within one ball radius and in line of sight, so
the controller follows the planned segment without cutting corners.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .decomposition import ReachAvoidTask, TaskLasso
from .environment import EpisodeState, RewardSpec, StepRecord, TaskEnv, discounted_return
from .workspace import Workspace


class BudgetWarning(UserWarning):
    """Training finished without any candidate reaching the goal."""


def target(x, es: EpisodeState, task: ReachAvoidTask, ws: Workspace) -> np.ndarray:
    pts = np.asarray(task.waypoints, dtype=float)
    first = max(es.closest, 0)
    cand = np.arange(first, len(pts))
    near = cand[np.sum((pts[cand] - x) ** 2, axis=1) <= task.r ** 2]
    for j in near[::-1]:
        if ws.segment_collision_free(x, pts[j]):
            return pts[j]
    return pts[min(es.closest + 1, len(pts) - 1)]


def features(es: EpisodeState, env: TaskEnv) -> np.ndarray:
    task, dyn = env.task, env.dyn
    x = dyn.proj(es.s)
    rel = target(x, es, task, env.ws) - x
    scale = max(task.r, 1e-9)
    progress = (es.closest + 1) / len(task.waypoints)
    d_min = 1.0 if math.isinf(es.d_min) else es.d_min / max(task.length, 1e-9)
    if dyn.kind == "dubins":
        th = dyn.heading(es.s)
        bx = math.cos(th) * rel[0] + math.sin(th) * rel[1]
        by = -math.sin(th) * rel[0] + math.cos(th) * rel[1]
        bearing = math.atan2(by, bx)
        dist = min(math.hypot(bx, by) / scale, 2.0)
        return np.array([1.0, bearing, math.cos(bearing), dist, progress, d_min])
    # point mass: per-axis features are stacked; the same weights act on every axis
    v = es.s[dyn.dim:]
    return np.stack([np.ones(dyn.dim), np.clip(rel / scale, -2, 2), v / dyn.v_max], axis=1)


N_PARAMS = {"dubins": 12, "quad": 3}


@dataclass(frozen=True)
class Policy:
    kind: str
    theta: tuple
    theta_std: tuple = ()
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if len(self.theta) != N_PARAMS[self.kind]:
            raise ValueError(f"{self.kind} policy needs {N_PARAMS[self.kind]} parameters")

    def act(self, phi: np.ndarray, dyn) -> np.ndarray:
        th = np.asarray(self.theta)
        if self.kind == "dubins":
            v = 1.0 / (1.0 + math.exp(-float(np.clip(th[:6] @ phi, -50, 50))))
            w = math.tanh(float(th[6:] @ phi))
            return np.array([v * dyn.v_max, w * dyn.omega_max])
        return dyn.a_max * np.tanh(phi @ th)

    def __call__(self, es: EpisodeState, env: TaskEnv) -> np.ndarray:
        return self.act(features(es, env), env.dyn)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "features": "task-relative lookahead", "theta": list(self.theta),
               "theta_std": list(self.theta_std)}
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Policy":
        return cls(data["kind"], tuple(float(v) for v in data["theta"]),
                   tuple(float(v) for v in data.get("theta_std", ())), data.get("meta", {}))

    @classmethod
    def stay(cls, kind: str) -> "Policy":
        """Stand-still controller for tasks whose start already lies in the goal ball."""
        theta = np.zeros(N_PARAMS[kind])
        if kind == "dubins":
            theta[0] = -50.0
        return cls(kind, tuple(theta), meta={"trivial": True})


def run_episode(env: TaskEnv, policy, s0, rng=None, record: bool = False, task_index: int = 0):
    """Roll out until done; returns ``(final_state, rewards, records)``."""
    es = env.reset(s0)
    rewards, records = [], []
    done = False
    while not done:
        a = policy(es, env)
        prev_v = es.violation
        es, r, done = env.step(es, a, rng)
        rewards.append(r)
        if record:
            records.append(StepRecord(es.t, tuple(float(v) for v in es.s), tuple(float(v) for v in a), r,
                                      _d(es), es.d_min, es.event, es.violation - prev_v, task_index))
    return es, rewards, records


def sample_starts(ws: Workspace, dyn, center, spread: float, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random initial states near ``center`` (heading or velocity randomized)."""
    center = np.asarray(center, dtype=float)
    out = []
    while len(out) < n:
        x = center.copy()
        if spread > 0:
            for _ in range(1000):
                d = rng.normal(size=len(center))
                cand = center + d / np.linalg.norm(d) * spread * rng.uniform() ** (1 / len(center))
                if ws.in_bounds(cand) and ws.segment_collision_free(center, cand):
                    x = cand
                    break
        out.append(dyn.initial_state(x, rng))
    return out


@dataclass(frozen=True)
class Budget:
    pop: int = 24
    elites: int = 5
    generations: int = 16
    episodes: int = 16
    seed: int = 0
    init_std: float = 1.5
    min_std: float = 0.05


def train_subtask(env: TaskEnv, starts, budget: Budget = Budget()):
    """Cross-entropy search over policy parameters; returns ``(policy, log)``.

    ``starts`` is the fixed list of initial states every candidate is scored
    on; elites are carried into the next generation, so the elite mean return
    never decreases.
    """
    kind = env.dyn.kind
    rng = np.random.default_rng(budget.seed)
    n = N_PARAMS[kind]
    mu, sd = np.zeros(n), np.full(n, budget.init_std)
    gamma = env.spec.gamma

    def score(theta):
        p = Policy(kind, tuple(theta))
        total, hits = 0.0, 0
        for s0 in starts:
            es, rewards, _ = run_episode(env, p, s0)
            total += discounted_return(rewards, gamma)
            hits += es.reached
        return total / len(starts), hits / len(starts)

    elite_thetas, elite_scores = np.zeros((0, n)), np.zeros(0)
    log = []
    best = None
    for gen in range(budget.generations):
        cand = mu + sd * rng.normal(size=(budget.pop - len(elite_thetas), n))
        scored = [score(c) for c in cand]
        scores = np.concatenate([elite_scores, [s for s, _ in scored]])
        thetas = np.vstack([elite_thetas, cand])
        order = np.argsort(-scores, kind="stable")[:budget.elites]
        elite_thetas, elite_scores = thetas[order], scores[order]
        mu = elite_thetas.mean(axis=0)
        sd = np.maximum(elite_thetas.std(axis=0), budget.min_std)
        reach = max((h for _, h in scored), default=0.0)
        if best is None or elite_scores[0] > best[0]:
            best = (float(elite_scores[0]), elite_thetas[0].copy())
        log.append({"generation": gen, "mean": float(scores.mean()), "max": float(scores.max()),
                    "elite_threshold": float(elite_scores[-1]), "elite_mean": float(elite_scores.mean()),
                    "best_reach_rate": float(reach)})
    if not any(r["best_reach_rate"] > 0 for r in log) and score(best[1])[1] == 0:
        warnings.warn(f"task {env.task.index}: no candidate reached the goal", BudgetWarning)
    return Policy(kind, tuple(float(v) for v in best[1]), tuple(float(v) for v in sd),
                  {"task": env.task.index, "score": best[0]}), log


def success_rate(env: TaskEnv, policy, starts, rng=None) -> float:
    return float(np.mean([run_episode(env, policy, s0, rng)[0].reached for s0 in starts]))


@dataclass
class GlobalPolicy:
    """Switched controller: prefix policies once, then suffix policies forever."""

    tasks: TaskLasso
    policies: list
    charges: list  # violation charged when each task reaches its goal

    def __post_init__(self):
        n = len(self.tasks.tasks)
        if len(self.policies) != n or len(self.charges) != n:
            raise ValueError(f"need one policy and one charge per task ({n}), got "
                             f"{len(self.policies)} and {len(self.charges)}")

    def order(self, cycles: int) -> list[int]:
        """Task indices executed for ``cycles`` passes of the suffix."""
        k = len(self.tasks.prefix_tasks)
        suffix = list(range(k, len(self.tasks.tasks)))
        return list(range(k)) + suffix * cycles

    def to_json(self) -> dict:
        return {"tasks": self.tasks.to_json(), "policies": [p.to_json() for p in self.policies],
                "charges": list(self.charges)}

    @classmethod
    def from_json(cls, data: dict) -> "GlobalPolicy":
        return cls(TaskLasso.from_json(data["tasks"]), [Policy.from_json(p) for p in data["policies"]],
                   [float(c) for c in data["charges"]])

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def concatenate(tasks: TaskLasso, policies, charges) -> GlobalPolicy:
    return GlobalPolicy(tasks, list(policies), [float(c) for c in charges])


def make_env(ws: Workspace, task: ReachAvoidTask, dyn, charge: float = 0.0, **spec_kw) -> TaskEnv:
    return TaskEnv(ws, task, dyn, RewardSpec.for_task(task, dyn, **spec_kw), boundary_violation=charge)


@dataclass
class EpisodeResult:
    completed: list  # task indices reached in order
    failed_task: int | None
    event: str  # "ok", "collision" or "timeout"
    cycle_violations: list
    returns: float
    records: list = field(default_factory=list)


def run_global(gp: GlobalPolicy, ws: Workspace, dyn, s0, cycles: int, rng=None, record: bool = False,
               **spec_kw) -> EpisodeResult:
    """Execute the switched controller; the dynamic state carries over between tasks."""
    k = len(gp.tasks.prefix_tasks)
    envs = [make_env(ws, t, dyn, c, **spec_kw) for t, c in zip(gp.tasks.tasks, gp.charges)]
    completed, cyc, ret, records = [], [], 0.0, []
    s = np.asarray(s0, dtype=float)
    cur = 0.0
    for pos, i in enumerate(gp.order(cycles)):
        env = envs[i]
        es = env.reset(s)
        rewards = []
        while not es.done:
            a = gp.policies[i](es, env)
            prev_v = es.violation
            es, r, _ = env.step(es, a, rng)
            rewards.append(r)
            if record:
                records.append(StepRecord(es.t, tuple(float(v) for v in es.s), tuple(float(v) for v in a), r,
                                          _d(es), es.d_min, es.event, es.violation - prev_v, i))
        ret += discounted_return(rewards, env.spec.gamma)
        if not es.reached:
            return EpisodeResult(completed, i, "collision" if es.event == "collision" else "timeout", cyc, ret,
                                 records)
        completed.append(i)
        s = es.s
        if i >= k:
            cur += es.violation
            if i == len(gp.tasks.tasks) - 1:
                cyc.append(cur)
                cur = 0.0
    return EpisodeResult(completed, None, "ok", cyc, ret, records)


def _d(es: EpisodeState) -> float:
    return es.d_min if es.event in ("goal", "progress") else math.nan


def evaluate(gp: GlobalPolicy, ws: Workspace, dyn, episodes: int, cycles: int, seed: int = 0, **spec_kw) -> dict:
    """Monte-Carlo metrics from the initial point with randomized heading or velocity."""
    rng = np.random.default_rng(seed)
    results = [run_global(gp, ws, dyn, dyn.initial_state(ws.x0, rng), cycles, rng, **spec_kw)
               for _ in range(episodes)]
    ok = [r for r in results if r.event == "ok"]
    per_cycle = [v for r in ok for v in r.cycle_violations]
    handoff = [r for r in results if r.failed_task is not None and r.completed]
    return {
        "episodes": episodes,
        "success_rate": len(ok) / episodes,
        "collision_rate": sum(r.event == "collision" for r in results) / episodes,
        "timeout_rate": sum(r.event == "timeout" for r in results) / episodes,
        "handoff_failure_rate": len(handoff) / episodes,
        "mean_violation_per_cycle": float(np.mean(per_cycle)) if per_cycle else math.nan,
        "max_violation_per_cycle": float(np.max(per_cycle)) if per_cycle else math.nan,
        "min_violation_per_cycle": float(np.min(per_cycle)) if per_cycle else math.nan,
        "mean_return": float(np.mean([r.returns for r in results])),
    }


def start_sources(tasks: TaskLasso, x0) -> list[list[tuple]]:
    """For each task, the ``(center, spread)`` regions a robot can start from.

    A task starts where the previous one ended, somewhere inside the previous
    goal ball; the first suffix task is also entered from the end of the cycle.
    """
    all_tasks = tasks.tasks
    k = len(tasks.prefix_tasks)
    out = []
    for i, t in enumerate(all_tasks):
        src = [(tuple(x0), 0.0)] if i == 0 else [(all_tasks[i - 1].goal, all_tasks[i - 1].r)]
        if i == k and tasks.suffix_tasks and len(all_tasks) > 1:
            last = all_tasks[-1]
            src.append((last.goal, last.r))
        out.append(src)
    return out


def training_starts(ws: Workspace, dyn, sources, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    per = [n // len(sources) + (j < n % len(sources)) for j in range(len(sources))]
    return [s for (c, spread), m in zip(sources, per) for s in sample_starts(ws, dyn, c, spread, m, rng)]


def train_all(ws: Workspace, tasks: TaskLasso, charges, dyn, budget: Budget = Budget(), eval_episodes: int = 100,
              **spec_kw):
    """Train one policy per task; returns ``(GlobalPolicy, logs, per-task success rates)``."""
    policies, logs, rates = [], [], []
    for i, (task, src) in enumerate(zip(tasks.tasks, start_sources(tasks, ws.x0))):
        env = make_env(ws, task, dyn, charges[i], **spec_kw)
        rng = np.random.default_rng([budget.seed, i])
        starts = training_starts(ws, dyn, src, budget.episodes, rng)
        if len(task.waypoints) == 1 and all(spread == 0 and np.linalg.norm(np.subtract(c, task.goal)) < task.r
                                            for c, spread in src):
            pol, log = Policy.stay(dyn.kind), []
        else:
            pol, log = train_subtask(env, starts, Budget(**{**budget.__dict__, "seed": budget.seed * 1000 + i}))
        policies.append(pol)
        logs.append(log)
        test = training_starts(ws, dyn, src, eval_episodes, np.random.default_rng([budget.seed, i, 1]))
        rates.append(success_rate(env, pol, test))
    return concatenate(tasks, policies, charges), logs, rates
