"""Split a lasso plan into reach-avoid tasks of constant automaton state.

The prefix tasks cover ``prefix[:-1]``; the cycle root ``suffix[0]`` starts the
first suffix task, so the geometric path is the concatenation of all task
waypoints. Each task is left through one product edge (an automaton switch,
the step into the cycle root, or the edge closing the cycle); its violation
is charged to the task it leaves, using the label of the task's goal point.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ltl.guards import violation_distance
from .ltl.nba import Nba
from .planner.product import LassoPlan, ProductState
from .workspace import Workspace


@dataclass(frozen=True)
class ReachAvoidTask:
    index: int
    q: int
    waypoints: tuple
    r: float
    is_suffix: bool
    dist_to_go: tuple = ()

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("a task needs at least one waypoint")
        if not self.r > 0:
            raise ValueError("ball radius must be positive")

    @property
    def goal(self) -> tuple:
        return self.waypoints[-1]

    @property
    def length(self) -> float:
        return float(self.dist_to_go[0]) if self.dist_to_go else path_length(self.waypoints)

    def to_json(self) -> dict:
        return {"index": self.index, "q": self.q, "waypoints": [list(w) for w in self.waypoints],
                "dist_to_go": list(self.dist_to_go), "r": self.r, "is_suffix": self.is_suffix}

    @classmethod
    def from_json(cls, data: dict) -> "ReachAvoidTask":
        return cls(index=int(data["index"]), q=int(data["q"]),
                   waypoints=tuple(tuple(float(v) for v in w) for w in data["waypoints"]),
                   r=float(data["r"]), is_suffix=bool(data["is_suffix"]),
                   dist_to_go=tuple(float(v) for v in data.get("dist_to_go", ())))


@dataclass(frozen=True)
class TaskLasso:
    prefix_tasks: tuple
    suffix_tasks: tuple
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def tasks(self) -> tuple:
        return self.prefix_tasks + self.suffix_tasks

    def waypoints(self) -> list[tuple]:
        """Concatenated waypoints: the plan's prefix followed by one pass of its cycle."""
        return [w for t in self.tasks for w in t.waypoints]

    def to_json(self) -> dict:
        out = {"prefix": [t.to_json() for t in self.prefix_tasks],
               "suffix": [t.to_json() for t in self.suffix_tasks]}
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_json(cls, data: dict) -> "TaskLasso":
        return cls(tuple(ReachAvoidTask.from_json(t) for t in data["prefix"]),
                   tuple(ReachAvoidTask.from_json(t) for t in data["suffix"]), data.get("meta", {}))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def path_length(points) -> float:
    return float(sum(_steps(points)))


def _steps(points) -> np.ndarray:
    # math.dist rescales internally, so tiny but distinct steps stay positive
    pts = [tuple(map(float, p)) for p in points]
    return np.array([math.dist(a, b) for a, b in zip(pts, pts[1:])], dtype=float)


def attach_dist(task: ReachAvoidTask) -> ReachAvoidTask:
    """Fill ``dist_to_go`` with the path length remaining from each waypoint to the goal."""
    steps = _steps(task.waypoints)
    togo = np.concatenate([np.cumsum(steps[::-1])[::-1], [0.0]])
    return replace(task, dist_to_go=tuple(float(v) for v in togo))


def _runs(states) -> list[list[ProductState]]:
    runs: list[list[ProductState]] = []
    for s in states:
        if runs and runs[-1][-1].q == s.q:
            runs[-1].append(s)
        else:
            runs.append([s])
    return runs


def decompose(plan: LassoPlan, r: float) -> TaskLasso:
    """Maximal runs of constant automaton state become one task each."""
    if not r > 0:
        raise ValueError("ball radius must be positive")
    tasks = []
    for is_suffix, states in ((False, plan.prefix[:-1]), (True, plan.suffix)):
        for run in _runs(states):
            t = ReachAvoidTask(index=len(tasks), q=run[0].q, waypoints=tuple(tuple(s.x) for s in run), r=r,
                               is_suffix=is_suffix)
            tasks.append(attach_dist(t))
    prefix = tuple(t for t in tasks if not t.is_suffix)
    suffix = tuple(t for t in tasks if t.is_suffix)
    return TaskLasso(prefix, suffix, {"source_key": list(plan.key)})


@dataclass(frozen=True)
class SegmentViolation:
    """Violation charged to one task: along its own run and on the edge that leaves it."""

    index: int
    is_suffix: bool
    q: int
    next_q: int
    internal: float
    boundary: float

    @property
    def is_switch(self) -> bool:
        return self.q != self.next_q

    @property
    def total(self) -> float:
        return self.internal + self.boundary


def segment_violations(plan: LassoPlan, nba: Nba, ws: Workspace) -> list[SegmentViolation]:
    """Per-task violation costs; prefix entries sum to the prefix violation, suffix entries to the suffix."""

    def cost(a: ProductState, b: ProductState) -> float:
        guard = nba.guard(a.q, b.q)
        if guard is None:
            raise ValueError(f"automaton has no edge {a.q} -> {b.q}")
        return float(violation_distance(ws.label_of(a.x), guard))

    out = []
    for is_suffix, states, after in ((False, list(plan.prefix[:-1]), plan.suffix[0]),
                                     (True, list(plan.suffix), plan.suffix[0])):
        runs = _runs(states)
        for i, run in enumerate(runs):
            nxt = runs[i + 1][0] if i + 1 < len(runs) else after
            internal = sum(cost(a, b) for a, b in zip(run, run[1:]))
            out.append(SegmentViolation(len(out), is_suffix, run[0].q, nxt.q, float(internal), cost(run[-1], nxt)))
    return out
