"""Simulated reach-avoid episodes: dynamics, progression reward and violation accounting.

An episode follows one :class:`~mvltl.decomposition.ReachAvoidTask`. The
reward has strict priorities: collision, then reaching the goal ball
(``D == 0``), then strict progress (``D < d_min``), else zero. ``D`` is the
smallest cost-to-go among waypoint balls containing the projected position.
"""
from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .decomposition import ReachAvoidTask
from .workspace import Workspace

REWARD_EVENTS = ("collision", "goal", "progress", "none")


def rk4(f, s: np.ndarray, a: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(s, a)
    k2 = f(s + 0.5 * dt * k1, a)
    k3 = f(s + 0.5 * dt * k2, a)
    k4 = f(s + dt * k3, a)
    return s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass(frozen=True)
class Dubins:
    """Unicycle with state ``(x, y, heading)`` and controls ``(speed, turn rate)``."""

    v_max: float = 1.0
    omega_max: float = 1.5
    dt: float = 0.1
    noise_std: float = 0.0
    kind = "dubins"
    state_dim = 3
    action_dim = 2
    dim = 2

    def __post_init__(self):
        if not (self.dt > 0 and self.v_max > 0 and self.omega_max > 0):
            raise ValueError("dt and control bounds must be positive")

    @property
    def low(self) -> np.ndarray:
        return np.array([0.0, -self.omega_max])

    @property
    def high(self) -> np.ndarray:
        return np.array([self.v_max, self.omega_max])

    @staticmethod
    def f(s, a):
        return np.array([a[0] * math.cos(s[2]), a[0] * math.sin(s[2]), a[1]])

    def step(self, s, a, rng=None) -> np.ndarray:
        a = np.clip(np.asarray(a, dtype=float), self.low, self.high)
        if self.noise_std and rng is not None:
            a = np.clip(a + rng.normal(0.0, self.noise_std, size=2) * self.high, self.low, self.high)
        return rk4(self.f, np.asarray(s, dtype=float), a, self.dt)

    @staticmethod
    def proj(s) -> np.ndarray:
        return np.asarray(s[:2])

    @staticmethod
    def heading(s) -> float:
        return float(s[2])

    def velocity(self, s, a) -> np.ndarray:
        return a[0] * np.array([math.cos(s[2]), math.sin(s[2])])

    def initial_state(self, x, rng: np.random.Generator) -> np.ndarray:
        return np.array([x[0], x[1], rng.uniform(-math.pi, math.pi)])

    @staticmethod
    def closed_form(s, a, t: float) -> np.ndarray:
        """Exact state after holding controls ``a`` for time ``t``."""
        x, y, th = s
        v, w = a
        if abs(w) < 1e-12:
            return np.array([x + v * t * math.cos(th), y + v * t * math.sin(th), th])
        th2 = th + w * t
        return np.array([x + v / w * (math.sin(th2) - math.sin(th)), y - v / w * (math.cos(th2) - math.cos(th)), th2])

    def to_json(self) -> dict:
        return {"kind": self.kind, "v_max": self.v_max, "omega_max": self.omega_max, "dt": self.dt,
                "noise_std": self.noise_std}


@dataclass(frozen=True)
class KinematicQuad:
    """Point mass with bounded acceleration: state is position then velocity."""

    a_max: float = 2.0
    v_max: float = 1.0
    dt: float = 0.1
    noise_std: float = 0.0
    dim: int = 3
    kind = "quad"

    def __post_init__(self):
        if not (self.dt > 0 and self.v_max > 0 and self.a_max > 0):
            raise ValueError("dt and control bounds must be positive")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")

    @property
    def state_dim(self) -> int:
        return 2 * self.dim

    @property
    def action_dim(self) -> int:
        return self.dim

    @property
    def low(self) -> np.ndarray:
        return np.full(self.dim, -self.a_max)

    @property
    def high(self) -> np.ndarray:
        return np.full(self.dim, self.a_max)

    def f(self, s, a):
        return np.concatenate([s[self.dim:], a])

    def step(self, s, a, rng=None) -> np.ndarray:
        a = np.clip(np.asarray(a, dtype=float), self.low, self.high)
        if self.noise_std and rng is not None:
            a = np.clip(a + rng.normal(0.0, self.noise_std * self.a_max, size=self.dim), self.low, self.high)
        out = rk4(self.f, np.asarray(s, dtype=float), a, self.dt)
        speed = np.linalg.norm(out[self.dim:])
        if speed > self.v_max:
            out[self.dim:] *= self.v_max / speed
        return out

    def proj(self, s) -> np.ndarray:
        return np.asarray(s[:self.dim])

    def heading(self, s) -> float:
        v = s[self.dim:]
        return float(math.atan2(v[1], v[0])) if np.any(v[:2]) else 0.0

    def velocity(self, s, a) -> np.ndarray:
        return np.asarray(s[self.dim:])

    def initial_state(self, x, rng: np.random.Generator) -> np.ndarray:
        d = rng.normal(size=self.dim)
        d *= rng.uniform(0.0, self.v_max / 2) / np.linalg.norm(d)
        return np.concatenate([np.asarray(x, dtype=float), d])

    def to_json(self) -> dict:
        return {"kind": self.kind, "a_max": self.a_max, "v_max": self.v_max, "dt": self.dt,
                "noise_std": self.noise_std, "dim": self.dim}


def dynamics_from_json(data: dict):
    data = dict(data)
    kind = data.pop("kind")
    if kind == "dubins":
        return Dubins(**data)
    if kind == "quad":
        return KinematicQuad(**data)
    raise ValueError(f"unknown dynamics kind {kind!r}")


def reward_bound(gamma, n_waypoints: int, n_bar: int, r_plus):
    """Smallest goal reward for which reaching the goal within ``n_bar`` steps beats any ball chain.

    Works with floats or :class:`fractions.Fraction` arguments.
    """
    if not 0 < gamma < 1 or n_waypoints < 0 or n_bar < 0:
        raise ValueError("need 0 < gamma < 1 and nonnegative counts")
    return r_plus * (1 - gamma ** n_waypoints) / gamma ** n_bar


def extreme_returns(gamma, n_waypoints: int, n_bar: int, r_plus, r_plusplus):
    """Returns of the two traces that decide whether the goal reward dominates.

    ``goal``: no progress reward, then the goal at step ``n_bar`` and
    ``r_plusplus`` forever after (the latest goal arrival allowed).
    ``chain``: progress reward on each of the first ``n_waypoints`` steps
    and nothing afterwards (every non-goal ball entered as early as possible).
    Exact when the arguments are fractions.
    """
    goal = discounted_return([0] * (n_bar - 1), gamma, tail=r_plusplus) if n_bar else r_plusplus / (1 - gamma)
    chain = discounted_return([r_plus] * n_waypoints, gamma)
    return goal, chain


def steps_to_goal(length: float, dyn, slack: float = 1.5) -> int:
    return max(1, math.ceil(slack * length / (dyn.v_max * dyn.dt)))


@dataclass(frozen=True)
class RewardSpec:
    r_minus: float
    r_plus: float
    r_plusplus: float
    gamma: float
    r: float
    n_waypoints: int
    n_bar: int

    def __post_init__(self):
        if not (self.r_minus < 0 < self.r_plus and self.r_plusplus > 0 and 0 < self.gamma < 1 and self.r > 0):
            raise ValueError("need r_minus < 0 < r_plus, r_plusplus > 0, 0 < gamma < 1, r > 0")
        bound = reward_bound(self.gamma, self.n_waypoints, self.n_bar, self.r_plus)
        if self.r_plusplus < bound:
            raise ValueError(f"r_plusplus={self.r_plusplus} is below the goal-priority bound {bound}")

    @property
    def t_max(self) -> int:
        return 4 * self.n_bar

    @classmethod
    def for_task(cls, task: ReachAvoidTask, dyn, r_minus: float = -10.0, r_plus: float = 1.0,
                 r_plusplus="auto", gamma: float = 0.99) -> "RewardSpec":
        """Spec sized to ``task``; the robot may start anywhere in the first waypoint ball."""
        n = len(task.waypoints) - 1
        n_bar = steps_to_goal(task.length + task.r, dyn)
        if r_plusplus == "auto":
            r_plusplus = max(reward_bound(gamma, n, n_bar, r_plus), n * r_plus, r_plus)
        return cls(r_minus, r_plus, float(r_plusplus), gamma, task.r, n, n_bar)

    def to_json(self) -> dict:
        return {"r_minus": self.r_minus, "r_plus": self.r_plus, "r_plusplus": self.r_plusplus, "gamma": self.gamma,
                "r": self.r, "n_waypoints": self.n_waypoints, "n_bar": self.n_bar}


def progression(x, task: ReachAvoidTask) -> tuple[float, int]:
    """``(D, index)``: least cost-to-go among waypoint balls containing ``x`` (``inf, -1`` if none)."""
    pts = np.asarray(task.waypoints, dtype=float)
    inside = np.sum((pts - np.asarray(x, dtype=float)) ** 2, axis=1) <= task.r ** 2
    if not inside.any():
        return math.inf, -1
    togo = np.where(inside, np.asarray(task.dist_to_go, dtype=float), np.inf)
    i = int(np.argmin(togo))
    return float(togo[i]), i


def progression_D(x, task: ReachAvoidTask) -> float:
    return progression(x, task)[0]


def classify(collision: bool, d: float, d_min: float) -> str:
    """Reward event by strict priority."""
    if collision:
        return "collision"
    if d == 0:
        return "goal"
    if d < d_min:
        return "progress"
    return "none"


@dataclass(frozen=True)
class EpisodeState:
    s: np.ndarray = field(compare=False)
    t: int = 0
    d_min: float = math.inf
    closest: int = -1
    violation: float = 0.0
    done: bool = False
    event: str = ""
    reached: bool = False


@dataclass(frozen=True)
class StepRecord:
    t: int
    s: tuple
    a: tuple
    reward: float
    D: float
    d_min: float
    event: str
    violation: float = 0.0
    task: int = 0


class TaskEnv:
    """One reach-avoid task in a workspace.

    ``boundary_violation`` is charged once, when the goal ball is reached.
    With ``absorb`` the episode continues after the goal and keeps paying
    ``r_plusplus`` while the robot stays inside the goal ball.
    """

    def __init__(self, ws: Workspace, task: ReachAvoidTask, dyn, spec: RewardSpec,
                 boundary_violation: float = 0.0, absorb: bool = False, t_max: int | None = None):
        if not task.dist_to_go:
            raise ValueError("task needs dist_to_go")
        self.ws, self.task, self.dyn, self.spec = ws, task, dyn, spec
        self.boundary_violation = float(boundary_violation)
        self.absorb = absorb
        self.t_max = spec.t_max if t_max is None else t_max
        self._rewards = {"collision": spec.r_minus, "goal": spec.r_plusplus, "progress": spec.r_plus, "none": 0.0}

    def reset(self, s0) -> EpisodeState:
        return EpisodeState(np.asarray(s0, dtype=float))

    def step(self, es: EpisodeState, a, rng=None) -> tuple[EpisodeState, float, bool]:
        if es.done:
            raise RuntimeError("episode already finished")
        s2 = self.dyn.step(es.s, a, rng)
        x, x2 = self.dyn.proj(es.s), self.dyn.proj(s2)
        collision = not (self.ws.in_bounds(x2) and self.ws.segment_collision_free(x, x2))
        d, idx = progression(x2, self.task)
        event = classify(collision, d, es.d_min)
        reward = self._rewards[event]
        d_min, closest, violation, reached = es.d_min, es.closest, es.violation, es.reached
        if event in ("goal", "progress") and d < d_min:
            d_min, closest = d, idx
        if event == "goal" and not reached:
            violation += self.boundary_violation
            reached = True
        t = es.t + 1
        done = event == "collision" or (event == "goal" and not self.absorb) or t >= self.t_max
        return EpisodeState(s2, t, d_min, closest, violation, done, event, reached), reward, done


def discounted_return(rewards, gamma, tail=0):
    """``sum gamma^k R_k`` plus a constant reward ``tail`` repeated forever after the list."""
    total = 0
    g = 1
    for r in rewards:
        total += g * r
        g *= gamma
    if tail:
        total += g * tail / (1 - gamma)
    return total


def violation_total(records) -> float:
    """Undiscounted sum of boundary violations charged along a trace."""
    return float(sum(r.violation for r in records))


def discounted_violation(records, gamma: float) -> float:
    return float(sum(gamma ** k * r.violation for k, r in enumerate(records)))


def write_trace_csv(path, records) -> None:
    records = list(records)
    ns = len(records[0].s) if records else 0
    na = len(records[0].a) if records else 0
    header = ["t"] + [f"s{i}" for i in range(ns)] + [f"a{i}" for i in range(na)] + \
        ["reward", "D", "d_min", "event", "violation", "task"]
    write_atomic_csv(path, header, ([r.t, *r.s, *r.a, r.reward, r.D, r.d_min, r.event, r.violation, r.task]
                                    for r in records))


def write_atomic_csv(path, header, rows) -> None:
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise

