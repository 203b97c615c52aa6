"""Relaxed product of the workspace transition system and a Büchi automaton.

A product transition ``(x, q) -> (x', q')`` exists whenever ``x -> x'`` is a
short collision-free segment and the automaton has *some* edge ``q -> q'``,
whatever the label of ``x``. The price of firing the edge on the wrong label
is the violation distance between ``label(x)`` and the edge guard.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..ltl.guards import UNSAT, violation_distance
from ..ltl.nba import Nba
from ..workspace import Workspace


class NoPlanError(RuntimeError):
    """No accepting lasso exists in the explored product graph."""

    def __init__(self, message: str, reached_states=()):
        super().__init__(message)
        self.reached_states = tuple(sorted(reached_states))


@dataclass(frozen=True)
class ProductState:
    x: tuple
    q: int

    def to_json(self) -> dict:
        return {"x": [float(v) for v in self.x], "q": int(self.q)}

    @classmethod
    def from_json(cls, data) -> "ProductState":
        return cls(tuple(float(v) for v in data["x"]), int(data["q"]))


def product_edge(qp: ProductState, qp2: ProductState, nba: Nba, ws: Workspace, eta: float):
    """``(geom_cost, viol_cost)`` of a relaxed product transition, or ``None`` if invalid."""
    guard = nba.guard(qp.q, qp2.q)
    if guard is None or not ws.gwts_transition(qp.x, qp2.x, eta):
        return None
    dist = float(np.linalg.norm(np.subtract(qp2.x, qp.x)))
    return dist, violation_distance(ws.label_of(qp.x), guard)


class ViolationTable:
    """Per-label matrices ``D[q, q'] = D_V(label, guard(q, q'))`` (``inf`` where no edge).

    Rows are built lazily and indexed by small integers so planners can keep
    one int per point instead of a symbol.
    """

    def __init__(self, nba: Nba, ws: Workspace):
        if set(nba.ap) - set(ws.ap):
            raise ValueError(f"automaton propositions {sorted(set(nba.ap) - set(ws.ap))} not declared by the workspace")
        self.nba = nba
        self.ws = ws
        self.n = len(nba.states)
        self.row_of: dict[int, int] = {}
        self._rows: list[np.ndarray] = []
        self._stack: np.ndarray | None = None
        self.has_edge = np.zeros((self.n, self.n), dtype=bool)
        for s, _, d in nba.edges:
            self.has_edge[s, d] = True

    def row(self, code: int) -> int:
        r = self.row_of.get(code)
        if r is None:
            symbol = self.ws.decode(code)
            m = np.full((self.n, self.n), np.inf)
            for s, g, d in self.nba.edges:
                v = violation_distance(symbol, g)
                m[s, d] = np.inf if v == UNSAT else float(v)
            r = len(self._rows)
            self._rows.append(m)
            self.row_of[code] = r
            self._stack = None
        return r

    def rows(self, codes) -> np.ndarray:
        return np.array([self.row(int(c)) for c in codes], dtype=np.int64)

    @property
    def stack(self) -> np.ndarray:
        """All matrices built so far, shape (rows, n, n)."""
        if self._stack is None:
            self._stack = np.stack(self._rows) if self._rows else np.zeros((0, self.n, self.n))
        return self._stack

    def matrix(self, code: int) -> np.ndarray:
        return self._rows[self.row(code)]


@dataclass(frozen=True)
class LassoPlan:
    """Prefix ending at an accepting product state, then a cycle back to it.

    ``suffix[0]`` equals ``prefix[-1]``; after ``suffix[-1]`` the plan
    returns to ``suffix[0]``.
    """

    prefix: tuple[ProductState, ...]
    suffix: tuple[ProductState, ...]
    prefix_violation: float
    suffix_violation: float
    prefix_length: float
    suffix_length: float
    seed: int | None = None
    iters: int | None = None
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if not self.prefix or not self.suffix:
            raise ValueError("prefix and suffix must be nonempty")
        if self.suffix[0] != self.prefix[-1]:
            raise ValueError("suffix must start at the last prefix state")

    @property
    def key(self) -> tuple:
        """Lexicographic rank: suffix violation, prefix violation, then total length."""
        return (self.suffix_violation, self.prefix_violation, self.prefix_length + self.suffix_length)

    @property
    def length(self) -> float:
        return self.prefix_length + self.suffix_length

    def cycle_states(self) -> list[ProductState]:
        """Suffix states with the root repeated at the end."""
        return list(self.suffix) + [self.suffix[0]]

    def to_json(self, beta: float | None = None) -> dict:
        out = {
            "prefix": [s.to_json() for s in self.prefix],
            "suffix": [s.to_json() for s in self.suffix],
            "violation": {"prefix": self.prefix_violation, "suffix": self.suffix_violation},
            "length": {"prefix": self.prefix_length, "suffix": self.suffix_length,
                       "total": self.prefix_length + self.suffix_length},
            "seed": self.seed,
            "iters": self.iters,
        }
        if beta is not None:
            out["violation"]["total"] = total_violation(self, beta)
            out["beta"] = beta
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_json(cls, data: dict) -> "LassoPlan":
        return cls(
            prefix=tuple(ProductState.from_json(s) for s in data["prefix"]),
            suffix=tuple(ProductState.from_json(s) for s in data["suffix"]),
            prefix_violation=float(data["violation"]["prefix"]),
            suffix_violation=float(data["violation"]["suffix"]),
            prefix_length=float(data["length"]["prefix"]),
            suffix_length=float(data["length"]["suffix"]),
            seed=data.get("seed"),
            iters=data.get("iters"),
            meta=data.get("meta", {}),
        )

    def dumps(self, beta: float | None = None) -> str:
        return json.dumps(self.to_json(beta), indent=2)


def total_violation(plan: LassoPlan, beta: float) -> float:
    """Prefix violation plus ``beta`` times the violation of one suffix cycle."""
    return float(plan.prefix_violation + beta * plan.suffix_violation)


def replay(plan: LassoPlan, nba: Nba, ws: Workspace, eta: float) -> tuple[float, float, float, float]:
    """Re-check every transition of a plan and recompute its costs.

    Returns ``(prefix_violation, suffix_violation, prefix_length, suffix_length)``;
    raises ``ValueError`` naming the first invalid transition.
    """
    if plan.prefix[0].q not in nba.initial:
        raise ValueError(f"prefix starts in non-initial automaton state {plan.prefix[0].q}")
    if not np.allclose(plan.prefix[0].x, ws.x0):
        raise ValueError("prefix does not start at the initial point")
    if plan.suffix[0].q not in nba.accepting:
        raise ValueError("prefix does not end in an accepting state")

    def run(states):
        v = g = 0.0
        for a, b in zip(states, states[1:]):
            e = product_edge(a, b, nba, ws, eta * (1 + 1e-9))
            if e is None:
                raise ValueError(f"invalid transition {a} -> {b}")
            g += e[0]
            v += e[1]
        return v, g

    pv, pl = run(list(plan.prefix))
    sv, sl = run(plan.cycle_states())
    return pv, sv, pl, sl


def default_beta(ws: Workspace) -> float:
    return 1e4 * ws.diameter
