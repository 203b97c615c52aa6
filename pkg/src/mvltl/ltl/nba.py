from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property

from .guards import Guard


@dataclass(frozen=True)
class Nba:
    """Nondeterministic Büchi automaton with propositional edge guards.

    States are the integers ``0 .. n-1``. At most one edge is stored per
    ordered state pair; parallel labels are disjoined into one guard.
    """

    ap: tuple[str, ...]
    states: tuple[int, ...]
    initial: frozenset[int]
    accepting: frozenset[int]
    edges: tuple[tuple[int, Guard, int], ...]

    def __post_init__(self):
        known = set(self.states)
        if not self.initial:
            raise ValueError("automaton needs an initial state")
        if not self.initial <= known or not self.accepting <= known:
            raise ValueError("initial/accepting states must be declared")
        seen = set()
        aps = set(self.ap)
        for src, guard, dst in self.edges:
            if src not in known or dst not in known:
                raise ValueError(f"edge {src}->{dst} has an undeclared endpoint")
            if (src, dst) in seen:
                raise ValueError(f"duplicate edge {src}->{dst}")
            if not guard.atoms() <= aps:
                raise ValueError(f"guard {guard} uses atoms outside AP")
            seen.add((src, dst))

    @cached_property
    def _guard_map(self) -> dict[tuple[int, int], Guard]:
        return {(s, d): g for s, g, d in self.edges}

    @cached_property
    def _succ(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {q: [] for q in self.states}
        for s, _, d in self.edges:
            out[s].append(d)
        return {q: tuple(v) for q, v in out.items()}

    @cached_property
    def _pred(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {q: [] for q in self.states}
        for s, _, d in self.edges:
            out[d].append(s)
        return {q: tuple(v) for q, v in out.items()}

    def guard(self, q: int, q2: int) -> Guard | None:
        return self._guard_map.get((q, q2))

    def successors(self, q: int) -> tuple[int, ...]:
        return self._succ[q]

    def predecessors(self, q: int) -> tuple[int, ...]:
        return self._pred[q]

    def __len__(self):
        return len(self.states)

    @cached_property
    def cyclic_states(self) -> frozenset[int]:
        """States that lie on some cycle of the edge graph (guards ignored)."""
        out = set()
        for q in self.states:
            stack, seen = list(self._succ[q]), set()
            while stack:
                u = stack.pop()
                if u == q:
                    out.add(q)
                    break
                if u in seen:
                    continue
                seen.add(u)
                stack.extend(self._succ[u])
        return frozenset(out)

    def accepts_lasso(self, prefix, loop) -> bool:
        """Büchi acceptance of ``prefix loop^omega`` by product-graph cycle search."""
        word = [frozenset(s) for s in prefix] + [frozenset(s) for s in loop]
        n, start = len(word), len(prefix)
        if not loop:
            raise ValueError("loop part must be nonempty")

        def succ(node):
            q, i = node
            j = i + 1 if i + 1 < n else start
            return [(d, j) for d in self._succ[q] if self._guard_map[(q, d)].holds(word[i])]

        reach = set((q, 0) for q in self.initial)
        todo = deque(reach)
        while todo:
            u = todo.popleft()
            for v in succ(u):
                if v not in reach:
                    reach.add(v)
                    todo.append(v)
        for node in reach:
            if node[0] not in self.accepting:
                continue
            seen = set()
            todo = deque(succ(node))
            while todo:
                u = todo.popleft()
                if u == node:
                    return True
                if u in seen:
                    continue
                seen.add(u)
                todo.extend(succ(u))
        return False

    def to_json(self) -> dict:
        return {
            "ap": list(self.ap),
            "states": list(self.states),
            "initial": sorted(self.initial),
            "accepting": sorted(self.accepting),
            "edges": [{"src": s, "guard": g.text(), "dst": d} for s, g, d in self.edges],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Nba":
        ap = tuple(data["ap"])
        return cls(
            ap=ap,
            states=tuple(data["states"]),
            initial=frozenset(data["initial"]),
            accepting=frozenset(data["accepting"]),
            edges=tuple((e["src"], Guard.parse(e["guard"], ap), e["dst"]) for e in data["edges"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)
