"""Exhaustive comparison of an automaton against LTL semantics on lasso words.

Enumerating every word ``u v^omega`` explicitly is too slow for
``|u|, |v| <= 4`` over 8 symbols (about 2*10^7 words), so the check works
backwards. For each loop ``v`` it computes two things at the loop start: the
truth value of every subformula (from :mod:`semantics`) and the set of
automaton states that have an accepting run. Both quantities at position
``i`` depend only on the symbol at ``i`` and on the same quantities at
``i+1``, so prefixes are handled by repeatedly prepending symbols to the
deduplicated set of such pairs. Every word of the requested shape is covered.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import networkx as nx

from .guards import SymbolSpace
from .nba import Nba
from .semantics import evaluate_lasso
from .syntax import (ALWAYS, AND, AP, EVENTUALLY, FALSE, IMPLIES, NEXT, NOT, OR, RELEASE,
                     TRUE, UNTIL, Ltl)


@dataclass(frozen=True)
class Mismatch:
    prefix: tuple
    loop: tuple
    semantics: bool
    automaton: bool


class _Model:
    def __init__(self, f: Ltl, nba: Nba):
        self.f = f
        self.nba = nba
        self.space = SymbolSpace(nba.ap)
        self.subs = f.subformulas()
        self.pos = {g: i for i, g in enumerate(self.subs)}
        self.root = self.pos[f]
        self.edges = [(s, self.space.table(g), d) for s, g, d in nba.edges]

    def step_truth(self, code: int, nxt: tuple) -> tuple:
        symbol = self.space.decode(code)
        val = [False] * len(self.subs)
        for i, g in enumerate(self.subs):
            op = g.op
            a = [val[self.pos[c]] for c in g.args]
            if op == TRUE:
                v = True
            elif op == FALSE:
                v = False
            elif op == AP:
                v = g.name in symbol
            elif op == NOT:
                v = not a[0]
            elif op == AND:
                v = a[0] and a[1]
            elif op == OR:
                v = a[0] or a[1]
            elif op == IMPLIES:
                v = (not a[0]) or a[1]
            elif op == NEXT:
                v = nxt[self.pos[g.args[0]]]
            elif op == UNTIL:
                v = a[1] or (a[0] and nxt[i])
            elif op == RELEASE:
                v = a[1] and (a[0] or nxt[i])
            elif op == EVENTUALLY:
                v = a[0] or nxt[i]
            elif op == ALWAYS:
                v = a[0] and nxt[i]
            else:
                raise ValueError(op)
            val[i] = v
        return tuple(val)

    def step_states(self, code: int, nxt: frozenset) -> frozenset:
        return frozenset(s for s, t, d in self.edges if d in nxt and t >> code & 1)

    def loop_pair(self, loop: tuple) -> tuple[tuple, frozenset]:
        symbols = [self.space.decode(c) for c in loop]
        vals = evaluate_lasso(self.f, [], symbols)
        truth = tuple(vals[g][0] for g in self.subs)
        m = len(loop)
        g = nx.DiGraph()
        for i, c in enumerate(loop):
            j = (i + 1) % m
            for s, t, d in self.edges:
                if t >> c & 1:
                    g.add_edge((s, i), (d, j))
        good = set()
        for comp in nx.strongly_connected_components(g):
            u = next(iter(comp))
            if (len(comp) > 1 or g.has_edge(u, u)) and any(q in self.nba.accepting for q, _ in comp):
                good |= comp
        for u in list(good):
            good |= nx.ancestors(g, u)
        return truth, frozenset(q for q, i in good if i == 0)

    def accepted(self, states: frozenset) -> bool:
        return bool(states & self.nba.initial)


def language_mismatches(f: Ltl, nba: Nba, max_prefix: int = 4, max_loop: int = 4,
                        limit: int = 10) -> list[Mismatch]:
    """Words ``u v^omega`` (``|u| <= max_prefix``, ``1 <= |v| <= max_loop``) on which
    the automaton and the formula disagree. Empty list means full agreement."""
    model = _Model(f, nba)
    codes = range(model.space.size)
    # pair -> one witness word, kept for error reporting
    frontier: dict[tuple, tuple] = {}
    for m in range(1, max_loop + 1):
        for loop in itertools.product(codes, repeat=m):
            pair = model.loop_pair(loop)
            frontier.setdefault(pair, ((), loop))
    found = []
    seen = dict(frontier)
    for depth in range(max_prefix + 1):
        for (truth, states), (prefix, loop) in frontier.items():
            if truth[model.root] != model.accepted(states):
                found.append(Mismatch(
                    tuple(model.space.decode(c) for c in prefix),
                    tuple(model.space.decode(c) for c in loop),
                    truth[model.root], model.accepted(states)))
                if len(found) >= limit:
                    return found
        if depth == max_prefix:
            break
        nxt: dict[tuple, tuple] = {}
        for (truth, states), (prefix, loop) in frontier.items():
            for c in codes:
                pair = (model.step_truth(c, truth), model.step_states(c, states))
                if pair not in seen and pair not in nxt:
                    nxt[pair] = ((c,) + prefix, loop)
        seen.update(nxt)
        frontier = nxt
    return found
