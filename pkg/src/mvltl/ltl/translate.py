"""LTL to Büchi automaton translation.

Tableau expansion in the style of Gerth et al. / Couvreur: each automaton
state is a set of LTL obligations in negation normal form, and expanding a
state yields transitions ``(literal cube, next obligations, postponed
eventualities)``. That gives a transition-based generalized Büchi automaton,
which is degeneralized with a level counter and then simplified:

* unreachable states and states with no accepting future are pruned,
* accepting states outside every cycle lose their accepting flag,
* bisimilar states are merged,
* parallel edges are disjoined, unsatisfiable guards are dropped.

Guards are manipulated as truth tables over 2^AP during construction and
converted back to compact DNF formulas at the end.
"""
from __future__ import annotations

from collections import deque
from functools import lru_cache

import networkx as nx

from .guards import SymbolSpace
from .nba import Nba
from .syntax import (ALWAYS, AND, AP, EVENTUALLY, FALSE, IMPLIES, NEXT, NOT, OR, RELEASE,
                     TRUE, UNTIL, Ltl, always, conj, disj, eventually, false, neg, nxt,
                     UndeclaredAtomError, release, to_text, true, until)

_DOMINANCE_LIMIT = 512

_EMPTY = frozenset()
_TRUE_TERM = (_EMPTY, _EMPTY, _EMPTY, _EMPTY)


# --- negation normal form ---------------------------------------------------

def _mk_and(a, b):
    if a.op == FALSE or b.op == FALSE:
        return false()
    if a.op == TRUE:
        return b
    if b.op == TRUE or a == b:
        return a
    return conj(a, b)


def _mk_or(a, b):
    if a.op == TRUE or b.op == TRUE:
        return true()
    if a.op == FALSE:
        return b
    if b.op == FALSE or a == b:
        return a
    return disj(a, b)


def nnf(f: Ltl, negate: bool = False) -> Ltl:
    """Negation normal form over true/false/literals/&&/||/X/U/R/<>/[]."""
    op = f.op
    if op == TRUE:
        return false() if negate else true()
    if op == FALSE:
        return true() if negate else false()
    if op == AP:
        return neg(f) if negate else f
    if op == NOT:
        return nnf(f.args[0], not negate)
    if op == IMPLIES:
        return nnf(disj(neg(f.args[0]), f.args[1]), negate)
    if op == AND or op == OR:
        a, b = nnf(f.args[0], negate), nnf(f.args[1], negate)
        return _mk_and(a, b) if (op == AND) != negate else _mk_or(a, b)
    if op == NEXT:
        a = nnf(f.args[0], negate)
        return a if a.op in (TRUE, FALSE) else nxt(a)
    if op == EVENTUALLY or op == ALWAYS:
        a = nnf(f.args[0], negate)
        if a.op in (TRUE, FALSE):
            return a
        return eventually(a) if (op == EVENTUALLY) != negate else always(a)
    if op == UNTIL or op == RELEASE:
        a, b = nnf(f.args[0], negate), nnf(f.args[1], negate)
        is_until = (op == UNTIL) != negate
        if is_until:
            if a.op == TRUE:
                return eventually(b) if b.op not in (TRUE, FALSE) else b
            return until(a, b) if b.op not in (TRUE, FALSE) else b
        if a.op == FALSE:
            return always(b) if b.op not in (TRUE, FALSE) else b
        return release(a, b) if b.op not in (TRUE, FALSE) else b
    raise ValueError(op)


# --- syntactic implication (sound, incomplete) ------------------------------

@lru_cache(maxsize=None)
def implies_syntactically(f: Ltl, g: Ltl) -> bool:
    if f == g or g.op == TRUE or f.op == FALSE:
        return True
    if g.op == AND:
        return implies_syntactically(f, g.args[0]) and implies_syntactically(f, g.args[1])
    if f.op == OR:
        return implies_syntactically(f.args[0], g) and implies_syntactically(f.args[1], g)
    if g.op == OR and (implies_syntactically(f, g.args[0]) or implies_syntactically(f, g.args[1])):
        return True
    if f.op == AND and (implies_syntactically(f.args[0], g) or implies_syntactically(f.args[1], g)):
        return True
    if f.op == ALWAYS and implies_syntactically(f.args[0], g):
        return True
    if f.op == RELEASE and implies_syntactically(f.args[1], g):
        return True
    if g.op == EVENTUALLY:
        if implies_syntactically(f, g.args[0]):
            return True
        if f.op in (EVENTUALLY, UNTIL) and implies_syntactically(f.args[-1], g.args[0]):
            return True
    if g.op == UNTIL and implies_syntactically(f, g.args[1]):
        return True
    if f.op == UNTIL and g.op == UNTIL:
        return implies_syntactically(f.args[0], g.args[0]) and implies_syntactically(f.args[1], g.args[1])
    if g.op == ALWAYS and f.op == ALWAYS:
        return implies_syntactically(f.args[0], g.args[0])
    if f.op == NEXT and g.op == NEXT:
        return implies_syntactically(f.args[0], g.args[0])
    return False


def _simplify_obligations(forms) -> frozenset:
    items = sorted((g for g in forms if g.op != TRUE), key=to_text)
    keep = []
    for i, g in enumerate(items):
        redundant = False
        for j, h in enumerate(items):
            if i == j:
                continue
            if implies_syntactically(h, g) and not (implies_syntactically(g, h) and j > i):
                redundant = True
                break
        if not redundant:
            keep.append(g)
    return frozenset(keep)


def _flatten_and(f: Ltl):
    if f.op == AND:
        return _flatten_and(f.args[0]) + _flatten_and(f.args[1])
    return [f]


# --- tableau expansion --------------------------------------------------------

def _join(t1, t2):
    pos, negs = t1[0] | t2[0], t1[1] | t2[1]
    if pos & negs:
        return None
    return (pos, negs, t1[2] | t2[2], t1[3] | t2[3])


def _product(left, right):
    out = []
    for a in left:
        for b in right:
            t = _join(a, b)
            if t is not None:
                out.append(t)
    return out


@lru_cache(maxsize=None)
def _expand(f: Ltl) -> tuple:
    op = f.op
    if op == TRUE:
        return (_TRUE_TERM,)
    if op == FALSE:
        return ()
    if op == AP:
        return ((frozenset({f.name}), _EMPTY, _EMPTY, _EMPTY),)
    if op == NOT:
        return ((_EMPTY, frozenset({f.args[0].name}), _EMPTY, _EMPTY),)
    if op == AND:
        return tuple(_product(_expand(f.args[0]), _expand(f.args[1])))
    if op == OR:
        return tuple(dict.fromkeys(_expand(f.args[0]) + _expand(f.args[1])))
    if op == NEXT:
        return ((_EMPTY, _EMPTY, frozenset({f.args[0]}), _EMPTY),)
    me = frozenset({f})
    if op == EVENTUALLY:
        return _expand(f.args[0]) + ((_EMPTY, _EMPTY, me, me),)
    if op == UNTIL:
        wait = tuple((p, n, x | me, w | me) for p, n, x, w in _expand(f.args[0]))
        return _expand(f.args[1]) + wait
    if op == ALWAYS:
        return tuple((p, n, x | me, w) for p, n, x, w in _expand(f.args[0]))
    if op == RELEASE:
        now = _expand(_mk_and(f.args[0], f.args[1]))
        wait = tuple((p, n, x | me, w) for p, n, x, w in _expand(f.args[1]))
        return now + wait
    raise ValueError(op)


def _expand_state(state: frozenset) -> list:
    terms = [_TRUE_TERM]
    for g in sorted(state, key=to_text):
        terms = _product(terms, _expand(g))
        if not terms:
            return []
    out = {}
    for p, n, x, w in terms:
        key = (p, n, _simplify_obligations(x), w)
        out.setdefault(key, None)
    terms = list(out)
    if len(terms) <= _DOMINANCE_LIMIT:
        # drop t when another term u is weaker in every component
        keep = []
        for t in terms:
            if not any(u is not t and u[0] <= t[0] and u[1] <= t[1] and u[2] <= t[2] and u[3] <= t[3]
                       for u in terms):
                keep.append(t)
        terms = keep
    return terms


# --- construction ---------------------------------------------------------------

def to_nba(f: Ltl, ap=None) -> Nba:
    """Translate an LTL formula into an equivalent Büchi automaton.

    ``ap`` fixes the proposition order of the automaton; by default the atoms
    of ``f`` in sorted order.
    """
    ap = tuple(ap) if ap is not None else tuple(sorted(f.atoms()))
    missing = f.atoms() - set(ap)
    if missing:
        raise UndeclaredAtomError(sorted(missing)[0])
    space = SymbolSpace(ap)
    root = nnf(f)
    init = _simplify_obligations(_flatten_and(root)) if root.op != FALSE else None
    if init is None:
        return _empty(ap)

    # explore the generalized automaton
    ids: dict[frozenset, int] = {init: 0}
    order = [init]
    trans: list[list[tuple[int, int, frozenset]]] = []
    todo = deque([init])
    eventualities: set[Ltl] = set()
    while todo:
        s = todo.popleft()
        out = []
        for p, n, x, w in _expand_state(s):
            nxt_state = frozenset(g for h in x for g in _flatten_and(h))
            nxt_state = _simplify_obligations(nxt_state)
            if nxt_state not in ids:
                ids[nxt_state] = len(order)
                order.append(nxt_state)
                todo.append(nxt_state)
            eventualities |= w
            out.append((space.cube_table(p, n), ids[nxt_state], w))
        trans.append(out)

    # degeneralize: level k is the accepting copy, which also serves as level 0
    acc = sorted(eventualities, key=to_text)
    k = len(acc)
    index = {u: i for i, u in enumerate(acc)}
    levels = k + 1 if k else 1
    tgba_trans = []
    for out in trans:
        rows = []
        for table, dst, w in out:
            pending = frozenset(index[u] for u in w)
            rows.append((table, dst, pending))
        tgba_trans.append(rows)

    def node(s, lvl):
        return s * levels + lvl

    start = node(0, k)
    edges: dict[int, dict[int, int]] = {}
    accepting = set()
    seen = {start}
    todo = deque([start])
    while todo:
        u = todo.popleft()
        s, lvl = divmod(u, levels)
        if lvl == k:
            accepting.add(u)
        base = 0 if lvl == k else lvl
        row = edges.setdefault(u, {})
        for table, dst, pending in tgba_trans[s]:
            j = base
            while j < k and j not in pending:
                j += 1
            v = node(dst, j)
            row[v] = row.get(v, 0) | table
            if v not in seen:
                seen.add(v)
                todo.append(v)
    edges = {u: {v: t for v, t in row.items() if t} for u, row in edges.items()}
    return _finish(space, start, edges, accepting)


def _empty(ap) -> Nba:
    return Nba(ap=tuple(ap), states=(0,), initial=frozenset({0}), accepting=frozenset(), edges=())


def _finish(space: SymbolSpace, start: int, edges: dict, accepting: set) -> Nba:
    g = nx.DiGraph()
    g.add_node(start)
    for u, row in edges.items():
        for v in row:
            g.add_edge(u, v)
    g = g.subgraph(nx.descendants(g, start) | {start}).copy()

    cyclic = set()
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1 or any(g.has_edge(u, u) for u in comp):
            cyclic |= comp
    accepting = {u for u in accepting if u in cyclic}
    if not accepting:
        return _empty(space.ap)
    # keep only states that can reach an accepting cycle
    useful = set(accepting)
    for a in accepting:
        useful |= nx.ancestors(g, a)
    if start not in useful:
        return _empty(space.ap)
    g = g.subgraph(useful).copy()
    edges = {u: {v: t for v, t in edges.get(u, {}).items() if v in useful} for u in g.nodes}

    # coarsest bisimulation respecting acceptance
    block = {u: int(u in accepting) for u in g.nodes}
    while True:
        sig = {}
        for u in g.nodes:
            merged: dict[int, int] = {}
            for v, t in edges[u].items():
                merged[block[v]] = merged.get(block[v], 0) | t
            sig[u] = (block[u], frozenset(merged.items()))
        ids: dict = {}
        new_block = {}
        for u in sorted(g.nodes):
            new_block[u] = ids.setdefault(sig[u], len(ids))
        if len(set(new_block.values())) == len(set(block.values())):
            block = new_block
            break
        block = new_block

    # quotient, numbered in breadth-first order from the initial state
    q_edges: dict[int, dict[int, int]] = {}
    for u in g.nodes:
        row = q_edges.setdefault(block[u], {})
        for v, t in edges[u].items():
            row[block[v]] = row.get(block[v], 0) | t
    q_acc = {block[u] for u in accepting}
    b0 = block[start]
    number = {b0: 0}
    todo = deque([b0])
    while todo:
        b = todo.popleft()
        for c in sorted(q_edges.get(b, {})):
            if c not in number:
                number[c] = len(number)
                todo.append(c)
    out_edges = []
    for b in sorted(number, key=number.get):
        for c in sorted(q_edges.get(b, {}), key=number.get):
            out_edges.append((number[b], space.guard_from_table(q_edges[b][c]), number[c]))
    return Nba(
        ap=space.ap,
        states=tuple(range(len(number))),
        initial=frozenset({0}),
        accepting=frozenset(number[b] for b in q_acc if b in number),
        edges=tuple(out_edges),
    )
