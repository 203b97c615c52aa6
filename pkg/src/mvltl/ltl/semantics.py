"""Direct LTL semantics on ultimately periodic words ``u v^omega``.

This evaluator works on the syntax tree itself and shares nothing with the
automaton translation, so it serves as the reference when checking automata.
"""
from __future__ import annotations

from .syntax import (AND, AP, EVENTUALLY, FALSE, IMPLIES, NEXT, NOT, OR,
                     RELEASE, TRUE, UNTIL, Ltl)


def holds(f: Ltl, symbol) -> bool:
    """Truth of a propositional formula under the symbol (set of true atoms)."""
    op = f.op
    if op == TRUE:
        return True
    if op == FALSE:
        return False
    if op == AP:
        return f.name in symbol
    if op == NOT:
        return not holds(f.args[0], symbol)
    if op == AND:
        return holds(f.args[0], symbol) and holds(f.args[1], symbol)
    if op == OR:
        return holds(f.args[0], symbol) or holds(f.args[1], symbol)
    if op == IMPLIES:
        return (not holds(f.args[0], symbol)) or holds(f.args[1], symbol)
    raise ValueError(f"{op} is not propositional")


def evaluate_lasso(f: Ltl, prefix, loop) -> dict[Ltl, list[bool]]:
    """Truth value of every subformula at every position of ``prefix loop^omega``.

    Positions ``0 .. len(prefix)+len(loop)-1`` cover all distinct suffixes.
    """
    word = [frozenset(s) for s in prefix] + [frozenset(s) for s in loop]
    if not loop:
        raise ValueError("loop part must be nonempty")
    n = len(word)
    start = len(prefix)
    succ = [i + 1 if i + 1 < n else start for i in range(n)]
    val: dict[Ltl, list[bool]] = {}
    for g in f.subformulas():
        op = g.op
        if op == TRUE:
            v = [True] * n
        elif op == FALSE:
            v = [False] * n
        elif op == AP:
            v = [g.name in s for s in word]
        elif op == NOT:
            a = val[g.args[0]]
            v = [not x for x in a]
        elif op in (AND, OR, IMPLIES):
            a, b = val[g.args[0]], val[g.args[1]]
            if op == AND:
                v = [x and y for x, y in zip(a, b)]
            elif op == OR:
                v = [x or y for x, y in zip(a, b)]
            else:
                v = [(not x) or y for x, y in zip(a, b)]
        elif op == NEXT:
            a = val[g.args[0]]
            v = [a[succ[i]] for i in range(n)]
        else:
            if op == UNTIL:
                a, b, least = val[g.args[0]], val[g.args[1]], True
            elif op == EVENTUALLY:
                a, b, least = [True] * n, val[g.args[0]], True
            elif op == RELEASE:
                a, b, least = val[g.args[0]], val[g.args[1]], False
            else:  # ALWAYS == false R b
                a, b, least = [False] * n, val[g.args[0]], False
            v = _fixpoint(a, b, succ, least)
        val[g] = v
    return val


def _fixpoint(a, b, succ, least):
    # until:   v = b | (a & v[succ]),  least fixpoint
    # release: v = b & (a | v[succ]),  greatest fixpoint
    n = len(b)
    v = [not least] * n
    for _ in range(n + 1):
        changed = False
        for i in range(n - 1, -1, -1):
            nv = (b[i] or (a[i] and v[succ[i]])) if least else (b[i] and (a[i] or v[succ[i]]))
            if nv != v[i]:
                v[i] = nv
                changed = True
        if not changed:
            break
    return v


def satisfies_lasso(f: Ltl, prefix, loop) -> bool:
    return evaluate_lasso(f, prefix, loop)[f][0]
