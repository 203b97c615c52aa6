"""Propositional guards, symbols and the symbol-distance machinery.

A *symbol* is a set of atomic propositions (an element of 2^AP). Guards are
propositional formulas over AP; their disjunctive normal form is cached and
drives :func:`violation_distance`, which never enumerates 2^AP.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

from .semantics import holds
from .syntax import (AND, AP, FALSE, IMPLIES, NOT, OR, TRUE, Ltl, atom, conj, disj,
                     false, neg, parse_ltl, to_text, true)

UNSAT = math.inf
"""Distance to a guard that no symbol satisfies."""

MAX_TRUTH_TABLE_AP = 16
"""Largest AP for which explicit truth tables over 2^AP are built."""

Cube = tuple[frozenset, frozenset]  # (positive atoms, negated atoms)


def eval_symbol(symbol, ap_order) -> tuple[int, ...]:
    return tuple(1 if a in symbol else 0 for a in ap_order)


def rho(s1, s2) -> int:
    """L1 distance between the evaluation vectors (size of the symmetric difference)."""
    return len(frozenset(s1) ^ frozenset(s2))


def _dnf(f: Ltl, negated: bool = False) -> list[Cube]:
    op = f.op
    if op == TRUE:
        return [] if negated else [(frozenset(), frozenset())]
    if op == FALSE:
        return [(frozenset(), frozenset())] if negated else []
    if op == AP:
        lit = frozenset({f.name})
        return [(frozenset(), lit)] if negated else [(lit, frozenset())]
    if op == NOT:
        return _dnf(f.args[0], not negated)
    if op == IMPLIES:
        return _dnf(disj(neg(f.args[0]), f.args[1]), negated)
    if op in (AND, OR):
        left, right = _dnf(f.args[0], negated), _dnf(f.args[1], negated)
        is_and = (op == AND) != negated
        if not is_and:
            return _absorb(left + right)
        out = []
        for p1, n1 in left:
            for p2, n2 in right:
                p, n = p1 | p2, n1 | n2
                if not (p & n):
                    out.append((p, n))
        return _absorb(out)
    raise ValueError(f"temporal operator {op} inside a guard")


def _absorb(cubes: list[Cube]) -> list[Cube]:
    # drop duplicates and cubes implied by a weaker cube
    uniq = list(dict.fromkeys(cubes))
    keep = []
    for i, (p, n) in enumerate(uniq):
        if any(j != i and q <= p and m <= n for j, (q, m) in enumerate(uniq)):
            continue
        keep.append((p, n))
    return sorted(keep, key=lambda c: (len(c[0]) + len(c[1]), sorted(c[0]), sorted(c[1])))


def cubes_to_formula(cubes) -> Ltl:
    if not cubes:
        return false()
    terms = []
    for pos, negs in cubes:
        lits = [atom(a) for a in sorted(pos)] + [neg(atom(a)) for a in sorted(negs)]
        if not lits:
            return true()
        t = lits[0]
        for lit in lits[1:]:
            t = conj(t, lit)
        terms.append(t)
    f = terms[0]
    for t in terms[1:]:
        f = disj(f, t)
    return f


@dataclass(frozen=True)
class Guard:
    """A propositional edge label."""

    formula: Ltl

    def __post_init__(self):
        if self.formula.is_temporal:
            raise ValueError("guards cannot contain temporal operators")

    @classmethod
    def from_cubes(cls, cubes) -> "Guard":
        return cls(cubes_to_formula(list(cubes)))

    @classmethod
    def parse(cls, text: str, ap=None) -> "Guard":
        return cls(parse_ltl(text, ap))

    @cached_property
    def cubes(self) -> tuple[Cube, ...]:
        return tuple(_dnf(self.formula))

    @property
    def satisfiable(self) -> bool:
        return bool(self.cubes)

    def holds(self, symbol) -> bool:
        return holds(self.formula, symbol)

    def atoms(self) -> frozenset[str]:
        return self.formula.atoms()

    def text(self) -> str:
        return to_text(self.formula)

    def __str__(self):
        return self.text()


def violation_distance(symbol, guard: Guard) -> float:
    """Smallest number of atom flips turning ``symbol`` into one that enables ``guard``.

    Returns 0 when the symbol already satisfies the guard and :data:`UNSAT`
    when nothing does. Each DNF cube is reached by flipping exactly its
    mismatched literals, so the minimum over cubes is exact.
    """
    symbol = frozenset(symbol)
    best = UNSAT
    for pos, negs in guard.cubes:
        d = len(pos - symbol) + len(negs & symbol)
        if d < best:
            best = d
            if d == 0:
                break
    return best


class SymbolSpace:
    """Integer encoding of 2^AP for a fixed proposition order.

    Symbol ``s`` is the integer whose bit ``i`` is set iff ``ap[i]`` is true.
    A *truth table* is a Python int with bit ``s`` set iff symbol ``s``
    satisfies the formula; only built for ``len(ap) <= MAX_TRUTH_TABLE_AP``.
    """

    def __init__(self, ap):
        self.ap = tuple(ap)
        if len(set(self.ap)) != len(self.ap):
            raise ValueError("duplicate atomic propositions")
        self.index = {a: i for i, a in enumerate(self.ap)}
        self.size = 1 << len(self.ap)

    def encode(self, symbol) -> int:
        v = 0
        for a in symbol:
            v |= 1 << self.index[a]
        return v

    def decode(self, code: int) -> frozenset:
        return frozenset(a for i, a in enumerate(self.ap) if code >> i & 1)

    def symbols(self):
        return [self.decode(c) for c in range(self.size)]

    @cached_property
    def full(self) -> int:
        self._check_table_size()
        return (1 << self.size) - 1

    @cached_property
    def _literal_tables(self) -> list[int]:
        self._check_table_size()
        tables = []
        for i in range(len(self.ap)):
            # bit pattern: blocks of 2^i zeros then 2^i ones, repeated
            block = ((1 << (1 << i)) - 1) << (1 << i)
            period = 1 << (i + 1)
            t, width = block, period
            while width < self.size:
                t |= t << width
                width *= 2
            tables.append(t)
        return tables

    def _check_table_size(self):
        if len(self.ap) > MAX_TRUTH_TABLE_AP:
            raise ValueError(f"truth tables limited to {MAX_TRUTH_TABLE_AP} propositions")

    def literal_table(self, name: str, positive: bool = True) -> int:
        t = self._literal_tables[self.index[name]]
        return t if positive else self.full ^ t

    def cube_table(self, pos, negs) -> int:
        t = self.full
        for a in pos:
            t &= self._literal_tables[self.index[a]]
        for a in negs:
            t &= self.full ^ self._literal_tables[self.index[a]]
        return t

    def table(self, guard: Guard) -> int:
        t = 0
        for pos, negs in guard.cubes:
            t |= self.cube_table(pos, negs)
        return t

    def cover(self, table: int) -> list[Cube]:
        """Irredundant cover of a truth table by prime implicants (greedy expansion)."""
        n = len(self.ap)
        cubes: list[Cube] = []
        tables: list[int] = []
        rest = table
        while rest:
            m = (rest & -rest).bit_length() - 1
            fixed = list(range(n))
            for i in range(n):
                trial = [j for j in fixed if j != i]
                if self._fixed_table(m, trial) & ~table == 0:
                    fixed = trial
            ct = self._fixed_table(m, fixed)
            pos = frozenset(self.ap[j] for j in fixed if m >> j & 1)
            negs = frozenset(self.ap[j] for j in fixed if not m >> j & 1)
            cubes.append((pos, negs))
            tables.append(ct)
            rest &= ~ct
        # drop cubes covered by the others
        i = 0
        while i < len(cubes):
            others = 0
            for j, t in enumerate(tables):
                if j != i:
                    others |= t
            if tables[i] & ~others == 0:
                del cubes[i], tables[i]
            else:
                i += 1
        return cubes

    def _fixed_table(self, minterm: int, fixed) -> int:
        t = self.full
        for j in fixed:
            lit = self._literal_tables[j]
            t &= lit if minterm >> j & 1 else self.full ^ lit
        return t

    def guard_from_table(self, table: int) -> Guard:
        if table == self.full:
            return Guard(true())
        return Guard.from_cubes(self.cover(table))
