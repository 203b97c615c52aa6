"""LTL abstract syntax and the ASCII parser.

Grammar (loosest binding first)::

    impl  := or ('->' impl)?
    or    := and ('||' and)*
    and   := until ('&&' until)*
    until := unary (('U' | 'R') until)?
    unary := ('!' | 'X' | '<>' | '[]') unary | atom | 'true' | 'false' | '(' impl ')'
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

TRUE, FALSE, AP = "true", "false", "ap"
NOT, AND, OR, IMPLIES = "!", "&&", "||", "->"
NEXT, UNTIL, RELEASE, EVENTUALLY, ALWAYS = "X", "U", "R", "<>", "[]"

_ARITY = {
    TRUE: 0, FALSE: 0, AP: 0,
    NOT: 1, NEXT: 1, EVENTUALLY: 1, ALWAYS: 1,
    AND: 2, OR: 2, IMPLIES: 2, UNTIL: 2, RELEASE: 2,
}
TEMPORAL = frozenset({NEXT, UNTIL, RELEASE, EVENTUALLY, ALWAYS})


@dataclass(frozen=True)
class Ltl:
    """Immutable LTL syntax node.

    ``op`` is one of the module-level operator constants; ``name`` is only set
    for atoms. Nodes are hashable so they can be used as tableau obligations.
    """

    op: str
    args: tuple["Ltl", ...] = ()
    name: str | None = None

    def __post_init__(self):
        if self.op not in _ARITY:
            raise ValueError(f"unknown operator {self.op!r}")
        if len(self.args) != _ARITY[self.op]:
            raise ValueError(f"{self.op} expects {_ARITY[self.op]} operands, got {len(self.args)}")
        if (self.op == AP) != (self.name is not None):
            raise ValueError("only atoms carry a name")

    def __str__(self):
        return to_text(self)

    @property
    def is_temporal(self) -> bool:
        return self.op in TEMPORAL or any(a.is_temporal for a in self.args)

    def atoms(self) -> frozenset[str]:
        if self.op == AP:
            return frozenset({self.name})
        out: frozenset[str] = frozenset()
        for a in self.args:
            out |= a.atoms()
        return out

    def subformulas(self):
        """Post-order, duplicates removed."""
        seen: dict[Ltl, None] = {}

        def walk(f):
            for a in f.args:
                walk(a)
            seen.setdefault(f, None)

        walk(self)
        return list(seen)


def true() -> Ltl:
    return Ltl(TRUE)


def false() -> Ltl:
    return Ltl(FALSE)


def atom(name: str) -> Ltl:
    return Ltl(AP, name=name)


def neg(f: Ltl) -> Ltl:
    return Ltl(NOT, (f,))


def conj(a: Ltl, b: Ltl) -> Ltl:
    return Ltl(AND, (a, b))


def disj(a: Ltl, b: Ltl) -> Ltl:
    return Ltl(OR, (a, b))


def implies(a: Ltl, b: Ltl) -> Ltl:
    return Ltl(IMPLIES, (a, b))


def nxt(f: Ltl) -> Ltl:
    return Ltl(NEXT, (f,))


def until(a: Ltl, b: Ltl) -> Ltl:
    return Ltl(UNTIL, (a, b))


def release(a: Ltl, b: Ltl) -> Ltl:
    return Ltl(RELEASE, (a, b))


def eventually(f: Ltl) -> Ltl:
    return Ltl(EVENTUALLY, (f,))


def always(f: Ltl) -> Ltl:
    return Ltl(ALWAYS, (f,))


def to_text(f: Ltl) -> str:
    """Render in the ASCII syntax accepted by :func:`parse_ltl`.

    Binary operands are always parenthesised unless atomic, so the output
    re-parses to the same tree regardless of associativity.
    """
    if f.op == TRUE:
        return "true"
    if f.op == FALSE:
        return "false"
    if f.op == AP:
        return f.name
    if len(f.args) == 1:
        inner = to_text(f.args[0])
        if f.args[0].args and len(f.args[0].args) == 2:
            inner = f"({inner})"
        sep = " " if f.op == NEXT else ""
        return f"{f.op}{sep}{inner}"
    parts = []
    for a in f.args:
        s = to_text(a)
        if len(a.args) == 2:
            s = f"({s})"
        parts.append(s)
    return f" {f.op} ".join(parts)


class LtlSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UndeclaredAtomError(ValueError):
    def __init__(self, name: str, position: int | None = None):
        where = "" if position is None else f" (position {position})"
        super().__init__(f"undeclared atomic proposition {name!r}{where}")
        self.atom = name
        self.position = position


class NextOperatorWarning(UserWarning):
    """The next operator has no clear meaning for continuous-time plans."""


_TOKEN = re.compile(
    r"\s*(?:(?P<op>&&|\|\||->|<>|\[\]|!|\(|\))|(?P<id>[A-Za-z_][A-Za-z0-9_]*))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise LtlSyntaxError(f"unexpected character {text[start]!r}", start)
        kind = "op" if m.group("op") else "id"
        value = m.group(kind)
        out.append((kind, value, m.start(kind)))
        pos = m.end()
    out.append(("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, ap):
        self.toks = _tokenize(text)
        self.i = 0
        self.ap = ap
        self.saw_next = False

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, v, pos = self.take()
        if v != value:
            raise LtlSyntaxError(f"expected {value!r}, found {v or 'end of input'!r}", pos)

    def parse(self) -> Ltl:
        f = self.implication()
        kind, v, pos = self.peek()
        if kind != "eof":
            raise LtlSyntaxError(f"unexpected token {v!r}", pos)
        return f

    def implication(self):
        left = self.disjunction()
        if self.peek()[1] == "->":
            self.take()
            return implies(left, self.implication())
        return left

    def disjunction(self):
        left = self.conjunction()
        while self.peek()[1] == "||":
            self.take()
            left = disj(left, self.conjunction())
        return left

    def conjunction(self):
        left = self.until()
        while self.peek()[1] == "&&":
            self.take()
            left = conj(left, self.until())
        return left

    def until(self):
        left = self.unary()
        kind, v, _ = self.peek()
        if kind == "id" and v in ("U", "R"):
            self.take()
            return (until if v == "U" else release)(left, self.until())
        return left

    def unary(self):
        kind, v, pos = self.take()
        if v == "!":
            return neg(self.unary())
        if v == "<>":
            return eventually(self.unary())
        if v == "[]":
            return always(self.unary())
        if kind == "id" and v == "X":
            self.saw_next = True
            return nxt(self.unary())
        if v == "(":
            f = self.implication()
            self.expect(")")
            return f
        if kind == "id":
            if v == "true":
                return true()
            if v == "false":
                return false()
            if v in ("U", "R"):
                raise LtlSyntaxError(f"{v!r} is missing its left operand", pos)
            if self.ap is not None and v not in self.ap:
                raise UndeclaredAtomError(v, pos)
            return atom(v)
        raise LtlSyntaxError(f"unexpected {v or 'end of input'!r}", pos)


def parse_ltl(text: str, ap=None) -> Ltl:
    """Parse ``text`` into an :class:`Ltl` tree.

    ``ap`` is the declared proposition set; atoms outside it raise
    :class:`UndeclaredAtomError`. Passing ``None`` skips the check (used when
    re-reading exported guards).
    """
    if not text or not text.strip():
        raise LtlSyntaxError("empty formula", 0)
    if ap is not None and not ap:
        raise ValueError("atomic proposition set must be nonempty")
    p = _Parser(text, None if ap is None else frozenset(ap))
    f = p.parse()
    if p.saw_next:
        warnings.warn("formula uses the next operator X", NextOperatorWarning, stacklevel=2)
    return f
