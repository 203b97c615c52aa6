import itertools
import json
import math
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvltl.ltl import (Guard, LtlSyntaxError, Nba, NextOperatorWarning, SymbolSpace, UNSAT,
                       UndeclaredAtomError, eval_symbol, parse_ltl, rho, satisfies_lasso, to_nba,
                       to_text, violation_distance)
from mvltl.ltl.check import language_mismatches
from mvltl.ltl.syntax import (AND, AP, Ltl, always, atom, conj, disj,
                              eventually, false, neg, true, until)

from corpus import AP3, FORMULAS


def brute_distance(symbol, guard, ap):
    best = math.inf
    for bits in itertools.product([0, 1], repeat=len(ap)):
        s = frozenset(a for a, b in zip(ap, bits) if b)
        if guard.holds(s):
            best = min(best, rho(symbol, s))
    return best


def subsets(ap):
    return [frozenset(c) for r in range(len(ap) + 1) for c in itertools.combinations(ap, r)]


class TestParser:
    def test_example_nesting(self):
        f = parse_ltl("[]!O && <>(G1 && <>G2)", {"O", "G1", "G2"})
        expected = conj(always(neg(atom("O"))), eventually(conj(atom("G1"), eventually(atom("G2")))))
        assert f == expected

    def test_until_right_associative(self):
        assert parse_ltl("a U b U c") == until(atom("a"), until(atom("b"), atom("c")))

    def test_undeclared_atom(self):
        with pytest.raises(UndeclaredAtomError) as err:
            parse_ltl("<> G7", {"G1"})
        assert err.value.atom == "G7"
        assert "G7" in str(err.value)

    def test_precedence(self):
        f = parse_ltl("a || b && c -> d")
        assert f.op == "->"
        assert f.args[0] == disj(atom("a"), conj(atom("b"), atom("c")))
        g = parse_ltl("!a U b && c")
        assert g == conj(until(neg(atom("a")), atom("b")), atom("c"))
        assert parse_ltl("<>a U b") == until(eventually(atom("a")), atom("b"))

    def test_parentheses_override(self):
        assert parse_ltl("(a || b) && c") == conj(disj(atom("a"), atom("b")), atom("c"))

    def test_implication_right_associative(self):
        f = parse_ltl("a -> b -> c")
        assert f.args[1].op == "->"

    @pytest.mark.parametrize("text,pos", [("a &&", 4), ("(a", 2), ("a $ b", 2), ("U a", 0), ("a b", 2)])
    def test_syntax_error_position(self, text, pos):
        with pytest.raises(LtlSyntaxError) as err:
            parse_ltl(text)
        assert err.value.position == pos

    def test_empty_inputs(self):
        with pytest.raises(LtlSyntaxError):
            parse_ltl("   ")
        with pytest.raises(ValueError):
            parse_ltl("a", set())

    def test_next_warns(self):
        with pytest.warns(NextOperatorWarning):
            parse_ltl("X a")

    def test_literals(self):
        assert parse_ltl("true") == true()
        assert parse_ltl("false || a") == disj(false(), atom("a"))

    def test_arity_checked(self):
        with pytest.raises(ValueError):
            Ltl(AND, (atom("a"),))
        with pytest.raises(ValueError):
            Ltl(AP)

    @pytest.mark.parametrize("text", FORMULAS)
    def test_text_round_trip(self, text):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NextOperatorWarning)
            f = parse_ltl(text)
            assert parse_ltl(to_text(f)) == f


class TestSymbols:
    def test_eval_symbol(self):
        order = ("G1", "G2", "O")
        assert eval_symbol({"G1"}, order) == (1, 0, 0)
        assert eval_symbol(set(), order) == (0, 0, 0)
        assert eval_symbol(set(order), order) == (1, 1, 1)

    def test_rho_examples(self):
        assert rho({"G1"}, {"G1"}) == 0
        assert rho({"G1"}, {"G2"}) == 2
        assert rho(set(), {"G1", "G2", "O"}) == 3

    @given(st.lists(st.sets(st.sampled_from("abcde")), min_size=3, max_size=3))
    def test_rho_is_metric(self, triple):
        x, y, z = triple
        assert rho(x, y) >= 0
        assert (rho(x, y) == 0) == (set(x) == set(y))
        assert rho(x, y) == rho(y, x)
        assert rho(x, z) <= rho(x, y) + rho(y, z)


class TestViolationDistance:
    AP4 = ("G1", "G2", "G3", "O")

    def test_satisfied(self):
        assert violation_distance({"G2"}, Guard.parse("G2 && !O")) == 0

    def test_empty_symbol(self):
        # brute-force minimum over the 16 symbols of AP4
        assert violation_distance(set(), Guard.parse("G2")) == 1
        assert brute_distance(frozenset(), Guard.parse("G2"), self.AP4) == 1

    def test_obstacle_symbol(self):
        assert violation_distance({"O"}, Guard.parse("G2 && !O")) == 2
        assert brute_distance(frozenset({"O"}), Guard.parse("G2 && !O"), self.AP4) == 2

    def test_unsatisfiable(self):
        g = Guard.parse("G1 && !G1")
        assert violation_distance(set(), g) == UNSAT
        assert not g.satisfiable

    def test_true_guard(self):
        assert violation_distance({"O", "G1"}, Guard(true())) == 0

    def test_temporal_guard_rejected(self):
        with pytest.raises(ValueError):
            Guard(eventually(atom("a")))


_ATOMS6 = ("a", "b", "c", "d", "e", "f")


def _guards(atoms):
    leaf = st.sampled_from(atoms).map(atom) | st.sampled_from([true(), false()])
    return st.recursive(
        leaf,
        lambda inner: st.one_of(
            inner.map(neg),
            st.tuples(inner, inner).map(lambda t: conj(*t)),
            st.tuples(inner, inner).map(lambda t: disj(*t)),
            st.tuples(inner, inner).map(lambda t: Ltl("->", t)),
        ),
        max_leaves=10,
    ).map(Guard)


class TestViolationProperties:
    @settings(max_examples=150, deadline=None)
    @given(_guards(_ATOMS6[:4]))
    def test_zero_iff_satisfied(self, guard):
        for s in subsets(_ATOMS6[:4]):
            assert (violation_distance(s, guard) == 0) == guard.holds(s)

    @settings(max_examples=100, deadline=None)
    @given(_guards(_ATOMS6), st.sets(st.sampled_from(_ATOMS6)))
    def test_matches_enumeration(self, guard, symbol):
        assert violation_distance(symbol, guard) == brute_distance(frozenset(symbol), guard, _ATOMS6)

    @settings(max_examples=100, deadline=None)
    @given(_guards(_ATOMS6[:5]))
    def test_truth_table_cover_is_equivalent(self, guard):
        space = SymbolSpace(_ATOMS6[:5])
        table = space.table(guard)
        rebuilt = space.guard_from_table(table)
        assert space.table(rebuilt) == table
        for code in range(space.size):
            assert rebuilt.holds(space.decode(code)) == bool(table >> code & 1)


class TestTranslation:
    def test_eventually_shape(self):
        nba = to_nba(parse_ltl("<> a"))
        assert len(nba) == 2
        assert nba.initial == frozenset({0})
        assert nba.accepting == frozenset({1})
        assert nba.guard(1, 1).text() == "true"
        assert nba.guard(0, 1).text() == "a"
        assert not language_mismatches(parse_ltl("<> a"), nba)

    def test_infinitely_often(self):
        f = parse_ltl("[]<> a")
        nba = to_nba(f)
        assert not language_mismatches(f, nba)
        assert nba.accepts_lasso([], [{"a"}, set()])
        assert not nba.accepts_lasso([{"a"}] * 3, [set()])

    def test_sequential_chain_structure(self):
        f = parse_ltl("[]!O && <>(G1 && <>(G2 && <>G3))")
        nba = to_nba(f)
        # one state per stage of progress, a single accepting state
        assert len(nba) == 4
        assert len(nba.accepting) == 1
        (acc,) = nba.accepting
        assert nba.successors(acc) == (acc,)
        assert nba.guard(acc, acc).text() == "!O"
        for _, g, _ in nba.edges:
            assert violation_distance({"O"}, g) >= 1

    def test_unsatisfiable_formula(self):
        nba = to_nba(parse_ltl("[]a && <>!a"))
        assert not nba.accepting
        assert not nba.edges

    @pytest.mark.parametrize("text", FORMULAS[:8])
    def test_language_agreement(self, text):
        f = parse_ltl(text)
        nba = to_nba(f, AP3)
        assert language_mismatches(f, nba, max_prefix=3, max_loop=3) == []

    def test_checker_detects_wrong_automaton(self):
        f = parse_ltl("[]<> G1")
        wrong = to_nba(parse_ltl("<> G1"), AP3)
        found = language_mismatches(f, wrong, max_prefix=2, max_loop=2, limit=1)
        assert found
        m = found[0]
        assert satisfies_lasso(f, m.prefix, m.loop) == m.semantics

    def test_guard_atoms_within_ap(self):
        nba = to_nba(parse_ltl("[]!O && []<>G1"), ("G1", "G2", "O"))
        for _, g, _ in nba.edges:
            assert g.atoms() <= {"G1", "G2", "O"}
            assert g.satisfiable

    def test_json_round_trip(self):
        nba = to_nba(parse_ltl("[]!O && []<>G1 && []<>G2"))
        data = json.loads(nba.dumps())
        assert set(data) >= {"states", "initial", "accepting", "edges"}
        again = Nba.from_json(data)
        assert again.states == nba.states and again.accepting == nba.accepting
        for (s, g, d), (s2, g2, d2) in zip(nba.edges, again.edges):
            assert (s, d) == (s2, d2)
            assert SymbolSpace(nba.ap).table(g) == SymbolSpace(nba.ap).table(g2)

    def test_all_states_reachable(self):
        nba = to_nba(parse_ltl("[]!O && []<>(G1 && <>G2)"))
        seen, todo = set(nba.initial), list(nba.initial)
        while todo:
            for d in nba.successors(todo.pop()):
                if d not in seen:
                    seen.add(d)
                    todo.append(d)
        assert seen == set(nba.states)


_ATOMS2 = ("a", "b")


def _temporal(atoms):
    leaf = st.sampled_from(atoms).map(atom)
    return st.recursive(
        leaf,
        lambda inner: st.one_of(
            inner.map(neg), inner.map(eventually), inner.map(always),
            st.tuples(inner, inner).map(lambda t: conj(*t)),
            st.tuples(inner, inner).map(lambda t: disj(*t)),
            st.tuples(inner, inner).map(lambda t: until(*t)),
            st.tuples(inner, inner).map(lambda t: Ltl("R", t)),
        ),
        max_leaves=5,
    )


@settings(max_examples=40, deadline=None)
@given(_temporal(_ATOMS2))
def test_random_formulas_translate_correctly(f):
    nba = to_nba(f, _ATOMS2)
    assert language_mismatches(f, nba, max_prefix=3, max_loop=3) == []
