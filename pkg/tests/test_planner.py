import json
import math

import numpy as np
import pytest

from mvltl import scenarios
from mvltl.ltl import parse_ltl, to_nba
from mvltl.planner import (GridTooLargeError, LassoPlan, NoPlanError, PlanParams, ProductState, default_beta,
                           grid_oracle_plan, plan_lasso, product_edge, replay, total_violation)
from mvltl.workspace import Obstacle, Region, Shape, Workspace

_CACHE = {}


def load(name):
    if name not in _CACHE:
        ws = scenarios.load(name)
        _CACHE[name] = (ws, to_nba(parse_ltl(ws.meta["formula"]), ap=ws.ap))
    return _CACHE[name]


def oracle(name):
    key = ("oracle", name)
    if key not in _CACHE:
        ws, nba = load(name)
        _CACHE[key] = grid_oracle_plan(ws, nba, 0.25, eta=1.0)
    return _CACHE[key]


def sealed_ws(pocket=False):
    # x0 buried inside a block: no segment leaves it, so the product graph is disconnected.
    # With pocket=True the start sits in a small walled-off free corner instead.
    if pocket:
        walls = [Shape.box((0.0, 2.0), (2.0, 2.2)), Shape.box((2.0, 0.0), (2.2, 2.2))]
    else:
        walls = [Shape.box((0.5, 0.5), (1.5, 1.5))]
    return Workspace(lo=(0, 0), hi=(10, 10), x0=(1, 1), ap=("G1", "O"),
                     regions=(Region("G1", Shape.box((8, 8), (9, 9))),),
                     obstacles=tuple(Obstacle(w) for w in walls))


class TestProductEdge:
    def setup_method(self):
        self.ws, self.nba = load("corridor")
        self.acc = next(iter(self.nba.accepting))
        self.q0 = next(iter(self.nba.initial))

    def test_wrong_label_costs_one_atom(self):
        # leaving a free point towards the accepting state needs G1 to hold
        e = product_edge(ProductState((1, 1), self.q0), ProductState((1.5, 1), self.acc), self.nba, self.ws, 1.0)
        assert e == pytest.approx((0.5, 1))

    def test_matching_label_is_free(self):
        e = product_edge(ProductState((8.5, 8.5), self.q0), ProductState((8.5, 9.0), self.acc),
                         self.nba, self.ws, 1.0)
        assert e == pytest.approx((0.5, 0))

    def test_too_long(self):
        assert product_edge(ProductState((1, 1), self.q0), ProductState((2.5, 1), self.q0),
                            self.nba, self.ws, 1.0) is None

    def test_through_wall(self):
        assert product_edge(ProductState((2.8, 5), self.q0), ProductState((4.2, 5), self.q0),
                            self.nba, self.ws, 2.0) is None


class TestLassoPlan:
    def make(self, pv=0.0, sv=1.0):
        a, b = ProductState((0, 0), 0), ProductState((1, 0), 1)
        return LassoPlan(prefix=(a, b), suffix=(b, ProductState((1, 1), 1)), prefix_violation=pv,
                         suffix_violation=sv, prefix_length=1.0, suffix_length=2.0)

    def test_total_violation(self):
        assert total_violation(self.make(pv=2.0, sv=1.0), 1000.0) == 1002.0

    def test_key_order(self):
        assert self.make(pv=5.0, sv=0.0).key < self.make(pv=0.0, sv=1.0).key

    def test_suffix_must_start_at_prefix_end(self):
        with pytest.raises(ValueError):
            LassoPlan(prefix=(ProductState((0, 0), 0),), suffix=(ProductState((1, 0), 1),), prefix_violation=0,
                      suffix_violation=0, prefix_length=0, suffix_length=0)

    def test_json_round_trip(self):
        p = self.make()
        again = LassoPlan.from_json(json.loads(p.dumps(beta=10.0)))
        assert again == p
        assert json.loads(p.dumps(beta=10.0))["violation"]["total"] == 10.0

    def test_default_beta(self):
        ws, _ = load("corridor")
        assert default_beta(ws) == pytest.approx(1e4 * math.hypot(10, 10))


class TestOracle:
    def test_enclosed_goal_costs_one_per_cycle(self):
        o = oracle("enclosed_g3")
        assert (o.suffix_violation, o.prefix_violation) == (1.0, 0.0)

    def test_two_enclosed_goals_cost_two(self):
        o = oracle("two_enclosed")
        assert (o.suffix_violation, o.prefix_violation) == (2.0, 0.0)

    def test_feasible_scenarios_cost_nothing(self):
        for name in ("corridor", "multi_goal"):
            assert oracle(name).key[:2] == (0.0, 0.0)

    def test_replay_agrees(self):
        for name in scenarios.names():
            ws, nba = load(name)
            o = oracle(name)
            pv, sv, pl, sl = replay(o, nba, ws, 1.0)
            assert (pv, sv) == (o.prefix_violation, o.suffix_violation)
            assert pl + sl == pytest.approx(o.length)

    def test_removing_enclosure_makes_feasible(self):
        ws, nba = load("enclosed_g3")
        o = grid_oracle_plan(ws.without_group("enclosure"), nba, 0.25, eta=1.0)
        assert o.key[:2] == (0.0, 0.0)

    def test_feasible_only_refuses_enclosed_goal(self):
        ws, nba = load("enclosed_g3")
        with pytest.raises(NoPlanError):
            grid_oracle_plan(ws, nba, 0.25, eta=1.0, feasible_only=True)

    def test_sealed_start(self):
        ws = sealed_ws()
        nba = to_nba(parse_ltl("[]!O && <>G1"), ap=ws.ap)
        with pytest.raises(NoPlanError):
            grid_oracle_plan(ws, nba, 0.25, eta=1.0)

    def test_walled_pocket_still_plans(self):
        # the goal cannot be reached, but faking G1 once inside the pocket is allowed
        ws = sealed_ws(pocket=True)
        nba = to_nba(parse_ltl("[]!O && <>G1"), ap=ws.ap)
        o = grid_oracle_plan(ws, nba, 0.25, eta=1.0)
        assert o.key[:2] == (0.0, 1.0)

    def test_grid_too_large(self):
        ws, nba = load("enclosed_g3")
        with pytest.raises(GridTooLargeError) as err:
            grid_oracle_plan(ws, nba, 0.001, eta=1.0)
        assert err.value.suggested_step > 0.001
        # the suggested step fits under the limit
        n = math.floor(10 / err.value.suggested_step) ** 2 * len(nba.states)
        assert n <= 10 ** 6


class TestPlanner:
    @pytest.mark.parametrize("name", scenarios.names())
    def test_matches_oracle_violation(self, name):
        ws, nba = load(name)
        p = plan_lasso(ws, nba, PlanParams(eta=1.0, seed=1))
        o = oracle(name)
        beta = default_beta(ws)
        assert total_violation(p, beta) == total_violation(o, beta)
        pv, sv, pl, sl = replay(p, nba, ws, 1.0)
        assert (pv, sv) == (p.prefix_violation, p.suffix_violation)
        assert pl == pytest.approx(p.prefix_length) and sl == pytest.approx(p.suffix_length)

    def test_deterministic(self):
        ws, nba = load("corridor")
        a = plan_lasso(ws, nba, PlanParams(eta=1.0, seed=3, max_iters=4000))
        b = plan_lasso(ws, nba, PlanParams(eta=1.0, seed=3, max_iters=4000))
        assert a == b

    def test_longer_budget_not_longer_path(self):
        for name in ("corridor", "enclosed_g3"):
            ws, nba = load(name)
            for seed in range(3):
                short = plan_lasso(ws, nba, PlanParams(eta=1.0, seed=seed, max_iters=3000))
                full = plan_lasso(ws, nba, PlanParams(eta=1.0, seed=seed, max_iters=30000))
                assert full.key[:2] <= short.key[:2]
                if full.key[:2] == short.key[:2]:
                    assert full.length <= short.length

    def test_beta_above_threshold_keeps_violation(self):
        ws, nba = load("two_enclosed")
        base = default_beta(ws)
        keys = set()
        for beta in (base, 10 * base, 1e3 * base):
            p = plan_lasso(ws, nba, PlanParams(eta=1.0, seed=0, beta=beta, max_iters=10000))
            keys.add((p.suffix_violation, p.prefix_violation))
        assert keys == {(2.0, 0.0)}

    def test_debug_audit(self):
        ws, nba = load("enclosed_adjacent")
        p = plan_lasso(ws, nba, PlanParams(eta=1.0, seed=0, max_iters=1500, debug=True))
        replay(p, nba, ws, 1.0)

    def test_sealed_start(self):
        ws = sealed_ws()
        nba = to_nba(parse_ltl("[]!O && <>G1"), ap=ws.ap)
        with pytest.raises(NoPlanError):
            plan_lasso(ws, nba, PlanParams(eta=1.0, max_iters=2000))

    def test_feasible_only_refuses_enclosed_goal(self):
        ws, nba = load("enclosed_g3")
        with pytest.raises(NoPlanError):
            plan_lasso(ws, nba, PlanParams(eta=1.0, max_iters=5000, feasible_only=True))

    def test_plan_starts_at_x0(self):
        ws, nba = load("multi_goal")
        p = plan_lasso(ws, nba, PlanParams(eta=1.0, seed=0, max_iters=5000))
        assert np.allclose(p.prefix[0].x, ws.x0) and p.prefix[0].q in nba.initial
        assert p.suffix[0].q in nba.accepting
