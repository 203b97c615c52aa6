"""Violation-weighted RRT* over the relaxed product (prefix tree, then suffix trees).

Every sampled point is shared by all automaton states: tree arrays are
indexed ``[point, q]`` and a product node is a (point, state) pair. A new
point is connected, for each automaton state ``q'`` separately, to the
cheapest neighbour node ``(p, q)`` with an automaton edge ``q -> q'``; the
edge weight is ``length + beta * D_V(label(p), guard(q, q'))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import shortest_path

from ..ltl.nba import Nba
from ..workspace import Workspace
from . import _kernel
from .product import LassoPlan, NoPlanError, ProductState, ViolationTable, default_beta


@dataclass(frozen=True)
class PlanParams:
    eta: float
    max_iters: int = 30_000
    seed: int = 0
    beta: float | None = None  # default 1e4 * workspace diameter
    goal_tolerance: float | None = None  # default eta / 10
    goal_bias: float = 0.1
    n_roots: int = 3
    prefix_fraction: float = 0.5
    feasible_only: bool = False
    debug: bool = False

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.n_roots < 1:
            raise ValueError("n_roots must be at least 1")


class _Context:
    def __init__(self, ws: Workspace, nba: Nba, params: PlanParams):
        self.ws = ws
        self.nba = nba
        self.params = params
        self.eta = params.eta
        self.beta = params.beta if params.beta is not None else default_beta(ws)
        self.table = ViolationTable(nba, ws)
        self.ns = len(nba.states)
        self.gamma = 2.0 * ws.diameter
        self.labeled = [r.shape for r in ws.regions]
        self.code_row = np.full(1 << len(ws.ap), -1, dtype=np.int64)
        self.dv = np.zeros((0, self.ns, self.ns))
        d = ws.dim
        self.geom = (*ws._box_arrays, *ws._ball_arrays)
        bit = {a: 1 << i for i, a in enumerate(ws.ap)}
        boxes = [r for r in ws.regions if r.shape.kind == "box"]
        balls = [r for r in ws.regions if r.shape.kind == "ball"]
        self.labels = (
            np.array([r.shape.lo for r in boxes], dtype=float).reshape(-1, d),
            np.array([r.shape.hi for r in boxes], dtype=float).reshape(-1, d),
            np.array([bit[r.label] for r in boxes], dtype=np.int64),
            np.array([r.shape.center for r in balls], dtype=float).reshape(-1, d),
            np.array([r.shape.radius for r in balls], dtype=float),
            np.array([bit[r.label] for r in balls], dtype=np.int64),
            bit.get(ws.obstacle_label, 0),
        )
        self.kparams = (float(self.eta), float(self.gamma), float(self.beta))

    def row(self, x) -> int:
        return self.row_for_code(int(self.ws.label_codes(np.asarray(x)[None])[0]))

    def row_for_code(self, code: int) -> int:
        r = int(self.code_row[code])
        if r < 0:
            r = self.table.row(code)
            self.code_row[code] = r
            dv = self.table.stack.copy()
            if self.params.feasible_only:
                dv[dv > 0] = np.inf
            self.dv = dv
        return r


class Tree:
    """One search tree over (point, automaton state) nodes; growth runs in a compiled kernel."""

    def __init__(self, ctx: _Context, root_x, root_q: int, cap: int, rng: np.random.Generator):
        self.ctx = ctx
        self.rng = rng
        d, ns = ctx.ws.dim, ctx.ns
        cap = cap + 1
        self.pts = np.zeros((cap, d))
        self.rows = np.zeros(cap, dtype=np.int64)
        self.W = np.full((cap, ns), np.inf)
        self.G = np.full((cap, ns), np.inf)
        self.V = np.full((cap, ns), np.inf)
        self.parent = np.full((cap, ns), -1, dtype=np.int64)
        self.first_child = np.full(cap * ns, -1, dtype=np.int64)
        self.next_sib = np.full(cap * ns, -1, dtype=np.int64)
        self.counters = np.array([1, 0], dtype=np.int64)  # points, rewires
        self.pts[0] = root_x
        self.rows[0] = ctx.row(self.pts[0])
        self.W[0, root_q] = self.G[0, root_q] = self.V[0, root_q] = 0.0
        self.root_q = root_q
        self.iters = 0

    @property
    def n(self) -> int:
        return int(self.counters[0])

    @property
    def rewires(self) -> int:
        return int(self.counters[1])

    def _samples(self, m: int) -> np.ndarray:
        ctx, rng = self.ctx, self.rng
        ws = ctx.ws
        out = rng.uniform(ws.lo, ws.hi, size=(m, ws.dim))
        if ctx.labeled and ctx.params.goal_bias > 0:
            biased = np.flatnonzero(rng.random(m) < ctx.params.goal_bias)
            which = rng.integers(len(ctx.labeled), size=len(biased))
            for i, w in zip(biased, which):
                out[i] = ctx.labeled[w].sample(rng)
        return out

    def grow(self, iters: int):
        if iters <= 0:
            return
        ctx = self.ctx
        samples = self._samples(iters)
        state = (self.pts, self.rows, self.W, self.G, self.V, self.parent,
                 self.first_child, self.next_sib, self.counters)
        step = 1 if ctx.params.debug else iters
        done = 0
        while done < iters:
            stop = min(iters, done + step)
            it, status, code = _kernel.grow(state, samples[:stop], done, ctx.geom, ctx.labels,
                                            ctx.dv, ctx.code_row, ctx.kparams)
            if status == _kernel.NEED_ROW:
                ctx.row_for_code(int(code))
                done = it
                continue
            done = stop if status == 0 else iters
            if ctx.params.debug:
                self.audit()
        self.iters += iters

    # --- queries ------------------------------------------------------------

    def audit(self):
        """Check cost bookkeeping of every node against its parent edge."""
        ctx = self.ctx
        ns, beta, dv = ctx.ns, ctx.beta, ctx.dv
        for a in range(self.n):
            for b in range(ns):
                if not np.isfinite(self.W[a, b]):
                    continue
                assert math.isclose(self.W[a, b], self.G[a, b] + beta * self.V[a, b], rel_tol=1e-12, abs_tol=1e-9)
                par = int(self.parent[a, b])
                if par < 0:
                    assert a == 0 and b == self.root_q and self.W[a, b] == 0
                    continue
                p, q = divmod(par, ns)
                length = float(np.linalg.norm(self.pts[a] - self.pts[p]))
                assert math.isclose(self.G[a, b], self.G[p, q] + length, rel_tol=1e-9, abs_tol=1e-9)
                assert self.V[a, b] == self.V[p, q] + dv[self.rows[p], q, b]

    def path(self, p: int, q: int) -> list[tuple[int, int]]:
        ns = self.ctx.ns
        out = [(p, q)]
        while self.parent[p, q] >= 0:
            p, q = divmod(int(self.parent[p, q]), ns)
            out.append((p, q))
        return out[::-1]

    def states(self, nodes) -> list[ProductState]:
        return [ProductState(tuple(float(v) for v in self.pts[p]), int(q)) for p, q in nodes]

    def best_closure(self):
        """Cheapest edge from a tree node back to the root: (viol, length, p, q) or None."""
        ctx = self.ctx
        n, ns = self.n, ctx.ns
        x_r = self.pts[0]
        diff = self.pts[1:n] - x_r
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        idx = np.flatnonzero((d <= ctx.eta) & (d > 0)) + 1
        if not len(idx):
            return None
        d = d[idx - 1]
        free = ctx.ws.segments_free(self.pts[idx], x_r[None])
        idx, d = idx[free], d[free]
        if not len(idx):
            return None
        close = ctx.dv[self.rows[idx], :, self.root_q]  # (k, ns)
        viol = self.V[idx] + close
        length = self.G[idx] + d[:, None]
        viol, length = viol.ravel(), length.ravel()
        finite = np.isfinite(viol)
        if not finite.any():
            return None
        order = np.lexsort((np.arange(len(viol)), length, viol))
        k, q = divmod(int(order[0]), ns)
        return float(viol[order[0]]), float(length[order[0]]), int(idx[k]), q


def _estimate_cycle_violation(ctx: _Context, rows, states) -> dict[tuple[int, int], float]:
    """Lower-bound-style estimate of suffix violation for a root (label row, q).

    Treats every observed label as reachable from every other one and solves
    the resulting small graph over (label, q) exactly.
    """
    rows = sorted(set(int(r) for r in rows))
    ns = ctx.ns
    dv = ctx.dv
    m = len(rows) * ns
    w = np.full((m, m), np.inf)
    for i, r in enumerate(rows):
        for q in range(ns):
            u = i * ns + q
            for i2 in range(len(rows)):
                w[u, i2 * ns: (i2 + 1) * ns] = dv[r, q]
    zero = w == 0
    w[zero] = 1e-12  # keep zero-violation edges present for the solver
    dist = shortest_path(w, method="D", directed=True)
    dist[dist < 1e-6] = 0.0
    out = {}
    for r, q in states:
        i = rows.index(int(r))
        u = i * ns + q
        cyc = np.inf
        for v in range(m):
            if np.isfinite(w[u, v]):
                cyc = min(cyc, (0.0 if zero[u, v] else w[u, v]) + dist[v, u])
        out[(int(r), int(q))] = float(np.round(cyc, 6))
    return out


def plan_lasso(ws: Workspace, nba: Nba, params: PlanParams) -> LassoPlan:
    """Minimum-violation lasso by prefix/suffix RRT* over the relaxed product."""
    if not nba.accepting:
        raise NoPlanError("automaton has an empty language", ())
    ctx = _Context(ws, nba, params)
    seeds = np.random.SeedSequence(params.seed).spawn(1 + params.n_roots)
    prefix_budget = max(1, int(params.max_iters * params.prefix_fraction))
    q0 = min(nba.initial)
    tree = Tree(ctx, np.asarray(ws.x0, dtype=float), q0, params.max_iters, np.random.default_rng(seeds[0]))
    for q in sorted(nba.initial - {q0}):
        tree.W[0, q] = tree.G[0, q] = tree.V[0, q] = 0.0
    acc = np.array(sorted(nba.accepting))
    tree.grow(prefix_budget)
    while not np.isfinite(tree.W[: tree.n, acc]).any() and tree.iters < params.max_iters:
        tree.grow(min(1000, params.max_iters - tree.iters))
    reached = set(np.flatnonzero(np.isfinite(tree.W[: tree.n]).any(axis=0)).tolist())
    if not np.isfinite(tree.W[: tree.n, acc]).any():
        raise NoPlanError(
            f"no accepting automaton state reached after {tree.iters} iterations; "
            f"reached states {sorted(reached)}", reached)

    roots = _select_roots(ctx, tree, acc)
    suffix_budget = max(1, (params.max_iters - tree.iters) // len(roots))
    best = None
    for i, (p, q) in enumerate(roots):
        sub = Tree(ctx, tree.pts[p], q, suffix_budget, np.random.default_rng(seeds[1 + i]))
        sub.grow(suffix_budget)
        close = sub.best_closure()
        if close is None:
            continue
        sv, sl, sp, sq = close
        key = (sv, float(tree.V[p, q]), float(tree.G[p, q]) + sl)
        if best is None or key < best[0]:
            best = (key, p, q, sub, sp, sq)
    if best is None:
        raise NoPlanError(f"no suffix cycle closed at any of {len(roots)} candidate roots", reached)

    (sv, pv, _), p, q, sub, sp, sq = best
    prefix = tree.states(tree.path(p, q))
    suffix = sub.states(sub.path(sp, sq))
    suffix[0] = prefix[-1]
    return LassoPlan(
        prefix=tuple(prefix), suffix=tuple(suffix),
        prefix_violation=pv, suffix_violation=sv,
        prefix_length=float(tree.G[p, q]), suffix_length=float(best[0][2] - tree.G[p, q]),
        seed=params.seed, iters=params.max_iters,
        meta={"prefix_nodes": int(tree.n), "roots": len(roots)},
    )


def _select_roots(ctx: _Context, tree: Tree, acc) -> list[tuple[int, int]]:
    """Pick up to ``n_roots`` accepting nodes, one per (automaton state, label) group first."""
    params = ctx.params
    n = tree.n
    cand = [(int(p), int(acc[k])) for p, k in np.argwhere(np.isfinite(tree.W[:n, acc]))]
    est = _estimate_cycle_violation(ctx, tree.rows[:n], {(tree.rows[p], q) for p, q in cand})

    def rank(node):
        p, q = node
        return (est[(int(tree.rows[p]), q)], tree.V[p, q], tree.G[p, q], p, q)

    cand.sort(key=rank)
    tol = params.goal_tolerance if params.goal_tolerance is not None else params.eta / 10
    chosen, groups = [], set()
    for p, q in cand:
        g = (int(tree.rows[p]), q)
        if g not in groups:
            groups.add(g)
            chosen.append((p, q))
    chosen.sort(key=rank)
    chosen = chosen[: params.n_roots]
    # spare slots: further roots from the best group, spread at least goal_tolerance apart
    for p, q in cand:
        if len(chosen) >= params.n_roots:
            break
        if (p, q) in chosen or (int(tree.rows[p]), q) != (int(tree.rows[chosen[0][0]]), chosen[0][1]):
            continue
        if all(np.linalg.norm(tree.pts[p] - tree.pts[c]) > tol for c, _ in chosen):
            chosen.append((p, q))
    return chosen
