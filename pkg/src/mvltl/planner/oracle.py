"""Exact minimum-violation lasso on a grid discretization of the relaxed product.

Nodes are free cell centres plus the initial point. Geometric edges join
nodes whose offset is a primitive integer vector of length at most ``eta``
(so no edge jumps over a closer collinear node) and whose segment is
collision free. Lexicographic (violation, length) costs are scalarized as
``violation * BIG + length`` with ``BIG`` larger than any simple path length,
which makes ordinary Dijkstra exact for the lexicographic order.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from ..ltl.nba import Nba
from ..workspace import Workspace
from .product import LassoPlan, NoPlanError, ProductState, ViolationTable

MAX_PRODUCT_NODES = 10 ** 6


class GridTooLargeError(ValueError):
    def __init__(self, nodes: int, suggested_step: float):
        super().__init__(f"grid would have {nodes} product nodes (limit {MAX_PRODUCT_NODES}); "
                         f"try grid_step >= {suggested_step:.4g}")
        self.nodes = nodes
        self.suggested_step = suggested_step


def _offsets(dim: int, reach: int, step: float, eta: float):
    out = []
    for o in itertools.product(range(-reach, reach + 1), repeat=dim):
        if not any(o):
            continue
        if math.gcd(*[abs(v) for v in o]) != 1:
            continue
        if math.sqrt(sum(v * v for v in o)) * step <= eta * (1 + 1e-12):
            out.append(o)
    return np.array(out, dtype=np.int64)


def _decode(w: float, big: float) -> tuple[float, float]:
    v = math.floor(w / big + 1e-9)
    return float(v), float(w - v * big)


def grid_oracle_plan(ws: Workspace, nba: Nba, grid_step: float, eta: float | None = None,
                     feasible_only: bool = False, chunk: int = 256) -> LassoPlan:
    """Lexicographically optimal lasso (suffix violation, prefix violation, length) on the grid."""
    if eta is None:
        eta = grid_step * math.sqrt(5.0)
    if not grid_step > 0 or eta < grid_step:
        raise ValueError("need grid_step > 0 and eta >= grid_step")
    lo, hi = np.array(ws.lo), np.array(ws.hi)
    counts = np.floor((hi - lo) / grid_step + 1e-9).astype(int)
    ns = len(nba.states)
    total = int(np.prod(counts)) * ns
    if total > MAX_PRODUCT_NODES:
        raise GridTooLargeError(total, grid_step * (total / MAX_PRODUCT_NODES) ** (1 / ws.dim))
    if not nba.accepting:
        raise NoPlanError("automaton has an empty language", ())

    # geometric nodes: index 0 is the initial point, then free cell centres
    idx = np.stack(np.meshgrid(*[np.arange(c) for c in counts], indexing="ij"), axis=-1).reshape(-1, ws.dim)
    centres = lo + (idx + 0.5) * grid_step
    free = ~_inside_any(ws, centres)
    cell_node = np.full(len(centres), -1, dtype=np.int64)
    cell_node[free] = np.arange(1, free.sum() + 1)
    pts = np.vstack([np.asarray(ws.x0, dtype=float)[None], centres[free]])
    n_geo = len(pts)

    src, dst = [], []
    strides = np.cumprod([1] + list(counts[::-1]))[:-1][::-1]
    reach = int(math.floor(eta / grid_step + 1e-9))
    for o in _offsets(ws.dim, reach, grid_step, eta):
        nb = idx + o
        ok = free & np.all((nb >= 0) & (nb < counts), axis=1)
        a = np.flatnonzero(ok)
        b = (nb[a] * strides).sum(axis=1)
        keep = free[b]
        src.append(cell_node[a[keep]])
        dst.append(cell_node[b[keep]])
    # the initial point connects to every free centre within eta
    d0 = np.linalg.norm(pts[1:] - pts[0], axis=1)
    near0 = np.flatnonzero((d0 <= eta) & (d0 > 0)) + 1
    src += [np.zeros(len(near0), dtype=np.int64), near0]
    dst += [near0, np.zeros(len(near0), dtype=np.int64)]
    src, dst = np.concatenate(src), np.concatenate(dst)
    seg_ok = ws.segments_free(pts[src], pts[dst])
    src, dst = src[seg_ok], dst[seg_ok]
    length = np.linalg.norm(pts[dst] - pts[src], axis=1)

    table = ViolationTable(nba, ws)
    codes = ws.label_codes(pts)
    rows = table.rows(codes)
    dv = table.stack.copy()
    if feasible_only:
        dv[dv > 0] = np.inf
    big = 2.0 * (n_geo * ns + 1) * eta

    ps, pd, pw = [], [], []
    for s_q, _, d_q in nba.edges:
        c = dv[rows[src], s_q, d_q]
        ok = np.isfinite(c)
        ps.append(src[ok] * ns + s_q)
        pd.append(dst[ok] * ns + d_q)
        pw.append(c[ok] * big + length[ok])
    ps, pd, pw = np.concatenate(ps), np.concatenate(pd), np.concatenate(pw)
    n_prod = n_geo * ns
    graph = csr_matrix((pw, (ps, pd)), shape=(n_prod, n_prod))
    into = graph.T.tocsr()  # row a lists the edges entering node a

    starts = [q for q in sorted(nba.initial)]
    pre_dist, pre_pred, _ = dijkstra(graph, indices=starts, min_only=True, return_predecessors=True)
    acc = np.array(sorted(nba.accepting))
    cand = (np.arange(n_geo)[:, None] * ns + acc[None, :]).ravel()
    cand = cand[np.isfinite(pre_dist[cand])]
    if not len(cand):
        reached = {int(u % ns) for u in np.flatnonzero(np.isfinite(pre_dist))}
        raise NoPlanError(f"no accepting automaton state reachable on the grid; reached states {sorted(reached)}",
                          reached)

    best = None
    for lo_i in range(0, len(cand), chunk):
        block = cand[lo_i: lo_i + chunk]
        dist = dijkstra(graph, indices=block)
        for i, a in enumerate(block):
            s, e = into.indptr[a], into.indptr[a + 1]
            if s == e:
                continue
            preds = into.indices[s:e]
            cyc = dist[i, preds] + into.data[s:e]
            k = int(np.argmin(cyc))
            if not np.isfinite(cyc[k]):
                continue
            sv, sl = _decode(float(cyc[k]), big)
            pv, pl = _decode(float(pre_dist[a]), big)
            key = (sv, pv, pl + sl)
            if best is None or key < best[0]:
                best = (key, int(a), int(preds[k]), sv, sl, pv, pl)
    if best is None:
        raise NoPlanError("no accepting cycle exists on the grid", {int(a % ns) for a in cand})

    _, a, last, sv, sl, pv, pl = best
    prefix = _walk(pre_pred, a)
    _, cyc_pred = dijkstra(graph, indices=a, return_predecessors=True)
    suffix = _walk(cyc_pred, last)  # a ... last, then back to a

    def state(u):
        return ProductState(tuple(float(v) for v in pts[u // ns]), int(u % ns))

    return LassoPlan(
        prefix=tuple(state(u) for u in prefix),
        suffix=tuple(state(u) for u in suffix),
        prefix_violation=pv, suffix_violation=sv, prefix_length=pl, suffix_length=sl,
        meta={"grid_step": grid_step, "eta": eta, "nodes": int(n_prod), "edges": int(graph.nnz)},
    )


def _walk(pred, target: int) -> list[int]:
    out = [int(target)]
    while pred[out[-1]] >= 0:
        out.append(int(pred[out[-1]]))
    return out[::-1]


def _inside_any(ws: Workspace, pts: np.ndarray) -> np.ndarray:
    hit = np.zeros(len(pts), dtype=bool)
    for o in ws.obstacles:
        hit |= o.shape.contains_many(pts)
    return hit
