"""Compiled inner loop of the product-space RRT*.

Node ``u = p * ns + q`` is point ``p`` in automaton state ``q``. Children are
kept as intrusive singly linked lists (``first_child`` / ``next_sib``) so a
rewire can shift the costs of a whole subtree without Python objects.
"""
import math

import numpy as np
from numba import njit

from .._geom import segment_free

NEED_ROW = 1
FULL = 2


@njit(cache=True)
def label_code(x, rb_lo, rb_hi, rb_bit, rs_c, rs_r, rs_bit, ob_lo, ob_hi, os_c, os_r, obit):
    dim = x.shape[0]
    code = 0
    for k in range(rb_lo.shape[0]):
        inside = True
        for i in range(dim):
            if x[i] < rb_lo[k, i] or x[i] > rb_hi[k, i]:
                inside = False
                break
        if inside:
            code |= rb_bit[k]
    for k in range(rs_c.shape[0]):
        g = 0.0
        for i in range(dim):
            g += (x[i] - rs_c[k, i]) ** 2
        if g <= rs_r[k] ** 2:
            code |= rs_bit[k]
    if obit:
        for k in range(ob_lo.shape[0]):
            inside = True
            for i in range(dim):
                if x[i] < ob_lo[k, i] or x[i] > ob_hi[k, i]:
                    inside = False
                    break
            if inside:
                return code | obit
        for k in range(os_c.shape[0]):
            g = 0.0
            for i in range(dim):
                g += (x[i] - os_c[k, i]) ** 2
            if g <= os_r[k] ** 2:
                return code | obit
    return code


@njit(cache=True)
def _unlink(first_child, next_sib, par, u):
    c = first_child[par]
    if c == u:
        first_child[par] = next_sib[u]
        return
    while c >= 0:
        nx = next_sib[c]
        if nx == u:
            next_sib[c] = next_sib[u]
            return
        c = nx


@njit(cache=True)
def _link(first_child, next_sib, par, u):
    next_sib[u] = first_child[par]
    first_child[par] = u


@njit(cache=True)
def grow(state, samples, start, geom, labels, dv, code_row, params):
    """Run iterations ``start..len(samples)-1``; stops early when a new label needs a row.

    Returns ``(next_iteration, status, code)``.
    """
    pts, rows, W, G, V, parent, first_child, next_sib, counters = state
    box_lo, box_hi, ball_c, ball_r = geom
    rb_lo, rb_hi, rb_bit, rs_c, rs_r, rs_bit, obit = labels
    eta, gamma, beta = params
    cap, dim = pts.shape
    ns = W.shape[1]
    near = np.empty(cap, dtype=np.int64)
    dist = np.empty(cap)
    stack = np.empty(cap * ns, dtype=np.int64)
    x_new = np.empty(dim)
    via = np.empty(ns)
    src = np.empty(ns, dtype=np.int64)

    it = start
    while it < samples.shape[0]:
        n = counters[0]
        if n >= cap:
            return it, FULL, 0
        x_rand = samples[it]
        # nearest point
        best_d2 = np.inf
        i_near = 0
        for p in range(n):
            d2 = 0.0
            for i in range(dim):
                d2 += (pts[p, i] - x_rand[i]) ** 2
            if d2 < best_d2:
                best_d2 = d2
                i_near = p
        if best_d2 == 0.0:
            it += 1
            continue
        scale = min(1.0, eta / math.sqrt(best_d2))
        for i in range(dim):
            x_new[i] = pts[i_near, i] + (x_rand[i] - pts[i_near, i]) * scale

        code = label_code(x_new, rb_lo, rb_hi, rb_bit, rs_c, rs_r, rs_bit, box_lo, box_hi, ball_c, ball_r, obit)
        row = code_row[code]
        if row < 0:
            return it, NEED_ROW, code

        radius = min(eta, gamma * (math.log(n + 1) / (n + 1)) ** (1.0 / dim))
        r2 = radius * radius
        k = 0
        duplicate = False
        for p in range(n):
            d2 = 0.0
            for i in range(dim):
                d2 += (pts[p, i] - x_new[i]) ** 2
            if d2 <= r2 or p == i_near:
                if d2 == 0.0:
                    duplicate = True
                    break
                if segment_free(x_new, pts[p], box_lo, box_hi, ball_c, ball_r):
                    near[k] = p
                    dist[k] = math.sqrt(d2)
                    k += 1
        it += 1
        if duplicate or k == 0:
            continue

        # best parent for every automaton state of the new point (lowest id wins ties)
        j = n
        inserted = False
        for q2 in range(ns):
            best = np.inf
            bp = -1
            bq = -1
            bk = -1
            for a in range(k):
                p = near[a]
                for q in range(ns):
                    w = W[p, q]
                    if w == np.inf:
                        continue
                    c = dv[rows[p], q, q2]
                    if c == np.inf:
                        continue
                    tot = w + dist[a] + beta * c
                    if tot < best:
                        best = tot
                        bp = p
                        bq = q
                        bk = a
            if bp >= 0:
                if not inserted:
                    for i in range(dim):
                        pts[j, i] = x_new[i]
                    rows[j] = row
                    inserted = True
                G[j, q2] = G[bp, bq] + dist[bk]
                V[j, q2] = V[bp, bq] + dv[rows[bp], bq, q2]
                W[j, q2] = G[j, q2] + beta * V[j, q2]
                parent[j, q2] = bp * ns + bq
                _link(first_child, next_sib, bp * ns + bq, j * ns + q2)
        if not inserted:
            continue
        counters[0] = n + 1

        # rewire through the new point; these edges leave x_new, so its label applies
        for q2 in range(ns):
            via[q2] = np.inf
            src[q2] = -1
            for q in range(ns):
                if W[j, q] == np.inf or dv[row, q, q2] == np.inf:
                    continue
                w = W[j, q] + beta * dv[row, q, q2]
                if w < via[q2]:
                    via[q2] = w
                    src[q2] = q
        for a in range(k):
            p = near[a]
            for q2 in range(ns):
                if src[q2] < 0:
                    continue
                cand = via[q2] + dist[a]
                if not cand < W[p, q2] - 1e-9:
                    continue
                q = src[q2]
                u = p * ns + q2
                newg = G[j, q] + dist[a]
                newv = V[j, q] + dv[row, q, q2]
                old = parent[p, q2]
                if old < 0 and W[p, q2] == np.inf:
                    G[p, q2] = newg
                    V[p, q2] = newv
                    W[p, q2] = newg + beta * newv
                    parent[p, q2] = j * ns + q
                    _link(first_child, next_sib, j * ns + q, u)
                    counters[1] += 1
                    continue
                _unlink(first_child, next_sib, old, u)
                dg = newg - G[p, q2]
                dvv = newv - V[p, q2]
                parent[p, q2] = j * ns + q
                _link(first_child, next_sib, j * ns + q, u)
                top = 0
                stack[top] = u
                top += 1
                while top > 0:
                    top -= 1
                    v = stack[top]
                    pa = v // ns
                    qa = v % ns
                    G[pa, qa] += dg
                    V[pa, qa] += dvv
                    W[pa, qa] = G[pa, qa] + beta * V[pa, qa]
                    c = first_child[v]
                    while c >= 0:
                        stack[top] = c
                        top += 1
                        c = next_sib[c]
                counters[1] += 1
    return it, 0, 0
