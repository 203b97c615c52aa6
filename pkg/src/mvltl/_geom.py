"""Compiled segment-versus-obstacle tests shared by the workspace and the planner."""
import numpy as np
from numba import njit


@njit(cache=True)
def _box_hit(ax, ay, az, bx, by, bz, lo, hi, dim):
    d = (bx - ax, by - ay, bz - az)
    a = (ax, ay, az)
    enter, leave = 0.0, 1.0
    for i in range(dim):
        if d[i] == 0.0:
            if a[i] < lo[i] or a[i] > hi[i]:
                return False
            continue
        t1 = (lo[i] - a[i]) / d[i]
        t2 = (hi[i] - a[i]) / d[i]
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > enter:
            enter = t1
        if t2 < leave:
            leave = t2
        if enter > leave:
            return False
    return True


@njit(cache=True)
def _ball_hit(a, b, c, r, dim):
    dd = 0.0
    ac_d = 0.0
    for i in range(dim):
        di = b[i] - a[i]
        dd += di * di
        ac_d += (c[i] - a[i]) * di
    t = ac_d / dd if dd > 0.0 else 0.0
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    g = 0.0
    for i in range(dim):
        gi = c[i] - a[i] - t * (b[i] - a[i])
        g += gi * gi
    return g <= r * r


@njit(cache=True)
def segment_free(a, b, box_lo, box_hi, ball_c, ball_r):
    dim = a.shape[0]
    az = a[2] if dim == 3 else 0.0
    bz = b[2] if dim == 3 else 0.0
    for k in range(box_lo.shape[0]):
        if _box_hit(a[0], a[1], az, b[0], b[1], bz, box_lo[k], box_hi[k], dim):
            return False
    for k in range(ball_c.shape[0]):
        if _ball_hit(a, b, ball_c[k], ball_r[k], dim):
            return False
    return True


@njit(cache=True)
def segment_free_many(a, b, box_lo, box_hi, ball_c, ball_r):
    out = np.empty(a.shape[0], dtype=np.bool_)
    for i in range(a.shape[0]):
        out[i] = segment_free(a[i], b[i], box_lo, box_hi, ball_c, ball_r)
    return out
