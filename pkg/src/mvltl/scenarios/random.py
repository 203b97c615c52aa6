"""Seeded random scenarios with many goals, for plan-existence studies.

Goals are balls of radius ``2 * eta`` placed in free space; obstacles are
random boxes added until they cover a target fraction of the area. With
probability ``enclose_prob`` one goal is deliberately walled in by a ring.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..workspace import Obstacle, Region, Shape, Workspace


def surveillance_formula(n_goals: int, obstacle_label: str = "O") -> str:
    return " && ".join([f"[]!{obstacle_label}"] + [f"[]<>G{i + 1}" for i in range(n_goals)])


def ring(center, inner: float, thickness: float) -> list[Shape]:
    """Four overlapping boxes forming a closed square frame around ``center``."""
    cx, cy = center
    a, b = inner, inner + thickness
    return [Shape.box((cx - b, cy - b), (cx + b, cy - a)), Shape.box((cx - b, cy + a), (cx + b, cy + b)),
            Shape.box((cx - b, cy - b), (cx - a, cy + b)), Shape.box((cx + a, cy - b), (cx + b, cy + b))]


def _clear(shape: Shape, centers, radius: float) -> bool:
    lo, hi = np.array(shape.lo), np.array(shape.hi)
    for c in centers:
        nearest = np.clip(c, lo, hi)
        if np.sum((nearest - c) ** 2) <= radius ** 2:
            return False
    return True


def _place_goals(rng, x0, n_goals, r_goal, lo, hi, enclose, attempts=500, draws=3000):
    """Random sequential placement of disjoint goal balls, restarted when it jams.

    With ``enclose`` the first goal gets extra room for a ring around it.
    """
    ring_room = 0.35 if enclose else 0.0
    for _ in range(attempts):
        goals: list[np.ndarray] = []
        for _ in range(draws):
            room = ring_room if not goals else 0.0
            c = rng.uniform(lo + r_goal + 0.05 + room, hi - r_goal - 0.05 - room)
            sep = 2 * r_goal + 0.05
            if np.linalg.norm(c - x0) < r_goal + 0.5 + room:
                continue
            if any(np.linalg.norm(c - g) < sep + (ring_room if i == 0 else room) for i, g in enumerate(goals)):
                continue
            goals.append(c)
            if len(goals) == n_goals:
                return goals
    raise RuntimeError(f"could not place {n_goals} goals")


def generate(seed: int, n_goals: int = 12, eta: float = 0.5, size: float = 10.0, coverage: float = 0.15,
             enclose_prob: float = 0.5) -> Workspace:
    rng = np.random.default_rng(seed)
    r_goal = 2 * eta
    lo, hi = np.zeros(2), np.full(2, size)
    x0 = rng.uniform(lo + 0.5, hi - 0.5)
    enclose = rng.uniform() < enclose_prob
    goals = _place_goals(rng, x0, n_goals, r_goal, lo, hi, enclose)
    obstacles = []
    keep_clear = [np.asarray(g) for g in goals] + [x0]
    if enclose:
        for s in ring(goals[0], r_goal + 0.1, 0.2):
            obstacles.append(Obstacle(s, "enclosure"))
    n_boxes = int(rng.integers(20, 41))
    area = coverage * size * size / n_boxes
    boxes = []
    for _ in range(100_000):
        if len(boxes) == n_boxes:
            break
        aspect = rng.uniform(0.5, 2.0)
        w, h = np.sqrt(area * aspect), np.sqrt(area / aspect)
        p = rng.uniform(lo, hi - (w, h))
        s = Shape.box(p, p + (w, h))
        if _clear(s, keep_clear, r_goal + 0.05):
            boxes.append(s)
    obstacles += [Obstacle(b) for b in boxes]
    ap = tuple(f"G{i + 1}" for i in range(n_goals)) + ("O",)
    regions = tuple(Region(f"G{i + 1}", Shape.ball(g, r_goal)) for i, g in enumerate(goals))
    ws = Workspace(lo=tuple(lo), hi=tuple(hi), x0=tuple(float(v) for v in x0), regions=regions,
                   obstacles=tuple(obstacles), ap=ap,
                   meta={"name": f"random-{seed}", "formula": surveillance_formula(n_goals), "seed": seed})
    ws.meta["enclosed"] = enclosed_goals(ws)
    return ws


def enclosed_goals(ws: Workspace, h: float = 0.05) -> list[str]:
    """Goals with no free point reachable from the start, by conservative flood fill.

    A grid cell is blocked only when one box covers it entirely, and cells
    connect through edges and corners, so every continuous free path shows up
    as a chain of open cells. A goal reported here is therefore truly cut off.
    """
    counts = np.ceil((np.array(ws.hi) - np.array(ws.lo)) / h).astype(int)
    blocked = np.zeros(counts, dtype=bool)
    for o in ws.obstacles:
        if o.shape.kind != "box":
            continue
        i0 = np.ceil((np.array(o.shape.lo) - ws.lo) / h - 1e-9).astype(int)
        i1 = np.floor((np.array(o.shape.hi) - ws.lo) / h + 1e-9).astype(int)
        if np.all(i1 > i0):
            blocked[i0[0]:i1[0], i0[1]:i1[1]] = True
    comp, _ = ndimage.label(~blocked, structure=np.ones((3, 3), dtype=int))
    start = np.minimum(((np.array(ws.x0) - ws.lo) / h).astype(int), counts - 1)
    home = comp[tuple(start)]
    centres = np.stack(np.meshgrid(*[(np.arange(c) + 0.5) * h + l for c, l in zip(counts, ws.lo)],
                                   indexing="ij"), axis=-1)
    out = []
    for reg in ws.regions:
        inside = reg.shape.contains_many(centres.reshape(-1, 2)).reshape(counts)
        if home == 0 or not np.any(inside & (comp == home)):
            out.append(reg.label)
    return sorted(out, key=lambda s: int(s[1:]) if s[1:].isdigit() else s)
