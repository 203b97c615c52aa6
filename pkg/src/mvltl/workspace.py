"""Labeled geometric workspace: regions, obstacles, and the straight-line transition predicate.

All shapes are closed sets, so touching a boundary counts as membership and
as a collision.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _geom

DEFAULT_OBSTACLE_LABEL = "O"


class ScenarioError(ValueError):
    """Malformed scenario description."""


class OutOfBoundsError(ValueError):
    pass


@dataclass(frozen=True)
class Shape:
    """Axis-aligned box (``lo``/``hi`` corners) or ball (``center``/``radius``)."""

    kind: str
    lo: tuple = ()
    hi: tuple = ()
    center: tuple = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind == "box":
            if len(self.lo) != len(self.hi) or not self.lo:
                raise ValueError("box corners must have equal nonzero length")
            if any(a >= b for a, b in zip(self.lo, self.hi)):
                raise ValueError(f"box min {self.lo} must be below max {self.hi}")
        elif self.kind == "ball":
            if not self.center:
                raise ValueError("ball needs a center")
            if not self.radius > 0:
                raise ValueError("ball radius must be positive")
        else:
            raise ValueError(f"unknown shape kind {self.kind!r}")

    @classmethod
    def box(cls, lo, hi) -> "Shape":
        return cls("box", lo=tuple(float(v) for v in lo), hi=tuple(float(v) for v in hi))

    @classmethod
    def ball(cls, center, radius) -> "Shape":
        return cls("ball", center=tuple(float(v) for v in center), radius=float(radius))

    @property
    def dim(self) -> int:
        return len(self.lo) if self.kind == "box" else len(self.center)

    def grown(self, margin: float) -> "Shape":
        """Shape enlarged by ``margin`` on every side (boxes stay boxes, a superset of the true offset)."""
        if self.kind == "box":
            return Shape.box([v - margin for v in self.lo], [v + margin for v in self.hi])
        return Shape.ball(self.center, self.radius + margin)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            return bool(np.all(x >= self.lo) and np.all(x <= self.hi))
        return float(np.sum((x - self.center) ** 2)) <= self.radius ** 2

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.kind == "box":
            return np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)
        return np.sum((pts - self.center) ** 2, axis=-1) <= self.radius ** 2

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "box":
            return np.array(self.lo), np.array(self.hi)
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "box":
            return rng.uniform(self.lo, self.hi)
        d = len(self.center)
        while True:
            u = rng.uniform(-1.0, 1.0, size=d)
            if u @ u <= 1.0:
                return np.array(self.center) + self.radius * u

    def to_json(self) -> dict:
        if self.kind == "box":
            return {"type": "box", "min": list(self.lo), "max": list(self.hi)}
        return {"type": "ball", "center": list(self.center), "radius": self.radius}

    @classmethod
    def from_json(cls, data: dict) -> "Shape":
        kind = data.get("type")
        if kind == "box":
            return cls.box(data["min"], data["max"])
        if kind == "ball":
            return cls.ball(data["center"], data["radius"])
        raise ScenarioError(f"unknown shape type {kind!r}")


def segments_hit_boxes(a: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Closed segment/box intersection by the slab method.

    ``a``, ``b``: (m, d) endpoints; ``lo``, ``hi``: (k, d). Returns (m, k) bool.
    """
    d = (b - a)[:, None, :]
    a = a[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo[None] - a) / d
        t2 = (hi[None] - a) / d
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    # axis parallel to the segment: inside the slab means unconstrained, outside means miss
    par = d == 0.0
    inside = (a >= lo[None]) & (a <= hi[None])
    tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
    enter = np.maximum(tmin.max(axis=-1), 0.0)
    leave = np.minimum(tmax.min(axis=-1), 1.0)
    return enter <= leave


def segments_hit_balls(a: np.ndarray, b: np.ndarray, c: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Closed segment/ball intersection via the closest point. Returns (m, k) bool."""
    d = (b - a)[:, None, :]
    ac = c[None] - a[:, None, :]
    dd = np.sum(d * d, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(dd > 0, np.sum(ac * d, axis=-1) / dd, 0.0)
    t = np.clip(t, 0.0, 1.0)
    gap = ac - t[..., None] * d
    return np.sum(gap * gap, axis=-1) <= r[None] ** 2


@dataclass(frozen=True)
class Region:
    label: str
    shape: Shape


@dataclass(frozen=True)
class Obstacle:
    shape: Shape
    group: str | None = None


@dataclass(frozen=True)
class Workspace:
    """Bounded workspace with labeled regions and obstacles.

    ``ap`` is the declared proposition order; it fixes bit ``i`` of symbol
    codes. The obstacle atom is added to the label of points inside any
    obstacle.
    """

    lo: tuple
    hi: tuple
    x0: tuple
    regions: tuple[Region, ...] = ()
    obstacles: tuple[Obstacle, ...] = ()
    ap: tuple[str, ...] = ()
    obstacle_label: str = DEFAULT_OBSTACLE_LABEL
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        d = len(self.lo)
        if d not in (2, 3) or len(self.hi) != d:
            raise ScenarioError("workspace dimension must be 2 or 3")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ScenarioError("bounds min must be below max")
        if len(self.x0) != d:
            raise ScenarioError("initial point has the wrong dimension")
        if not self.in_bounds(self.x0):
            raise ScenarioError(f"initial point {list(self.x0)} outside bounds")
        ap = set(self.ap)
        if len(ap) != len(self.ap):
            raise ScenarioError("duplicate atomic propositions")
        for reg in self.regions:
            if reg.shape.dim != d:
                raise ScenarioError(f"region {reg.label} has the wrong dimension")
            if reg.label not in ap:
                raise ScenarioError(f"region label {reg.label!r} not declared in ap")
            blo, bhi = reg.shape.bounding_box()
            if np.any(blo < self.lo) or np.any(bhi > self.hi):
                raise ScenarioError(f"region {reg.label} extends outside bounds")
        for ob in self.obstacles:
            if ob.shape.dim != d:
                raise ScenarioError("obstacle has the wrong dimension")

    # --- construction -------------------------------------------------------

    @classmethod
    def from_json(cls, data: dict) -> "Workspace":
        try:
            dim = int(data.get("dimension", len(data["bounds"]["min"])))
            lo = tuple(float(v) for v in data["bounds"]["min"])
            hi = tuple(float(v) for v in data["bounds"]["max"])
            if len(lo) != dim:
                raise ScenarioError("bounds do not match the declared dimension")
            regions = tuple(Region(r["label"], Shape.from_json(r["shape"])) for r in data.get("regions", []))
            obstacles = []
            for ob in data.get("obstacles", []):
                if "shape" in ob:
                    obstacles.append(Obstacle(Shape.from_json(ob["shape"]), ob.get("group")))
                else:
                    obstacles.append(Obstacle(Shape.from_json(ob)))
            obstacle_label = data.get("obstacle_label", DEFAULT_OBSTACLE_LABEL)
            ap = tuple(data.get("ap") or sorted({r.label for r in regions} | {obstacle_label}))
            return cls(lo=lo, hi=hi, x0=tuple(float(v) for v in data["init"]), regions=regions,
                       obstacles=tuple(obstacles), ap=ap, obstacle_label=obstacle_label,
                       meta={k: data[k] for k in ("name", "formula", "enclosed") if k in data})
        except ScenarioError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad scenario: {exc!r}") from exc

    @classmethod
    def load(cls, path) -> "Workspace":
        with open(path) as fh:
            text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_json(data)

    def to_json(self) -> dict:
        out = {
            "dimension": self.dim,
            "bounds": {"min": list(self.lo), "max": list(self.hi)},
            "init": list(self.x0),
            "ap": list(self.ap),
            "obstacle_label": self.obstacle_label,
            "regions": [{"label": r.label, "shape": r.shape.to_json()} for r in self.regions],
            "obstacles": [
                {"shape": o.shape.to_json(), **({"group": o.group} if o.group else {})}
                for o in self.obstacles
            ],
        }
        out.update(self.meta)
        return out

    def without_group(self, group: str) -> "Workspace":
        """Copy with every obstacle of the given group removed."""
        kept = tuple(o for o in self.obstacles if o.group != group)
        return Workspace(self.lo, self.hi, self.x0, self.regions, kept, self.ap,
                         self.obstacle_label, dict(self.meta))

    def inflated(self, margin: float) -> "Workspace":
        """Copy whose obstacles are grown by ``margin``, for planning paths with clearance."""
        if margin < 0:
            raise ValueError("margin must be nonnegative")
        grown = tuple(Obstacle(o.shape.grown(margin), o.group) for o in self.obstacles)
        return Workspace(self.lo, self.hi, self.x0, self.regions, grown, self.ap,
                         self.obstacle_label, dict(self.meta))

    # --- geometry -----------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.lo)

    @cached_property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    @cached_property
    def _box_arrays(self):
        boxes = [o.shape for o in self.obstacles if o.shape.kind == "box"]
        lo = np.array([b.lo for b in boxes], dtype=float).reshape(-1, self.dim)
        hi = np.array([b.hi for b in boxes], dtype=float).reshape(-1, self.dim)
        return lo, hi

    @cached_property
    def _ball_arrays(self):
        balls = [o.shape for o in self.obstacles if o.shape.kind == "ball"]
        c = np.array([b.center for b in balls], dtype=float).reshape(-1, self.dim)
        r = np.array([b.radius for b in balls], dtype=float)
        return c, r

    def in_bounds(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def _check_bounds(self, x):
        if not self.in_bounds(x):
            raise OutOfBoundsError(f"point {list(np.asarray(x, dtype=float))} outside workspace bounds")

    def in_obstacle(self, x) -> bool:
        return any(o.shape.contains(x) for o in self.obstacles)

    def label_of(self, x) -> frozenset:
        self._check_bounds(x)
        out = {r.label for r in self.regions if r.shape.contains(x)}
        if self.in_obstacle(x):
            out.add(self.obstacle_label)
        return frozenset(out)

    @cached_property
    def _bit(self) -> dict[str, int]:
        return {a: 1 << i for i, a in enumerate(self.ap)}

    def label_codes(self, pts) -> np.ndarray:
        """Integer symbol codes (bit i <=> ap[i]) for an (m, d) array of points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        codes = np.zeros(len(pts), dtype=np.int64)
        for r in self.regions:
            codes |= np.where(r.shape.contains_many(pts), self._bit[r.label], 0)
        obit = self._bit.get(self.obstacle_label, 0)
        if obit and self.obstacles:
            hit = np.zeros(len(pts), dtype=bool)
            for o in self.obstacles:
                hit |= o.shape.contains_many(pts)
            codes |= np.where(hit, obit, 0)
        return codes

    def decode(self, code: int) -> frozenset:
        return frozenset(a for a, bit in self._bit.items() if code & bit)

    def segments_free(self, a, b) -> np.ndarray:
        """Vectorized collision test for segments ``a[i] -> b[i]`` (broadcast over rows)."""
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        a, b = np.broadcast_arrays(a, b)
        free = np.ones(len(a), dtype=bool)
        lo, hi = self._box_arrays
        if len(lo):
            free &= ~segments_hit_boxes(a, b, lo, hi).any(axis=1)
        c, r = self._ball_arrays
        if len(c):
            free &= ~segments_hit_balls(a, b, c, r).any(axis=1)
        return free

    def segment_collision_free(self, x, x2) -> bool:
        lo, hi = self._box_arrays
        c, r = self._ball_arrays
        return bool(_geom.segment_free(np.asarray(x, dtype=float), np.asarray(x2, dtype=float), lo, hi, c, r))

    def gwts_transition(self, x, x2, eta: float) -> bool:
        if not eta > 0:
            raise ValueError("eta must be positive")
        dist = float(np.linalg.norm(np.subtract(x2, x)))
        return dist <= eta and self.segment_collision_free(x, x2)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi)

    def region_shapes(self, label: str) -> list[Shape]:
        return [r.shape for r in self.regions if r.label == label]


def gwts_transition(ws: Workspace, x, x2, eta: float) -> bool:
    return ws.gwts_transition(x, x2, eta)


def label_of(ws: Workspace, x) -> frozenset:
    return ws.label_of(x)


def segment_collision_free(ws: Workspace, x, x2) -> bool:
    return ws.segment_collision_free(x, x2)
