"""Colored point sets, rectangles and matching feasibility."""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GeneralPositionViolation, IndexOutOfRange, InstanceParseError
from .rng import Xoshiro256, XoshiroBatch


class Color(enum.IntEnum):
    RED = 0
    BLUE = 1

    @property
    def letter(self) -> str:
        return "R" if self is Color.RED else "B"

    @classmethod
    def from_letter(cls, letter: str) -> "Color":
        if letter == "R":
            return cls.RED
        if letter == "B":
            return cls.BLUE
        raise ValueError(f"color must be 'R' or 'B', got {letter!r}")


class Model(enum.Enum):
    UNIFORM_SQUARE = "uniform"
    GRID_X = "grid-x"
    # loaded from file, cut out of a larger instance, or remapped
    CUSTOM = "custom"


@dataclass(frozen=True)
class ColoredPoint:
    x: float
    y: float
    color: Color

    def __post_init__(self):
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError(f"point ({self.x}, {self.y}) lies outside the unit square")


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle; zero width or height is allowed."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise ValueError(f"inverted rectangle {self}")

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax


@dataclass(frozen=True)
class Instance:
    """Points sorted by strictly increasing x, all y distinct."""

    points: tuple[ColoredPoint, ...]
    model: Model = Model.CUSTOM
    seed: int | None = None
    retries: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        check_general_position(self.points)
        if self.model is Model.GRID_X:
            n = len(self.points)
            for i, p in enumerate(self.points, start=1):
                if p.x != i / n:
                    raise ValueError(f"grid-x instance: point {i - 1} has x={p.x}, expected {i}/{n}")

    @property
    def n(self) -> int:
        return len(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i: int) -> ColoredPoint:
        return self.points[i]

    def color_counts(self) -> tuple[int, int]:
        red = sum(1 for p in self.points if p.color is Color.RED)
        return red, self.n - red

    def subinstance(self, indices: Iterable[int]) -> "Instance":
        return Instance(tuple(self.points[i] for i in sorted(indices)), Model.CUSTOM)


def check_general_position(points: Sequence[ColoredPoint]) -> None:
    for a, b in zip(points, points[1:]):
        if not a.x < b.x:
            raise GeneralPositionViolation(
                f"x coordinates must be strictly increasing ({a.x} then {b.x})")
    ys = [p.y for p in points]
    if len(set(ys)) != len(ys):
        raise GeneralPositionViolation("y coordinates must be distinct")


def _redraw_duplicates(values: list[float], rng: Xoshiro256) -> int:
    retries = 0
    seen: set[float] = set()
    for i, v in enumerate(values):
        while v in seen:
            v = rng.random()
            retries += 1
        values[i] = v
        seen.add(v)
    return retries


def generate_instance(n: int, seed: int, model: Model = Model.UNIFORM_SQUARE) -> Instance:
    """Random colored instance, fully determined by ``(n, seed, model)``.

    Draw order per point: x (uniform model only), y, color bit.  Coordinate
    collisions are redrawn from the same stream; the count lands in
    ``Instance.retries``.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if model is Model.CUSTOM:
        raise ValueError("cannot generate a custom-model instance")
    rng = Xoshiro256(seed)
    xs: list[float] = []
    ys: list[float] = []
    cs: list[int] = []
    for i in range(n):
        if model is Model.UNIFORM_SQUARE:
            xs.append(rng.random())
        ys.append(rng.random())
        cs.append(rng.bit())
    retries = 0
    if model is Model.GRID_X:
        xs = [(i + 1) / n for i in range(n)]
    else:
        retries += _redraw_duplicates(xs, rng)
    retries += _redraw_duplicates(ys, rng)
    order = sorted(range(n), key=xs.__getitem__)
    pts = tuple(ColoredPoint(xs[i], ys[i], Color(cs[i])) for i in order)
    return Instance(pts, model, seed, retries)


def generate_batch(n: int, seeds, model: Model = Model.UNIFORM_SQUARE):
    """Vectorised :func:`generate_instance` over many seeds.

    Returns ``(xs, ys, colors)`` arrays of shape ``(len(seeds), n)``, each row
    sorted by x and identical to the scalar generator's output for that seed.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    k = len(seeds)
    rng = XoshiroBatch(seeds)
    xs = np.empty((k, n))
    ys = np.empty((k, n))
    cs = np.empty((k, n), dtype=np.int8)
    for i in range(n):
        if model is Model.UNIFORM_SQUARE:
            xs[:, i] = rng.random()
        ys[:, i] = rng.random()
        cs[:, i] = rng.bit()
    if model is Model.GRID_X:
        xs[:] = np.arange(1, n + 1) / n
    order = np.argsort(xs, axis=1, kind="stable")
    xs = np.take_along_axis(xs, order, axis=1)
    ys = np.take_along_axis(ys, order, axis=1)
    cs = np.take_along_axis(cs, order, axis=1)

    # lanes with a coordinate collision (probability ~ n^2 / 2^53) replay scalar
    sy = np.sort(ys, axis=1)
    bad = (np.diff(xs, axis=1) <= 0).any(axis=1) | (np.diff(sy, axis=1) == 0).any(axis=1)
    for lane in np.flatnonzero(bad):
        inst = generate_instance(n, int(seeds[lane]), model)
        xs[lane] = [p.x for p in inst.points]
        ys[lane] = [p.y for p in inst.points]
        cs[lane] = [int(p.color) for p in inst.points]
    return xs, ys, cs


def bbox(p: ColoredPoint, q: ColoredPoint) -> Rect:
    return Rect(min(p.x, q.x), max(p.x, q.x), min(p.y, q.y), max(p.y, q.y))


def rects_disjoint(r1: Rect, r2: Rect) -> bool:
    """True iff the closed rectangles share no point; touching counts as meeting."""
    return (r1.xmax < r2.xmin or r2.xmax < r1.xmin
            or r1.ymax < r2.ymin or r2.ymax < r1.ymin)


def points_in_rect(inst: Instance, r: Rect) -> list[int]:
    return [i for i, p in enumerate(inst.points) if r.contains(p.x, p.y)]


@dataclass(frozen=True)
class Matching:
    """Unordered index pairs, stored as sorted ``(i, j)`` with ``i < j``.

    ``optimal`` and ``nodes_explored`` are solver bookkeeping and do not take
    part in equality.
    """

    pairs: tuple[tuple[int, int], ...] = ()
    optimal: bool = field(default=True, compare=False)
    nodes_explored: int = field(default=0, compare=False)

    def __post_init__(self):
        canon = tuple(sorted((min(a, b), max(a, b)) for a, b in self.pairs))
        object.__setattr__(self, "pairs", canon)

    def __len__(self) -> int:
        return len(self.pairs)

    def to_json(self, n: int) -> dict:
        return {
            "n": n,
            "size": matched_count(self),
            "pairs": [list(p) for p in self.pairs],
            "optimal": self.optimal,
            "nodes_explored": self.nodes_explored,
        }


def matched_count(m: Matching) -> int:
    return 2 * len(m.pairs)


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    violation: str | None = None
    pairs: tuple = ()

    def __bool__(self) -> bool:
        return self.valid


def validate_matching(inst: Instance, m: Matching) -> ValidationReport:
    """Check the four matching invariants in order; report the first failure.

    Violation names: ``"reused-point"``, ``"color"``, ``"coverage"``,
    ``"overlap"``.
    """
    for pair in m.pairs:
        for i in pair:
            if not 0 <= i < inst.n:
                raise IndexOutOfRange(f"index {i} out of range for n={inst.n}")
    seen: dict[int, tuple[int, int]] = {}
    for pair in m.pairs:
        if pair[0] == pair[1]:
            return ValidationReport(False, "reused-point", (pair,))
        for i in pair:
            if i in seen:
                return ValidationReport(False, "reused-point", (seen[i], pair))
            seen[i] = pair
    for i, j in m.pairs:
        if inst[i].color != inst[j].color:
            return ValidationReport(False, "color", ((i, j),))
    rects = []
    for i, j in m.pairs:
        r = bbox(inst[i], inst[j])
        if points_in_rect(inst, r) != [i, j]:
            return ValidationReport(False, "coverage", ((i, j),))
        rects.append(r)
    for a in range(len(rects)):
        for b in range(a + 1, len(rects)):
            if not rects_disjoint(rects[a], rects[b]):
                return ValidationReport(False, "overlap", (m.pairs[a], m.pairs[b]))
    return ValidationReport(True)


def perturb_y(inst: Instance, i: int, y_new: float) -> Instance:
    """Move point ``i`` vertically to ``y_new``."""
    if not 0 <= i < inst.n:
        raise IndexOutOfRange(f"index {i} out of range for n={inst.n}")
    if not 0.0 <= y_new <= 1.0:
        raise ValueError(f"y must lie in [0, 1], got {y_new}")
    p = inst[i]
    if y_new == p.y:
        return inst
    if any(q.y == y_new for q in inst.points):
        raise GeneralPositionViolation(f"y={y_new} already taken")
    pts = list(inst.points)
    pts[i] = ColoredPoint(p.x, y_new, p.color)
    return replace(inst, points=tuple(pts))


def flip_color(inst: Instance, i: int) -> Instance:
    if not 0 <= i < inst.n:
        raise IndexOutOfRange(f"index {i} out of range for n={inst.n}")
    p = inst[i]
    pts = list(inst.points)
    pts[i] = ColoredPoint(p.x, p.y, Color(1 - p.color))
    return replace(inst, points=tuple(pts))


MONOTONE_MAPS = {
    "cube": lambda t: t ** 3,
    "sqrt": math.sqrt,
    "affine-up": lambda t: (t + 1.0) / 2.0,
}


def apply_monotone_map(inst: Instance, map_id: str, axis: str = "x") -> Instance:
    """Apply a strictly increasing map of [0, 1] to one coordinate axis."""
    g = MONOTONE_MAPS[map_id]
    if axis == "x":
        pts = tuple(ColoredPoint(g(p.x), p.y, p.color) for p in inst.points)
        return Instance(pts, Model.CUSTOM, inst.seed)
    if axis == "y":
        pts = tuple(ColoredPoint(p.x, g(p.y), p.color) for p in inst.points)
        return replace(inst, points=pts)
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


# -- instance files ---------------------------------------------------------

def dump_instance_csv(inst: Instance) -> str:
    buf = io.StringIO()
    buf.write("x,y,color\n")
    for p in inst.points:
        # repr is the shortest exact round-trip literal
        buf.write(f"{p.x!r},{p.y!r},{p.color.letter}\n")
    return buf.getvalue()


def write_instance_csv(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(dump_instance_csv(inst), encoding="utf-8")


def parse_instance_csv(text: str) -> Instance:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["x", "y", "color"]:
        raise InstanceParseError("expected header 'x,y,color'", 1)
    pts = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise InstanceParseError(f"expected 3 fields, got {len(row)}", lineno)
        try:
            x, y = float(row[0]), float(row[1])
            pt = ColoredPoint(x, y, Color.from_letter(row[2].strip()))
        except ValueError as exc:
            raise InstanceParseError(str(exc), lineno) from None
        if pts and not pts[-1].x < pt.x:
            raise InstanceParseError("rows must be in strictly increasing x", lineno)
        pts.append(pt)
    try:
        return Instance(tuple(pts), Model.CUSTOM)
    except GeneralPositionViolation as exc:
        raise InstanceParseError(str(exc)) from None


def read_instance_csv(path: str | Path) -> Instance:
    return parse_instance_csv(Path(path).read_text(encoding="utf-8"))
