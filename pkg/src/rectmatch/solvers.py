"""Maximum same-color rectangle matchings.

The exact solver treats the problem as maximum independent set on the
conflict graph of candidate pairs: two same-color points whose bounding
box holds no third point.  Two candidates conflict when they share a point
or their closed boxes meet.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass

from .errors import BudgetExceeded, InstanceTooLarge
from .geometry import (Instance, Matching, Rect, bbox, points_in_rect,
                       rects_disjoint)


@dataclass(frozen=True)
class CandidatePair:
    i: int
    j: int
    rect: Rect


@dataclass(frozen=True)
class SolveLimits:
    max_nodes: int = 10_000_000
    time_budget: float = 600.0

    def __post_init__(self):
        if self.max_nodes <= 0 or self.time_budget <= 0:
            raise ValueError("solve limits must be positive")


def candidate_pairs(inst: Instance) -> list[CandidatePair]:
    """All same-color pairs whose bounding box covers exactly those two points.

    Points are x-sorted, so only indices strictly between ``i`` and ``j`` can
    fall inside the box; listed in lexicographic ``(i, j)`` order.
    """
    pts = inst.points
    out = []
    for i in range(len(pts)):
        pi = pts[i]
        for j in range(i + 1, len(pts)):
            pj = pts[j]
            if pi.color != pj.color:
                continue
            lo, hi = (pi.y, pj.y) if pi.y < pj.y else (pj.y, pi.y)
            if any(lo <= pts[k].y <= hi for k in range(i + 1, j)):
                continue
            out.append(CandidatePair(i, j, bbox(pi, pj)))
    return out


def conflict(a: CandidatePair, b: CandidatePair) -> bool:
    if {a.i, a.j} & {b.i, b.j}:
        return True
    return not rects_disjoint(a.rect, b.rect)


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class _ConflictGraph:
    def __init__(self, cands: list[CandidatePair]):
        self.cands = cands
        k = len(cands)
        self.adj = [0] * k
        for a in range(k):
            for b in range(a + 1, k):
                if conflict(cands[a], cands[b]):
                    self.adj[a] |= 1 << b
                    self.adj[b] |= 1 << a
        self.pointmask = [(1 << c.i) | (1 << c.j) for c in cands]

    def upper_bound(self, avail: int) -> int:
        """Bound on the independent set size inside ``avail``."""
        count = _popcount(avail)
        pts = 0
        for v in _bits(avail):
            pts |= self.pointmask[v]
        bound = min(count, _popcount(pts) // 2)
        if bound <= 1:
            return bound
        # greedy clique partition: one vertex per clique at most
        commons: list[int] = []
        for v in _bits(avail):
            bit = 1 << v
            for c, common in enumerate(commons):
                if common & bit:
                    commons[c] = common & self.adj[v]
                    break
            else:
                commons.append(self.adj[v])
                if len(commons) >= bound:
                    return bound
        return len(commons)


class _Search:
    def __init__(self, graph: _ConflictGraph, limits: SolveLimits):
        self.g = graph
        self.limits = limits
        self.nodes = 0
        self.deadline = time.monotonic() + limits.time_budget
        self.best: list[int] = []

    def _tick(self):
        self.nodes += 1
        if self.nodes > self.limits.max_nodes:
            raise _OutOfBudget("node limit")
        if self.nodes & 1023 == 0 and time.monotonic() > self.deadline:
            raise _OutOfBudget("time limit")

    def maximize(self, avail: int, chosen: list[int]):
        self._tick()
        if len(chosen) + self.g.upper_bound(avail) <= len(self.best):
            return
        adj = self.g.adj
        pick, degree = -1, -1
        for v in _bits(avail):
            d = _popcount(adj[v] & avail)
            if d > degree:
                pick, degree = v, d
        if degree <= 0:
            # the rest are mutually compatible
            if len(chosen) + _popcount(avail) > len(self.best):
                self.best = chosen + list(_bits(avail))
            return
        bit = 1 << pick
        self.maximize(avail & ~adj[pick] & ~bit, chosen + [pick])
        self.maximize(avail & ~bit, chosen)

    def first_of_size(self, avail: int, chosen: list[int], target: int):
        """Lexicographically first independent set of ``target`` vertices."""
        self._tick()
        if len(chosen) == target:
            return chosen
        if avail == 0 or len(chosen) + self.g.upper_bound(avail) < target:
            return None
        v = (avail & -avail).bit_length() - 1
        bit = 1 << v
        found = self.first_of_size(avail & ~self.g.adj[v] & ~bit, chosen + [v], target)
        if found is not None:
            return found
        return self.first_of_size(avail & ~bit, chosen, target)


class _OutOfBudget(Exception):
    pass


def _to_matching(cands, idx, optimal, nodes) -> Matching:
    return Matching(tuple((cands[v].i, cands[v].j) for v in idx), optimal, nodes)


def solve_exact(inst: Instance, limits: SolveLimits | None = None) -> Matching:
    """Maximum matching; ties go to the lexicographically smallest pair list.

    Branch-and-bound on the highest-degree candidate finds the optimum size,
    then a lexicographic include-first search with that size as target picks
    the canonical optimal set.

    Raises :class:`BudgetExceeded` carrying the best incumbent if the limits
    run out.
    """
    limits = limits or SolveLimits()
    cands = candidate_pairs(inst)
    graph = _ConflictGraph(cands)
    search = _Search(graph, limits)
    full = (1 << len(cands)) - 1
    try:
        search.maximize(full, [])
        target = len(search.best)
        canonical = search.first_of_size(full, [], target)
    except _OutOfBudget as exc:
        incumbent = _to_matching(cands, sorted(search.best), False, search.nodes)
        raise BudgetExceeded(incumbent, search.nodes, str(exc)) from None
    return _to_matching(cands, canonical, True, search.nodes)


BRUTEFORCE_MAX_N = 10


def solve_bruteforce(inst: Instance) -> Matching:
    """Exhaustive reference solver for n <= 10.

    Deliberately shares nothing with :func:`solve_exact` beyond the geometry
    primitives: coverage via :func:`points_in_rect` on every pair, and
    feasibility by direct rectangle tests.
    """
    n = inst.n
    if n > BRUTEFORCE_MAX_N:
        raise InstanceTooLarge(f"brute force is limited to n <= {BRUTEFORCE_MAX_N}, got {n}")
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            if inst[i].color != inst[j].color:
                continue
            r = bbox(inst[i], inst[j])
            if len(points_in_rect(inst, r)) == 2:
                pairs.append((i, j, r))

    best: list = []

    def extend(start, chosen, used):
        nonlocal best
        if len(chosen) > len(best):
            best = list(chosen)
        for k in range(start, len(pairs)):
            i, j, r = pairs[k]
            if i in used or j in used:
                continue
            if all(rects_disjoint(r, pairs[c][2]) for c in chosen):
                chosen.append(k)
                extend(k + 1, chosen, used | {i, j})
                chosen.pop()

    extend(0, [], frozenset())
    return Matching(tuple(pairs[k][:2] for k in best))


class Label(str, enum.Enum):
    INIT1 = "INIT1"
    MONO_ALT_2 = "MONO_ALT_2"
    MONO_ALT_3 = "MONO_ALT_3"
    MATCH_EMITTED = "MATCH_EMITTED"
    OTHER = "OTHER"


@dataclass(frozen=True)
class StateTrace:
    labels: tuple[Label, ...]
    increments: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.increments):
            raise ValueError("labels and increments differ in length")
        for lab, inc in zip(self.labels, self.increments):
            if inc not in (0, 2, 4) or (inc > 0) != (lab is Label.MATCH_EMITTED):
                raise ValueError(f"increment {inc} inconsistent with label {lab}")

    def __len__(self) -> int:
        return len(self.labels)


def _alternating_run(inst: Instance, idx: list[int]) -> bool:
    """x-consecutive indices, monotone y, alternating colors."""
    if any(b != a + 1 for a, b in zip(idx, idx[1:])):
        return False
    pts = [inst[i] for i in idx]
    if any(a.color == b.color for a, b in zip(pts, pts[1:])):
        return False
    steps = [b.y > a.y for a, b in zip(pts, pts[1:])]
    return all(steps) or not any(steps)


def solve_greedy_sweep(inst: Instance) -> tuple[Matching, StateTrace]:
    """Left-to-right heuristic with a coarse state trace.

    Each new point is matched with the most recently buffered unmatched point
    of its color whose box holds no other instance point (future points
    included) and misses every box emitted so far; otherwise it is buffered.
    """
    buffer: list[int] = []
    emitted: list[Rect] = []
    pairs = []
    labels = []
    increments = []
    for t, p in enumerate(inst.points):
        partner = None
        for pos in range(len(buffer) - 1, -1, -1):
            q = inst[buffer[pos]]
            if q.color != p.color:
                continue
            r = bbox(q, p)
            if len(points_in_rect(inst, r)) != 2:
                continue
            if all(rects_disjoint(r, e) for e in emitted):
                partner = pos
                emitted.append(r)
                break
        if partner is not None:
            pairs.append((buffer.pop(partner), t))
            labels.append(Label.MATCH_EMITTED)
            increments.append(2)
            continue
        buffer.append(t)
        increments.append(0)
        if t == 0:
            labels.append(Label.INIT1)
        elif len(buffer) >= 3 and _alternating_run(inst, buffer[-3:]):
            labels.append(Label.MONO_ALT_3)
        elif len(buffer) >= 2 and _alternating_run(inst, buffer[-2:]):
            labels.append(Label.MONO_ALT_2)
        else:
            labels.append(Label.OTHER)
    return Matching(tuple(pairs)), StateTrace(tuple(labels), tuple(increments))


SOLVERS = {
    "exact": lambda inst, limits=None: solve_exact(inst, limits),
    "bruteforce": lambda inst, limits=None: solve_bruteforce(inst),
    "greedy": lambda inst, limits=None: solve_greedy_sweep(inst)[0],
}
