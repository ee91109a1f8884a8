"""Finite-state first-order homogeneous processes.

A :class:`ChainSpec` stores ``P`` column-stochastic,
``P[i, j] = Pr(X_t = e_i | X_{t-1} = e_j)``.  All arithmetic runs on the
row-stochastic ``Q = P.T`` with row vectors, ``p_t = p_{t-1} @ Q``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Sequence

import numpy as np

from .errors import (CapExceeded, InsufficientSamples, MalformedMatrix,
                     NoConvergence, NotAperiodic, NotIrreducible)
from .rng import Xoshiro256

STOCHASTIC_TOL = 1e-9
SOLVE_TOL = 1e-12
DEFAULT_CAP = 10**6


@dataclass(frozen=True, eq=False)
class ChainSpec:
    P: np.ndarray
    f: np.ndarray
    p1: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        f = np.array(self.f, dtype=float)
        p1 = np.array(self.p1, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise MalformedMatrix(f"P must be a nonempty square matrix, got shape {P.shape}")
        N = P.shape[0]
        if f.shape != (N,) or p1.shape != (N,):
            raise MalformedMatrix(f"f and p1 must have length {N}")
        if not np.all(np.isfinite(P)) or P.min() < 0 or P.max() > 1:
            raise MalformedMatrix("P entries must lie in [0, 1]")
        if not np.all(np.isfinite(f)) or f.min() < 0:
            raise MalformedMatrix("rewards must be finite and nonnegative")
        if not np.all(np.isfinite(p1)) or p1.min() < 0:
            raise MalformedMatrix("p1 must be nonnegative")
        labels = tuple(self.labels) or tuple(f"e{i + 1}" for i in range(N))
        if len(labels) != N:
            raise MalformedMatrix(f"expected {N} labels, got {len(labels)}")
        for name, value in (("P", P), ("f", f), ("p1", p1)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_Q(cls, Q, f, p1, labels=()) -> "ChainSpec":
        return cls(np.asarray(Q, dtype=float).T, f, p1, labels)

    @property
    def N(self) -> int:
        return self.P.shape[0]

    @property
    def Q(self) -> np.ndarray:
        return self.P.T

    def permuted(self, perm: Sequence[int]) -> "ChainSpec":
        """Relabel states: new state ``k`` is old state ``perm[k]``."""
        perm = list(perm)
        return ChainSpec(self.P[np.ix_(perm, perm)], self.f[perm], self.p1[perm],
                         tuple(self.labels[k] for k in perm))

    def to_json(self) -> dict:
        return {"states": list(self.labels), "P": self.P.tolist(),
                "f": self.f.tolist(), "p1": self.p1.tolist()}


def load_chain(path: str | Path) -> ChainSpec:
    return chain_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def chain_from_json(obj: dict) -> ChainSpec:
    try:
        return ChainSpec(obj["P"], obj["f"], obj["p1"], tuple(obj.get("states", ())))
    except KeyError as exc:
        raise MalformedMatrix(f"chain spec is missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise MalformedMatrix(str(exc)) from None


@dataclass(frozen=True)
class ChainValidation:
    stochastic: bool
    irreducible: bool
    aperiodic: bool
    period: int

    @property
    def ok(self) -> bool:
        return self.stochastic and self.irreducible and self.aperiodic


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(len(adj), dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        u = stack.pop()
        for v in np.flatnonzero(adj[u] & ~seen):
            seen[v] = True
            stack.append(v)
    return seen


def chain_period(Q: np.ndarray) -> int:
    """Period of an irreducible support graph: gcd of level(u) + 1 - level(v) over edges."""
    adj = Q > 0
    level = np.full(len(Q), -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u, v in zip(*np.nonzero(adj)):
        if level[u] >= 0 and level[v] >= 0:
            g = math.gcd(g, int(level[u] + 1 - level[v]))
    return g


def validate_chain(c: ChainSpec) -> ChainValidation:
    stochastic = bool(np.all(np.abs(c.P.sum(axis=0) - 1.0) <= STOCHASTIC_TOL)
                      and abs(c.p1.sum() - 1.0) <= STOCHASTIC_TOL)
    adj = c.Q > 0
    irreducible = bool(_reachable(adj, 0).all() and _reachable(adj.T.copy(), 0).all())
    period = chain_period(c.Q) if irreducible else 0
    return ChainValidation(stochastic, irreducible, period == 1, period)


def require_valid(c: ChainSpec) -> None:
    v = validate_chain(c)
    if not v.stochastic:
        raise MalformedMatrix("columns of P (and p1) must sum to 1")
    if not v.irreducible:
        raise NotIrreducible("transition support graph is not strongly connected")
    if not v.aperiodic:
        raise NotAperiodic(f"chain has period {v.period}")


def stationary(c: ChainSpec, tol: float = SOLVE_TOL, max_power_iter: int = DEFAULT_CAP) -> np.ndarray:
    """Stationary row vector ``s = s @ Q``.

    Direct solve of the singular system with one equation swapped for the
    normalisation, cross-checked against power iteration from ``p1``.
    """
    require_valid(c)
    Q = c.Q
    N = c.N
    A = Q.T - np.eye(N)
    A[-1, :] = 1.0
    b = np.zeros(N)
    b[-1] = 1.0
    s = np.linalg.solve(A, b)
    s = np.clip(s, 0.0, None)
    s /= s.sum()

    # power iteration converges for irreducible aperiodic chains
    p = np.full(N, 1.0 / N)
    for _ in range(max_power_iter):
        nxt = p @ Q
        if np.max(np.abs(nxt - p)) <= tol * 1e-2:
            p = nxt
            break
        p = nxt
    else:
        raise NoConvergence("power iteration did not settle")
    check = max(tol, 1e-9)
    if np.max(np.abs(p - s)) > check or np.max(np.abs(s @ Q - s)) > check:
        raise NoConvergence("direct solve and power iteration disagree")
    return s


def alpha(c: ChainSpec, s: np.ndarray | None = None) -> float:
    """Stationary expected reward ``f . s``."""
    if s is None:
        s = stationary(c)
    return float(c.f @ s)


def convergence_index(c: ChainSpec, delta: float, cap: int = DEFAULT_CAP,
                      s: np.ndarray | None = None) -> int:
    """Smallest ``t >= 1`` with ``max |Q^t[i, j] - s[j]| < delta``.

    The entrywise distance never grows with ``t`` (each row of
    ``Q^{t+1} - Qlim`` is a convex combination of rows of ``Q^t - Qlim``),
    so the bound holds for every later power as well.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if s is None:
        s = stationary(c)
    Q = c.Q
    Qt = Q.copy()
    for t in range(1, cap + 1):
        if np.max(np.abs(Qt - s[None, :])) < delta:
            return t
        Qt = Qt @ Q
    raise CapExceeded(f"no power up to {cap} is within {delta} of the limit")


def exact_expected_sum(c: ChainSpec, n: int) -> float:
    """``E[f(X_1) + ... + f(X_n)]`` by propagating ``p_t = p_{t-1} @ Q``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = c.p1.copy()
    total = 0.0
    Q = c.Q
    for t in range(n):
        if t:
            p = p @ Q
        total += float(c.f @ p)
    return total


@dataclass(frozen=True)
class Lemma1Report:
    n: int
    epsilon: float
    N: int
    alpha: float
    m: float
    delta: float
    n0: int
    lower: float
    upper: float
    exact: float
    degenerate: bool

    @property
    def sandwich_holds(self) -> bool:
        return self.lower <= self.exact <= self.upper

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["sandwich_holds"] = self.sandwich_holds
        if math.isinf(self.delta):
            d["delta"] = None
        return d


def lemma1_bounds(c: ChainSpec, epsilon: float, n: int, cap: int = DEFAULT_CAP) -> Lemma1Report:
    """Expectation sandwich for the accumulated reward over ``n`` steps.

    With ``delta = epsilon / (N m)`` and ``n0`` the convergence index for
    ``delta``::

        lower = (n - n0) (alpha - epsilon)
        upper = n0 N m + (n - n0) (alpha + epsilon)

    For ``n <= n0`` the trivial bounds ``[0, n m]`` are returned and the
    report is flagged degenerate.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    N = c.N
    m = float(c.f.max())
    exact = exact_expected_sum(c, n)
    if m == 0.0:
        return Lemma1Report(n, epsilon, N, 0.0, 0.0, math.inf, 0, 0.0, 0.0, exact, False)
    s = stationary(c)
    a = alpha(c, s)
    delta = epsilon / (N * m)
    n0 = convergence_index(c, delta, cap, s)
    if n <= n0:
        return Lemma1Report(n, epsilon, N, a, m, delta, n0, 0.0, n * m, exact, True)
    lower = (n - n0) * (a - delta * N * m)
    upper = n0 * N * m + (n - n0) * (a + delta * N * m)
    return Lemma1Report(n, epsilon, N, a, m, delta, n0, lower, upper, exact, False)


def random_chain(N: int, rng: Xoshiro256, labels=()) -> ChainSpec:
    """Chain with normalised-uniform columns, rewards in [0, 2] and random p1.

    Every entry is positive almost surely, so the chain is irreducible and
    aperiodic.
    """
    Q = np.array([[rng.random() for _ in range(N)] for _ in range(N)])
    Q /= Q.sum(axis=1, keepdims=True)
    f = np.array([2.0 * rng.random() for _ in range(N)])
    p1 = np.array([rng.random() for _ in range(N)])
    p1 /= p1.sum()
    return ChainSpec.from_Q(Q, f, p1, labels)


def sample_paths(c: ChainSpec, steps: int, paths: int, seed: int) -> list[list[str]]:
    """Simulate a true Markov chain with the given one-step law; labels per step."""
    rng = Xoshiro256(seed)
    cum_p1 = np.cumsum(c.p1)
    cum_Q = np.cumsum(c.Q, axis=1)
    out = []
    for _ in range(paths):
        state = min(int(np.searchsorted(cum_p1, rng.random(), side="right")), c.N - 1)
        path = [c.labels[state]]
        for _ in range(steps - 1):
            state = min(int(np.searchsorted(cum_Q[state], rng.random(), side="right")), c.N - 1)
            path.append(c.labels[state])
        out.append(path)
    return out


@dataclass(frozen=True)
class TransitionEstimate:
    window: tuple[int, int]
    labels: tuple
    counts: np.ndarray
    freqs: np.ndarray
    source_totals: np.ndarray


@dataclass(frozen=True)
class HomogeneityReport:
    estimates: tuple[TransitionEstimate, ...]
    max_discrepancy: float
    max_z: float
    worst_cell: tuple

    def to_json(self) -> dict:
        return {
            "labels": [str(x) for x in self.estimates[0].labels],
            "windows": [list(e.window) for e in self.estimates],
            "freqs": [e.freqs.tolist() for e in self.estimates],
            "max_discrepancy": self.max_discrepancy,
            "max_z": self.max_z,
            "worst_cell": [str(x) for x in self.worst_cell],
        }


def _label_seq(trace) -> Sequence[Hashable]:
    seq = getattr(trace, "labels", trace)
    return [getattr(x, "value", x) for x in seq]


def empirical_transition_matrix(traces, windows: Sequence[range | tuple[int, int]],
                                min_transitions: int = 1000) -> HomogeneityReport:
    """Empirical one-step frequencies per time window, and how far they drift.

    A window ``(a, b)`` covers the transitions into steps ``t`` with
    ``a <= t < b`` (0-based).  Rows are source labels.  The homogeneity
    diagnostic is the largest absolute difference between the first two
    windows, with a two-sample binomial z-score per cell.
    """
    if len(windows) < 2:
        raise InsufficientSamples("need at least two time windows")
    wins = [(w.start, w.stop) if isinstance(w, range) else tuple(w) for w in windows]
    for (a0, b0), (a1, b1) in zip(sorted(wins), sorted(wins)[1:]):
        if a1 < b0:
            raise ValueError("time windows must be disjoint")
    seqs = [_label_seq(t) for t in traces]
    labels = sorted({x for s in seqs for x in s}, key=str)
    index = {x: k for k, x in enumerate(labels)}
    L = len(labels)

    estimates = []
    for a, b in wins:
        counts = np.zeros((L, L), dtype=np.int64)
        for s in seqs:
            for t in range(max(a, 1), min(b, len(s))):
                counts[index[s[t - 1]], index[s[t]]] += 1
        totals = counts.sum(axis=1)
        observed = totals[totals > 0]
        if observed.size == 0 or observed.min() < min_transitions:
            raise InsufficientSamples(
                f"window {(a, b)} has a source label with fewer than {min_transitions} transitions")
        freqs = np.divide(counts, totals[:, None], out=np.zeros((L, L)), where=totals[:, None] > 0)
        estimates.append(TransitionEstimate((a, b), tuple(labels), counts, freqs, totals))

    e0, e1 = estimates[0], estimates[1]
    both = (e0.source_totals > 0) & (e1.source_totals > 0)
    diff = np.where(both[:, None], np.abs(e0.freqs - e1.freqs), 0.0)
    var = np.zeros((L, L))
    for e in (e0, e1):
        tot = np.maximum(e.source_totals, 1)[:, None]
        var += e.freqs * (1 - e.freqs) / tot
    se = np.sqrt(var)
    z = np.divide(diff, se, out=np.zeros((L, L)), where=se > 0)
    worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return HomogeneityReport(tuple(estimates), float(diff.max()), float(z.max()),
                             (labels[worst[0]], labels[worst[1]]))
