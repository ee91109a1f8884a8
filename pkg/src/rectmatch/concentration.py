"""Concentration of the normalised maximum matching size M(n)/n.

Bounded-difference constants, McDiarmid tail bounds, the summable tail used
for almost-sure convergence, and Monte Carlo checks of each ingredient
(bounded differences, superadditivity, tail frequencies) with the exact
solver.

Trial ``k`` of a run with master seed ``s`` always uses the instance
``generate_instance(n, derive_seed(s, k), model)``; results are reduced in
trial order, so output does not depend on the worker count.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded, EmptyProfile
from .geometry import Instance, Model, flip_color, generate_instance, matched_count, perturb_y
from .rng import Xoshiro256, derive_seed
from .solvers import SOLVERS, SolveLimits
from .trials import run_trials

THRESHOLD = 0.83

# sub-stream tags under a trial or master seed
_PERTURB_STREAM = 0x5045525455524232
_PILOT_STREAM = 0x50494C4F54
_TEST_STREAM = 0x54455354


def _solve_count(inst: Instance, solver: str, limits: SolveLimits | None) -> int:
    return matched_count(SOLVERS[solver](inst, limits))


# -- bounds ------------------------------------------------------------------

@dataclass(frozen=True)
class DifferenceProfile:
    """Per-coordinate change bounds for M(n)/n: 4/n for each y, 2/n for each color."""

    n: int
    d: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        d = np.concatenate([np.full(self.n, 4.0 / self.n), np.full(self.n, 2.0 / self.n)])
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def sum_squares(self) -> float:
        return math.fsum(float(x) ** 2 for x in self.d)


def mcdiarmid_bound(d, epsilon: float, two_sided: bool = False) -> float:
    """``exp(-2 eps^2 / sum d_i^2)``, doubled when two-sided, capped at 1 or 2."""
    if isinstance(d, DifferenceProfile):
        d = d.d
    d = np.asarray(d, dtype=float)
    if d.size == 0:
        raise EmptyProfile("bounded-difference profile is empty")
    if epsilon <= 0 or np.any(d <= 0):
        raise ValueError("epsilon and all d_i must be positive")
    bound = math.exp(-2.0 * epsilon**2 / math.fsum(d**2))
    return min(2.0 * bound, 2.0) if two_sided else min(bound, 1.0)


def tail_bound(n: int, epsilon: float) -> float:
    """Two-sided ``Pr(|M/n - E M/n| >= eps) <= 2 exp(-eps^2 n / 10)``."""
    return mcdiarmid_bound(DifferenceProfile(n), epsilon, two_sided=True)


def borel_cantelli_ratio(epsilon: float) -> float:
    return math.exp(-epsilon**2 / 40.0)


def borel_cantelli_tail(epsilon: float, n0: int) -> float:
    """``(n0 - 1) + 2 r^n0 / (1 - r)`` with ``r = exp(-eps^2 / 40)``."""
    if epsilon <= 0 or n0 < 1:
        raise ValueError("need epsilon > 0 and n0 >= 1")
    r = borel_cantelli_ratio(epsilon)
    return (n0 - 1) + 2.0 * r**n0 / -math.expm1(-epsilon**2 / 40.0)


def beta_from_alpha(alpha: float) -> float:
    return (alpha - THRESHOLD) / 3.0


# -- bounded differences -----------------------------------------------------

def _bounded_difference_trial(k, master, n, perturbations, model, solver, limits):
    seed = derive_seed(master, k)
    inst = generate_instance(n, seed, model)
    rng = Xoshiro256(derive_seed(seed, _PERTURB_STREAM))
    base = _solve_count(inst, solver, limits)
    pos, col = [], []
    taken = {p.y for p in inst.points}
    for _ in range(perturbations):
        i = rng.below(n)
        y_new = rng.random()
        while y_new in taken:
            y_new = rng.random()
        pos.append(abs(_solve_count(perturb_y(inst, i, y_new), solver, limits) - base))
    for _ in range(perturbations):
        i = rng.below(n)
        col.append(abs(_solve_count(flip_color(inst, i), solver, limits) - base))
    return pos, col


@dataclass(frozen=True)
class BoundedDifferenceResult:
    n: int
    trials: int
    perturbations_per_trial: int
    position_hist: dict
    color_hist: dict

    @property
    def max_position(self) -> int:
        return max(self.position_hist, default=0)

    @property
    def max_color(self) -> int:
        return max(self.color_hist, default=0)

    @property
    def violations(self) -> int:
        return (sum(c for d, c in self.position_hist.items() if d > 4)
                + sum(c for d, c in self.color_hist.items() if d > 2))

    def to_json(self) -> dict:
        return {
            "n": self.n, "trials": self.trials,
            "perturbations_per_trial": self.perturbations_per_trial,
            "max_position_delta": self.max_position, "max_color_delta": self.max_color,
            "position_hist": {str(k): v for k, v in sorted(self.position_hist.items())},
            "color_hist": {str(k): v for k, v in sorted(self.color_hist.items())},
            "violations": self.violations,
        }


def bounded_difference_check(n: int, trials: int, perturbations_per_trial: int, seed: int,
                             solver: str = "exact", model: Model = Model.GRID_X,
                             limits: SolveLimits | None = None,
                             workers: int = 1) -> BoundedDifferenceResult:
    """Re-solve after single-coordinate changes and record ``|delta M|``.

    Each trial draws an instance, then applies ``perturbations_per_trial``
    independent vertical moves (new y uniform) and as many single color
    flips, each to the unchanged instance.
    """
    if solver == "greedy":
        raise ValueError("bounded differences are only claimed for maximum matchings")
    fn = partial(_bounded_difference_trial, master=seed, n=n,
                 perturbations=perturbations_per_trial, model=model,
                 solver=solver, limits=limits)
    pos, col = Counter(), Counter()
    for p, c in run_trials(fn, trials, workers):
        pos.update(p)
        col.update(c)
    return BoundedDifferenceResult(n, trials, perturbations_per_trial, dict(pos), dict(col))


# -- expectation -------------------------------------------------------------

def _fraction_trial(k, master, n, model, solver, limits):
    inst = generate_instance(n, derive_seed(master, k), model)
    try:
        return _solve_count(inst, solver, limits) / n
    except BudgetExceeded:
        return None


@dataclass(frozen=True)
class ExpectationEstimate:
    n: int
    solver: str
    values: tuple = field(repr=False)
    discarded: int = 0

    @property
    def trials(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return math.fsum(self.values) / len(self.values)

    @property
    def sd(self) -> float:
        if len(self.values) < 2:
            return 0.0
        return float(np.std(self.values, ddof=1))

    @property
    def stderr(self) -> float:
        return self.sd / math.sqrt(len(self.values))

    def to_json(self) -> dict:
        return {"n": self.n, "solver": self.solver, "trials": self.trials,
                "discarded": self.discarded, "mean": self.mean, "sd": self.sd,
                "stderr": self.stderr}


def empirical_expectation(n: int, trials: int, seed: int, solver: str = "exact",
                          model: Model = Model.GRID_X, limits: SolveLimits | None = None,
                          workers: int = 1) -> ExpectationEstimate:
    """Monte Carlo mean of M(n)/n; trials that exceed the solve budget are dropped."""
    fn = partial(_fraction_trial, master=seed, n=n, model=model, solver=solver, limits=limits)
    raw = run_trials(fn, trials, workers)
    values = tuple(v for v in raw if v is not None)
    if not values:
        raise BudgetExceeded(None, 0, "every trial exceeded the budget")
    return ExpectationEstimate(n, solver, values, len(raw) - len(values))


# -- superadditivity ---------------------------------------------------------

@dataclass(frozen=True)
class SuperadditivityResult:
    k: int
    total: int
    left: int
    right: int

    @property
    def holds(self) -> bool:
        return self.total >= self.left + self.right


def superadditivity_check(inst: Instance, k: int, solver: str = "exact",
                          limits: SolveLimits | None = None) -> SuperadditivityResult:
    """Compare M(S) with M(first k points by x) + M(remaining points)."""
    if not 1 <= k < inst.n:
        raise ValueError(f"split index must satisfy 1 <= k < n, got k={k}, n={inst.n}")
    total = _solve_count(inst, solver, limits)
    left = _solve_count(inst.subinstance(range(k)), solver, limits)
    right = _solve_count(inst.subinstance(range(k, inst.n)), solver, limits)
    return SuperadditivityResult(k, total, left, right)


@dataclass(frozen=True)
class FeketeRow:
    n: int
    mean: float          # of M(n)/n
    stderr: float
    sup_so_far: float


@dataclass(frozen=True)
class FeketeMargin:
    n: int
    m: int
    margin: float        # E[M(n+m)] - E[M(n)] - E[M(m)], in points
    stderr: float

    @property
    def ok(self) -> bool:
        return self.margin >= -4.0 * self.stderr


@dataclass(frozen=True)
class FeketeReport:
    rows: tuple[FeketeRow, ...]
    margins: tuple[FeketeMargin, ...]
    trials: int

    @property
    def argsup(self) -> int:
        best = max(self.rows, key=lambda r: r.mean)
        return best.n

    def to_csv(self) -> str:
        lines = ["n,mean,stderr,sup_so_far"]
        lines += [f"{r.n},{r.mean!r},{r.stderr!r},{r.sup_so_far!r}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "rows": [r.__dict__ for r in self.rows],
            "margins": [dict(m.__dict__, ok=m.ok) for m in self.margins],
            "argsup": self.argsup,
        }


def fekete_report(ns: Sequence[int], trials: int, seed: int,
                  pairs: Sequence[tuple[int, int]] | None = None,
                  model: Model = Model.GRID_X, limits: SolveLimits | None = None,
                  workers: int = 1) -> FeketeReport:
    """Estimated E[M(n)]/n per n, its running sup, and superadditivity margins.

    Each n gets its own sub-stream ``derive_seed(seed, n)``.  Without
    explicit ``pairs``, every ``(a, b)`` with ``a <= b`` and ``a``, ``b``,
    ``a + b`` all in ``ns`` is checked.
    """
    ns = sorted(set(ns))
    est = {n: empirical_expectation(n, trials, derive_seed(seed, n), "exact", model, limits, workers)
           for n in ns}
    rows = []
    sup = -math.inf
    for n in ns:
        e = est[n]
        sup = max(sup, e.mean)
        rows.append(FeketeRow(n, e.mean, e.stderr, sup))
    if pairs is None:
        pairs = [(a, b) for a in ns for b in ns if a <= b and a + b in est]
    margins = []
    for a, b in pairs:
        if a + b not in est:
            raise ValueError(f"n={a + b} is needed for pair ({a}, {b}) but not estimated")
        # counts: E[M(n)] = n * mean fraction
        margin = (a + b) * est[a + b].mean - a * est[a].mean - b * est[b].mean
        se = math.sqrt(((a + b) * est[a + b].stderr) ** 2 + (a * est[a].stderr) ** 2
                       + (b * est[b].stderr) ** 2)
        margins.append(FeketeMargin(a, b, margin, se))
    return FeketeReport(tuple(rows), tuple(margins), trials)


# -- tails -------------------------------------------------------------------

@dataclass(frozen=True)
class TailReport:
    n: int
    epsilon: float
    trials: int
    pilot_trials: int
    pilot_mean: float
    exceedances: int
    bound: float

    @property
    def frequency(self) -> float:
        return self.exceedances / self.trials

    @property
    def stderr(self) -> float:
        p = self.frequency
        return math.sqrt(p * (1 - p) / self.trials)

    @property
    def vacuous(self) -> bool:
        return self.bound >= 1.0

    @property
    def passed(self) -> bool:
        return self.frequency <= self.bound + 4.0 * self.stderr

    def to_json(self) -> dict:
        return {"n": self.n, "epsilon": self.epsilon, "trials": self.trials,
                "pilot_trials": self.pilot_trials, "pilot_mean": self.pilot_mean,
                "exceedances": self.exceedances, "frequency": self.frequency,
                "stderr": self.stderr, "bound": self.bound, "vacuous": self.vacuous,
                "passed": self.passed}


def tail_vs_bound(n: int, epsilon: float, trials: int, seed: int, solver: str = "exact",
                  pilot_trials: int | None = None, model: Model = Model.GRID_X,
                  limits: SolveLimits | None = None, workers: int = 1) -> TailReport:
    """Empirical ``Pr(|M/n - mean| >= eps)`` against ``2 exp(-eps^2 n / 10)``.

    The centre is the mean of an independent pilot run (``pilot_trials``,
    default ``trials``) since the true expectation is unknown.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    pilot = empirical_expectation(n, pilot_trials or trials, derive_seed(seed, _PILOT_STREAM),
                                  solver, model, limits, workers)
    test = empirical_expectation(n, trials, derive_seed(seed, _TEST_STREAM),
                                 solver, model, limits, workers)
    hits = sum(1 for v in test.values if abs(v - pilot.mean) >= epsilon)
    return TailReport(n, epsilon, test.trials, pilot.trials, pilot.mean, hits,
                      tail_bound(n, epsilon))


@dataclass(frozen=True)
class ConcentrationReport:
    n: int
    epsilon: float
    tail_bound: float
    r: float
    n0: int
    bc_partial_sum: float
    expectation: ExpectationEstimate | None = None
    bounded_differences: BoundedDifferenceResult | None = None
    alpha: float | None = None

    @property
    def beta(self) -> float | None:
        return None if self.alpha is None else beta_from_alpha(self.alpha)

    def to_json(self) -> dict:
        out = {"n": self.n, "epsilon": self.epsilon, "tail_bound": self.tail_bound,
               "r": self.r, "n0": self.n0, "bc_partial_sum": self.bc_partial_sum,
               "sum_d_squared": DifferenceProfile(self.n).sum_squares}
        if self.expectation is not None:
            out["empirical_mean"] = self.expectation.mean
            out["empirical_sd"] = self.expectation.sd
            out["trials"] = self.expectation.trials
        if self.bounded_differences is not None:
            out["max_position_delta"] = self.bounded_differences.max_position
            out["max_color_delta"] = self.bounded_differences.max_color
        if self.alpha is not None:
            out["alpha"] = self.alpha
            out["beta"] = self.beta
            out["expectation_floor"] = THRESHOLD + self.beta
        return out


def concentration_report(n: int, epsilon: float, trials: int = 0, seed: int | None = None,
                         n0: int = 1, perturbations: int = 3, alpha: float | None = None,
                         model: Model = Model.GRID_X, limits: SolveLimits | None = None,
                         workers: int = 1) -> ConcentrationReport:
    """Closed-form quantities for ``(n, eps)``, plus Monte Carlo parts if ``trials > 0``.

    ``beta`` is reported only when a stationary reward rate ``alpha`` is given.
    """
    expectation = bd = None
    if trials > 0:
        if seed is None:
            raise ValueError("a seed is required for Monte Carlo runs")
        expectation = empirical_expectation(n, trials, derive_seed(seed, 1), "exact",
                                            model, limits, workers)
        bd = bounded_difference_check(n, trials, perturbations, derive_seed(seed, 2),
                                      "exact", model, limits, workers)
    return ConcentrationReport(n, epsilon, tail_bound(n, epsilon), borel_cantelli_ratio(epsilon),
                               n0, borel_cantelli_tail(epsilon, n0), expectation, bd, alpha)
