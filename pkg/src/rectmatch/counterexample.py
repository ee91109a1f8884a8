"""Exact and sampled probabilities for the monotone alternating history.

The event: among the first ``t`` points in x order, the y values form a
strictly monotone chain and the colors alternate.  It has probability
``2/t! * 1/2^(t-1)``.  Given that the first ``t-1`` points already do so,
the ``t``-th point extends it with probability ``1/(2t)``, which is below
the one-step value ``1/8`` cited for the 18-state model once ``t >= 5``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial

import numpy as np

from .geometry import Model, generate_batch
from .rng import XoshiroBatch, derive_seed, derive_seeds
from .trials import run_trials

# One-step probability of staying in the monotone alternating state, taken
# as given from the original 18-state analysis.
REPORTED_ONE_STEP = Fraction(1, 8)

CHUNK = 1 << 17


def alt_chain_probability(t: int) -> Fraction:
    if t < 2:
        raise ValueError("t must be >= 2")
    return Fraction(2, math.factorial(t)) * Fraction(1, 2 ** (t - 1))


def conditional_extension_exact(t: int) -> Fraction:
    if t < 2:
        raise ValueError("t must be >= 2")
    return Fraction(1, 2 * t)


@dataclass(frozen=True)
class Estimate:
    successes: int
    trials: int

    @property
    def value(self) -> float:
        return self.successes / self.trials

    @property
    def stderr(self) -> float:
        p = self.value
        return math.sqrt(p * (1 - p) / self.trials)

    def within(self, target: float, sigmas: float = 4.0) -> bool:
        """``|estimate - target| <= sigmas * sd`` with the binomial sd at ``target``."""
        sd = math.sqrt(target * (1 - target) / self.trials)
        return abs(self.value - target) <= sigmas * sd

    def to_json(self) -> dict:
        return {"successes": self.successes, "trials": self.trials,
                "value": self.value, "stderr": self.stderr}


def _chunk(k: int, trials: int) -> np.ndarray:
    start = k * CHUNK
    return np.arange(start, min(start + CHUNK, trials), dtype=np.uint64)


def _count_hits(fn, trials: int, workers: int) -> int:
    n_chunks = -(-trials // CHUNK)
    return sum(run_trials(fn, n_chunks, workers))


def is_monotone_alternating(ys: np.ndarray, colors: np.ndarray) -> np.ndarray:
    """Row-wise test on x-sorted arrays of shape ``(trials, t)``."""
    dy = np.diff(ys, axis=1)
    mono = (dy > 0).all(axis=1) | (dy < 0).all(axis=1)
    alt = (np.diff(colors, axis=1) != 0).all(axis=1)
    return mono & alt


def estimate_alt_chain_probability(t: int, trials: int, seed: int,
                                   model: Model = Model.UNIFORM_SQUARE,
                                   workers: int = 1) -> Estimate:
    """Monte Carlo frequency of the monotone alternating event on ``t`` points.

    Trial ``k`` is the instance ``generate_instance(t, derive_seed(seed, k))``.
    """
    if t < 2 or trials < 1:
        raise ValueError("need t >= 2 and trials >= 1")
    fn = partial(_alt_chain_chunk, t=t, trials=trials, seed=seed, model=model)
    return Estimate(_count_hits(fn, trials, workers), trials)


def _alt_chain_chunk(k, t, trials, seed, model):
    _, ys, cs = generate_batch(t, derive_seeds(seed, _chunk(k, trials)), model)
    return int(is_monotone_alternating(ys, cs).sum())


def estimate_conditional_extension(t: int, trials: int, seed: int, workers: int = 1) -> Estimate:
    """Sample the ``t``-th point given a monotone alternating ``(t-1)``-history.

    The history is drawn from its exact conditional law: sorted uniforms,
    flipped to decreasing by a fair coin, with one of the two alternating
    colorings.  Per-trial draw order: ``t-1`` history y values, direction bit,
    coloring bit, new y, new color bit.
    """
    if t < 3 or trials < 1:
        raise ValueError("need t >= 3 and trials >= 1")
    fn = partial(_extension_chunk, t=t, trials=trials, seed=seed)
    return Estimate(_count_hits(fn, trials, workers), trials)


def _extension_chunk(k, t, trials, seed):
    rng = XoshiroBatch(derive_seeds(seed, _chunk(k, trials)))
    hist = np.stack([rng.random() for _ in range(t - 1)], axis=1)
    hist.sort(axis=1)
    decreasing = rng.bit().astype(bool)
    first_color = rng.bit()
    y_new = rng.random()
    c_new = rng.bit()
    # last history color: first_color flipped (t-2) times
    last_color = first_color ^ np.int8((t - 2) & 1)
    top = hist[:, -1]
    # a decreasing chain is the mirror image 1 - y of an increasing one
    extends = np.where(decreasing, y_new < 1.0 - top, y_new > top)
    return int((extends & (c_new != last_color)).sum())


@dataclass(frozen=True)
class CounterexampleReport:
    t: int
    exact_joint: Fraction
    exact_conditional: Fraction
    reported_one_step: Fraction
    empirical_joint: Estimate | None
    empirical_conditional: Estimate | None
    trials: int
    seed: int | None

    @property
    def gap(self) -> Fraction:
        return self.reported_one_step - self.exact_conditional

    @property
    def conditional_below_one_step(self) -> bool:
        return self.exact_conditional < self.reported_one_step

    def to_json(self) -> dict:
        def frac(q: Fraction) -> dict:
            return {"num": q.numerator, "den": q.denominator}

        empirical = {}
        if self.empirical_joint is not None:
            empirical["joint"] = self.empirical_joint.to_json()
        if self.empirical_conditional is not None:
            empirical["conditional"] = self.empirical_conditional.to_json()
        return {
            "t": self.t,
            "exact_joint": frac(self.exact_joint),
            "exact_conditional": frac(self.exact_conditional),
            "one_step": frac(self.reported_one_step),
            "gap": frac(self.gap),
            "conditional_below_one_step": self.conditional_below_one_step,
            "empirical": empirical,
            "trials": self.trials,
            "seed": self.seed,
        }


def markov_gap_report(t: int, trials: int = 0, seed: int | None = None,
                      workers: int = 1) -> CounterexampleReport:
    """Exact quantities plus, when ``trials > 0``, both Monte Carlo estimates.

    The two estimates use independent sub-streams of ``seed``.
    """
    if t < 3:
        raise ValueError("t must be >= 3")
    joint = cond = None
    if trials > 0:
        if seed is None:
            raise ValueError("a seed is required for Monte Carlo estimates")
        joint = estimate_alt_chain_probability(t, trials, derive_seed(seed, 1), workers=workers)
        cond = estimate_conditional_extension(t, trials, derive_seed(seed, 2), workers)
    return CounterexampleReport(t, alt_chain_probability(t), conditional_extension_exact(t),
                                REPORTED_ONE_STEP, joint, cond, trials, seed)
