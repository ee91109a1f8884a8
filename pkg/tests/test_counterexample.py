import math
from fractions import Fraction

import numpy as np
import pytest

from rectmatch.counterexample import (REPORTED_ONE_STEP, alt_chain_probability,
                                      conditional_extension_exact,
                                      estimate_alt_chain_probability,
                                      estimate_conditional_extension, is_monotone_alternating,
                                      markov_gap_report)
from rectmatch.geometry import generate_instance


@pytest.mark.parametrize("t, expected", [(2, Fraction(1, 2)), (3, Fraction(1, 12)),
                                         (4, Fraction(1, 96)), (5, Fraction(1, 960))])
def test_joint_probability_values(t, expected):
    assert alt_chain_probability(t) == expected
    assert alt_chain_probability(t) == Fraction(1, math.factorial(t) * 2 ** (t - 2))


def test_joint_probability_large_t_is_exact():
    p = alt_chain_probability(60)
    assert p.numerator == 1 and p.denominator == math.factorial(60) * 2**58


@pytest.mark.parametrize("t", range(2, 40))
def test_chain_rule_identity(t):
    assert alt_chain_probability(t + 1) == alt_chain_probability(t) * conditional_extension_exact(t + 1)


def test_conditional_examples():
    assert conditional_extension_exact(4) == Fraction(1, 8) == REPORTED_ONE_STEP
    assert conditional_extension_exact(5) == Fraction(1, 10)
    assert conditional_extension_exact(10) == Fraction(1, 20)


def test_event_detector_against_instances():
    # per-instance oracle written without numpy
    hits = 0
    for s in range(3000):
        inst = generate_instance(3, s)
        ys = [p.y for p in inst.points]
        cs = [p.color for p in inst.points]
        mono = ys == sorted(ys) or ys == sorted(ys, reverse=True)
        alt = all(a != b for a, b in zip(cs, cs[1:]))
        got = is_monotone_alternating(np.array([ys]), np.array([[int(c) for c in cs]]))[0]
        assert got == (mono and alt)
        hits += got
    assert hits > 0


def test_estimate_matches_instance_enumeration():
    from rectmatch.rng import derive_seed
    est = estimate_alt_chain_probability(3, 500, seed=44)
    manual = 0
    for k in range(500):
        inst = generate_instance(3, derive_seed(44, k))
        ys = [p.y for p in inst.points]
        cs = [p.color for p in inst.points]
        if (ys == sorted(ys) or ys == sorted(ys, reverse=True)) and cs[0] != cs[1] != cs[2]:
            manual += 1
    assert est.successes == manual


def test_estimates_replay_deterministically():
    a = estimate_alt_chain_probability(2, 5000, seed=9)
    b = estimate_alt_chain_probability(2, 5000, seed=9)
    assert a == b
    assert a.within(0.5)


def test_conditional_extension_in_window():
    for t in (3, 5):
        est = estimate_conditional_extension(t, 10**5, seed=t)
        assert est.within(1 / (2 * t))


def test_stderr_scales_with_trials():
    small = estimate_conditional_extension(5, 20000, seed=1)
    big = estimate_conditional_extension(5, 80000, seed=2)
    assert big.stderr == pytest.approx(small.stderr / 2, rel=0.1)


def test_alt_chain_t5_window():
    est = estimate_alt_chain_probability(5, 10**6, seed=5)
    assert est.within(1 / 960)
    assert abs(est.successes - 1042) < 4 * math.sqrt(1042)


@pytest.mark.parametrize("t, gap", [(5, Fraction(1, 40)), (4, Fraction(0)),
                                    (100, Fraction(1, 8) - Fraction(1, 200))])
def test_gap_report(t, gap):
    rep = markov_gap_report(t)
    assert rep.gap == gap
    assert rep.conditional_below_one_step == (t >= 5)


def test_gap_report_json_and_workers():
    one = markov_gap_report(5, 3000, seed=7, workers=1).to_json()
    assert one["exact_joint"] == {"num": 1, "den": 960}
    assert one["one_step"] == {"num": 1, "den": 8}
    assert one["empirical"]["joint"]["trials"] == 3000
