import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rectmatch.errors import CapExceeded, InsufficientSamples, MalformedMatrix, NotAperiodic, NotIrreducible
from rectmatch.geometry import generate_instance
from rectmatch.process import (ChainSpec, alpha, chain_period, convergence_index,
                               empirical_transition_matrix, exact_expected_sum, lemma1_bounds,
                               load_chain, random_chain, sample_paths, stationary,
                               validate_chain)
from rectmatch.rng import Xoshiro256
from rectmatch.solvers import solve_greedy_sweep

DATA = Path(__file__).parent / "data"


def two_state(a=0.1, b=0.2, f=(0.0, 2.0), p1=(1.0, 0.0)):
    return ChainSpec.from_Q([[1 - a, a], [b, 1 - b]], f, p1)


def symmetric(p1=(1.0, 0.0)):
    return ChainSpec.from_Q([[0.5, 0.5], [0.5, 0.5]], [0.0, 2.0], p1)


def test_column_convention_is_transposed():
    c = load_chain(DATA / "chain2.json")
    np.testing.assert_array_equal(c.Q, [[0.9, 0.1], [0.2, 0.8]])


def test_validate_examples():
    v = validate_chain(two_state())
    assert v.stochastic and v.irreducible and v.aperiodic
    perm = ChainSpec.from_Q([[0, 1], [1, 0]], [0, 1], [1, 0])
    v = validate_chain(perm)
    assert v.irreducible and not v.aperiodic and v.period == 2
    block = np.zeros((4, 4))
    block[:2, :2] = 0.5
    block[2:, 2:] = 0.5
    v = validate_chain(ChainSpec.from_Q(block, [0] * 4, [0.25] * 4))
    assert not v.irreducible


def test_period_three_cycle():
    cyc = np.roll(np.eye(3), 1, axis=1)
    assert chain_period(cyc) == 3
    cyc[0] = [0.5, 0.5, 0.0]
    assert chain_period(cyc) == 1


def test_malformed_inputs():
    with pytest.raises(MalformedMatrix):
        ChainSpec([[1.0, 0.0]], [0.0], [1.0])
    with pytest.raises(MalformedMatrix):
        ChainSpec([[1.2, 0.0], [-0.2, 1.0]], [0, 0], [1, 0])
    with pytest.raises(MalformedMatrix):
        ChainSpec([[1, 0], [0, 1]], [0, -1], [1, 0])
    with pytest.raises(MalformedMatrix):
        stationary(ChainSpec([[0.5, 0.5], [0.6, 0.5]], [0, 1], [1, 0]))


def test_stationary_closed_forms():
    s = stationary(two_state())
    assert np.max(np.abs(s - [2 / 3, 1 / 3])) <= 1e-12
    s = stationary(symmetric())
    assert np.max(np.abs(s - [0.5, 0.5])) <= 1e-12


def test_stationary_errors():
    with pytest.raises(NotAperiodic):
        stationary(ChainSpec.from_Q([[0, 1], [1, 0]], [0, 1], [1, 0]))
    block = np.kron(np.eye(2), np.full((2, 2), 0.5))
    with pytest.raises(NotIrreducible):
        stationary(ChainSpec.from_Q(block, [0] * 4, [0.25] * 4))


@pytest.mark.parametrize("seed", range(10))
def test_stationary_matches_power_iteration(seed):
    c = random_chain(6, Xoshiro256(seed))
    s = stationary(c)
    # independent oracle: high matrix power, every row converges to s
    Qk = np.linalg.matrix_power(c.Q, 4096)
    assert np.max(np.abs(Qk - s[None, :])) <= 1e-9
    assert np.max(np.abs(s @ c.Q - s)) <= 1e-10
    assert s.sum() == pytest.approx(1.0, abs=1e-15)


def test_alpha_examples():
    assert alpha(two_state()) == pytest.approx(2 / 3, abs=1e-12)
    assert alpha(two_state(f=(0, 0))) == 0.0
    assert alpha(two_state(f=(3.5, 3.5))) == pytest.approx(3.5, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32), data=st.data())
def test_alpha_invariant_under_relabeling(seed, data):
    c = random_chain(5, Xoshiro256(seed))
    perm = data.draw(st.permutations(range(5)))
    assert alpha(c.permuted(perm)) == pytest.approx(alpha(c), abs=1e-12)


def test_convergence_index_trivial_cases():
    s = np.array([0.3, 0.7])
    already = ChainSpec.from_Q([s, s], [0, 1], [1, 0])
    assert convergence_index(already, 1e-6) == 1
    assert convergence_index(symmetric(), 1e-6) == 1


def test_convergence_index_cap():
    slow = two_state(a=1e-4, b=1e-4)
    with pytest.raises(CapExceeded):
        convergence_index(slow, 1e-9, cap=10)


@pytest.mark.parametrize("seed", range(20))
def test_convergence_index_tracks_spectral_decay(seed):
    c = random_chain(6, Xoshiro256(1000 + seed))
    lam = sorted(np.abs(np.linalg.eigvals(c.Q)))[-2]
    estimate = math.log(1e-3) / math.log(lam)
    n0 = convergence_index(c, 1e-3)
    assert estimate / 2 <= n0 <= 2 * estimate + 1
    # the entrywise bound keeps holding past n0
    Qt = np.linalg.matrix_power(c.Q, n0)
    s = stationary(c)
    for _ in range(50):
        assert np.max(np.abs(Qt - s)) < 1e-3
        Qt = Qt @ c.Q


def test_exact_expected_sum_examples():
    c = two_state(p1=(0.25, 0.75))
    assert exact_expected_sum(c, 1) == pytest.approx(c.f @ c.p1)
    one = ChainSpec([[1.0]], [3.0], [1.0])
    assert exact_expected_sum(one, 17) == 51.0
    assert exact_expected_sum(symmetric(), 10) == pytest.approx(9.0, abs=1e-12)


def test_exact_expected_sum_matches_matrix_powers():
    c = random_chain(4, Xoshiro256(77))
    direct = sum(c.f @ (c.p1 @ np.linalg.matrix_power(c.Q, t)) for t in range(30))
    assert exact_expected_sum(c, 30) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("eps", [0.05, 0.3, 1.0])
def test_lemma1_symmetric_example(eps):
    for n in (2, 10, 100):
        r = lemma1_bounds(symmetric(), eps, n)
        assert r.n0 == 1 and r.alpha == pytest.approx(1.0)
        assert r.delta == pytest.approx(eps / 4)
        assert r.lower == pytest.approx((n - 1) * (1 - eps))
        assert r.upper == pytest.approx(4 + (n - 1) * (1 + eps))
        assert r.exact == pytest.approx(n - 1)
        assert r.sandwich_holds


def test_lemma1_zero_reward():
    r = lemma1_bounds(two_state(f=(0, 0)), 0.1, 50)
    assert r.lower == r.upper == r.exact == 0.0


def test_lemma1_degenerate_flag():
    c = two_state(a=0.01, b=0.02)
    r = lemma1_bounds(c, 0.01, 3)
    assert r.degenerate and r.n <= r.n0
    assert r.lower == 0.0 and r.upper == 3 * r.m


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), N=st.integers(1, 6), eps=st.sampled_from([0.05, 0.1, 0.5]),
       extra=st.integers(1, 400))
def test_lemma1_sandwich_property(seed, N, eps, extra):
    c = random_chain(N, Xoshiro256(seed))
    n0 = lemma1_bounds(c, eps, 1).n0
    n = n0 + extra
    r = lemma1_bounds(c, eps, n)
    assert not r.degenerate
    assert r.lower <= r.exact <= r.upper
    assert abs(r.exact / n - r.alpha) <= eps + r.n0 * r.N * r.m / n


def test_transition_estimate_synthetic_chain():
    c = random_chain(3, Xoshiro256(8), labels=("a", "b", "c"))
    paths = sample_paths(c, 40, 600, seed=21)
    rep = empirical_transition_matrix(paths, [range(1, 20), range(20, 40)], min_transitions=1000)
    # a truly homogeneous chain: every cell within 4 sigma (Bonferroni-free, 9 cells)
    assert rep.max_z <= 4.0
    for est in rep.estimates:
        np.testing.assert_allclose(est.freqs, c.Q, atol=0.05)


def test_transition_estimate_identical_windows_and_constant_traces():
    paths = [["x"] * 30 for _ in range(100)]
    rep = empirical_transition_matrix(paths, [range(1, 15), range(15, 30)], min_transitions=1000)
    assert rep.max_discrepancy == 0.0
    assert rep.estimates[0].freqs.tolist() == [[1.0]]
    # two copies of the same traces, shifted windows of identical content
    rep = empirical_transition_matrix(paths, [(0, 15), (15, 30)], min_transitions=100)
    assert rep.max_discrepancy == 0.0


def test_transition_estimate_requires_samples():
    with pytest.raises(InsufficientSamples):
        empirical_transition_matrix([["a", "b"] * 5], [range(0, 5), range(5, 10)])
    with pytest.raises(InsufficientSamples):
        empirical_transition_matrix([["a"] * 10], [range(0, 10)], min_transitions=1)


def test_transition_estimate_on_sweep_traces():
    traces = [solve_greedy_sweep(generate_instance(40, s))[1] for s in range(400)]
    rep = empirical_transition_matrix(traces, [range(5, 20), range(20, 35)], min_transitions=50)
    assert set(rep.estimates[0].labels) <= {"INIT1", "MONO_ALT_2", "MONO_ALT_3",
                                            "MATCH_EMITTED", "OTHER"}
    for est in rep.estimates:
        rows = est.freqs[est.source_totals > 0].sum(axis=1)
        np.testing.assert_allclose(rows, 1.0)
