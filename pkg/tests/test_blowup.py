import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noisytai._validation import SizeLimitError, ValidationError
from noisytai.blowup import (
    SequenceSet,
    SequenceSpace,
    blowing_up_bound,
    compute_l_n,
    hamming_distance_matrix,
    hamming_neighborhood,
    lemma_threshold,
    penalty_factor_log,
    product_measure,
    verify_blowup_exact,
)
from noisytai.probcore import Pmf


def brute_neighbourhood(space, members, l):
    """Sequences within distance l of a member, by direct pairwise comparison."""
    seqs = list(itertools.product(range(space.q), repeat=space.n))
    chosen = [s for s in seqs if members[space.index(s)]]
    out = np.zeros(space.total, dtype=bool)
    for s in seqs:
        if any(sum(a != b for a, b in zip(s, t)) <= l for t in chosen):
            out[space.index(s)] = True
    return out


def random_set(space, seed, p=None):
    gen = np.random.default_rng(seed)
    p = gen.uniform(0.01, 0.6) if p is None else p
    return SequenceSet(space, gen.random(space.total) < p)


def test_indexing_roundtrip():
    sp = SequenceSpace(3, 4)
    seqs = sp.sequences()
    assert seqs.shape == (81, 4)
    np.testing.assert_array_equal(sp.index(seqs), np.arange(81))
    # position 0 is the least significant digit
    assert sp.index([1, 0, 0, 0]) == 1 and sp.index([0, 0, 0, 1]) == 27


def test_product_measure_matches_direct():
    p = np.array([0.2, 0.5, 0.3])
    sp = SequenceSpace(3, 3)
    direct = np.array([np.prod(p[s]) for s in sp.sequences()])
    np.testing.assert_allclose(product_measure(p, 3), direct, rtol=1e-14)


def test_neighbourhood_examples():
    sp = SequenceSpace(2, 3)
    s = SequenceSet.from_sequences(sp, [[0, 0, 0]])
    assert hamming_neighborhood(s, 0) == s
    ball = hamming_neighborhood(s, 1)
    expected = SequenceSet.from_sequences(sp, [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert ball == expected
    assert len(ball) == 4
    assert hamming_neighborhood(s, 3) == SequenceSet.full(sp)
    assert hamming_neighborhood(SequenceSet.empty(sp), 2) == SequenceSet.empty(sp)
    with pytest.raises(ValidationError):
        hamming_neighborhood(s, -1)


def test_space_cap():
    with pytest.raises(SizeLimitError):
        SequenceSpace(2, 29)


def test_bound_examples():
    assert blowing_up_bound(1.0, 10, 3) == pytest.approx(1 - math.exp(-2 * 9 / 10), abs=1e-15)
    # independent arithmetic for n=10, P(D)=0.5, l=2
    t = math.sqrt(5 * math.log(2))
    oracle = 1 - math.exp(-(2 / 10) * (2 - t) ** 2)
    assert blowing_up_bound(0.5, 10, 2) == pytest.approx(oracle, rel=1e-12)
    assert blowing_up_bound(0.5, 10, 2) == pytest.approx(0.0038208, abs=1e-7)
    thr = lemma_threshold(0.3, 8)
    assert blowing_up_bound(0.3, 8, thr) == 0.0
    assert blowing_up_bound(0.3, 8, thr - 0.5) == 0.0
    with pytest.raises(ValidationError):
        blowing_up_bound(0.0, 8, 3)


def test_l_n_examples():
    for n in (4, 10, 50):
        assert compute_l_n(n, 0.5, b_of_n=0.0).l_n == math.ceil(math.sqrt(n * math.log(3) / 2))
    params = compute_l_n(100, 0.5)
    radius = (math.sqrt(100 * math.log(100)) + math.sqrt(100 * math.log(3))) / math.sqrt(2)
    assert params.l_n == math.ceil(radius) == 23
    assert params.eps_prime == pytest.approx(0.99, abs=1e-15)
    with pytest.raises(ValidationError):
        compute_l_n(10, 1.0)


def test_penalty_examples():
    assert penalty_factor_log(1, 1, 2, 1.0) == pytest.approx(math.log(2 * math.e), abs=1e-15)
    assert penalty_factor_log(1, 1, 2, 1.0) == pytest.approx(1.6931, abs=1e-4)
    expected = 23 * (math.log(200) + 1 - math.log(2.3))
    assert penalty_factor_log(100, 23, 2, 0.1) == pytest.approx(expected, rel=1e-14)
    assert penalty_factor_log(100, 23, 2, 0.1) == pytest.approx(125.7, abs=0.01)
    assert penalty_factor_log(8, 0, 2, 0.1) == 0.0
    floors = [0.01, 0.05, 0.1, 0.5, 1.0]
    vals = [penalty_factor_log(10, 4, 3, f) for f in floors]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_verify_examples():
    sp = SequenceSpace(2, 6)
    pmf = Pmf([0.3, 0.7])
    exact, bound, vacuous = verify_blowup_exact(pmf, 6, SequenceSet.full(sp), 2)
    assert exact == pytest.approx(1.0) and exact >= bound
    s = random_set(sp, 4, 0.3)
    exact, bound, vacuous = verify_blowup_exact(pmf, 6, s, 0)
    assert exact == pytest.approx(s.probability(pmf)) and vacuous and bound == 0.0


def test_uniform_binary_n10_sweep():
    sp = SequenceSpace(2, 10)
    s = random_set(sp, 2024, 0.5)
    pmf = Pmf([0.5, 0.5])
    assert 0.4 < s.probability(pmf) < 0.6
    for l in range(11):
        exact, bound, _ = verify_blowup_exact(pmf, 10, s, l)
        assert exact >= bound


@given(st.integers(2, 3), st.integers(1, 5), st.integers(0, 2**31 - 1), st.integers(0, 5))
def test_neighbourhood_matches_brute_force(q, n, seed, l):
    sp = SequenceSpace(q, n)
    s = random_set(sp, seed, 0.08)
    fast = hamming_neighborhood(s, l).members
    np.testing.assert_array_equal(fast, brute_neighbourhood(sp, s.members, l))


@given(st.integers(2, 3), st.integers(2, 7), st.integers(0, 2**31 - 1))
def test_neighbourhood_monotone_and_composes(q, n, seed):
    sp = SequenceSpace(q, n)
    s = random_set(sp, seed, 0.05)
    t = SequenceSet(sp, s.members | random_set(sp, seed + 1, 0.05).members)
    dist = hamming_distance_matrix(sp)
    prev = s
    for l in range(1, n + 1):
        cur = hamming_neighborhood(s, l)
        assert s <= cur and prev <= cur
        assert cur <= hamming_neighborhood(t, l)
        stepped = hamming_neighborhood(prev, 1)
        assert stepped == cur
        direct = dist[:, s.members].min(axis=1) <= l if len(s) else np.zeros(sp.total, bool)
        np.testing.assert_array_equal(cur.members, direct)
        prev = cur


@given(st.integers(2, 3), st.integers(0, 2**31 - 1))
def test_lemma_soundness(q, seed):
    gen = np.random.default_rng(seed)
    n = int(gen.choice([6, 8])) if q == 2 else 6
    pmf = Pmf(gen.dirichlet(np.ones(q)))
    sp = SequenceSpace(q, n)
    s = random_set(sp, seed)
    if len(s) == 0:
        return
    for l in range(n + 1):
        exact, bound, _ = verify_blowup_exact(pmf, n, s, l)
        assert exact >= bound - 1e-12


@given(st.integers(1, 200), st.integers(0, 60), st.integers(2, 5), st.floats(1e-4, 1.0))
def test_penalty_nonnegative(n, l, y, p_floor):
    if p_floor * l <= y * n * math.e:
        assert penalty_factor_log(n, l, y, p_floor) >= 0
