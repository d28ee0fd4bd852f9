import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noisytai._validation import ValidationError
from noisytai.probcore import (
    CondPmf,
    JointPmf,
    Pmf,
    binary_convolution,
    binary_entropy,
    binary_entropy_inverse,
    compose,
    condition,
    conditional_mutual_information,
    entropy,
    kl_divergence,
    marginals,
    mutual_information,
    product,
    total_variation,
)

from conftest import dsbs, joint_pmfs, simplex_arrays

LN2 = math.log(2)


def h_loop(ps):
    return -sum(p * math.log(p) for p in ps if p > 0)


def mi_loop(j):
    j = np.asarray(j)
    pa, pb = j.sum(axis=1), j.sum(axis=0)
    return sum(j[a, b] * (math.log(j[a, b]) - math.log(pa[a]) - math.log(pb[b]))
               for a in range(j.shape[0]) for b in range(j.shape[1]) if j[a, b] > 0)


def cmi_loop(t):
    # I(A;B|C) = H(A,C) + H(B,C) - H(C) - H(A,B,C)
    return (h_loop(t.sum(axis=1).ravel()) + h_loop(t.sum(axis=0).ravel())
            - h_loop(t.sum(axis=(0, 1))) - h_loop(t.ravel()))


# examples


def test_entropy_examples():
    assert entropy(Pmf([0.5, 0.5])) == pytest.approx(LN2, abs=1e-12)
    assert entropy(Pmf([1.0, 0.0])) == 0.0
    assert entropy(Pmf([0.1, 0.9])) == pytest.approx(-0.1 * math.log(0.1) - 0.9 * math.log(0.9), abs=1e-12)
    assert entropy(Pmf([0.1, 0.9])) == pytest.approx(0.325083, abs=1e-6)


def test_mutual_information_examples():
    assert mutual_information(product([0.3, 0.7], [0.2, 0.8])) == pytest.approx(0.0, abs=1e-15)
    assert mutual_information(JointPmf([[0.5, 0.0], [0.0, 0.5]])) == pytest.approx(LN2, abs=1e-12)
    expected = LN2 - h_loop([0.1, 0.9])
    assert mutual_information(JointPmf(dsbs(0.1))) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.368064, abs=1e-6)


def test_kl_examples():
    p = Pmf([0.2, 0.8])
    assert kl_divergence(p, p) == 0.0
    assert kl_divergence(Pmf([1.0, 0.0]), Pmf([0.5, 0.5])) == pytest.approx(LN2, abs=1e-15)
    assert kl_divergence(Pmf([0.5, 0.5]), Pmf([1.0, 0.0])) == math.inf
    with pytest.raises(ValidationError):
        kl_divergence(Pmf([0.5, 0.5]), Pmf([0.2, 0.3, 0.5]))


def test_cmi_examples():
    src = JointPmf([[0.3, 0.1], [0.2, 0.4]])
    triple = compose(src, CondPmf([[0.6, 0.3, 0.1], [0.2, 0.2, 0.6]]))  # (U, V, W)
    assert conditional_mutual_information(triple, given=0) == pytest.approx(0.0, abs=1e-15)

    # A, B uniform independent bits, C = A xor B
    t = np.zeros((2, 2, 2))
    for a, b in itertools.product(range(2), repeat=2):
        t[a, b, a ^ b] = 0.25
    assert conditional_mutual_information(t) == pytest.approx(LN2, abs=1e-12)

    j = np.array([[0.1, 0.2], [0.3, 0.4]])
    const_c = np.zeros((2, 2, 3))
    const_c[:, :, 1] = j
    assert conditional_mutual_information(const_c) == pytest.approx(mutual_information(j), abs=1e-15)


def test_total_variation_examples():
    assert total_variation(Pmf([0.2, 0.8]), Pmf([0.2, 0.8])) == 0.0
    assert total_variation(Pmf([1.0, 0.0]), Pmf([0.0, 1.0])) == 1.0
    assert total_variation(Pmf([0.5, 0.5]), Pmf([0.9, 0.1])) == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(ValidationError):
        total_variation([0.5, 0.5], [1.0, 0.0, 0.0])


def test_compose_examples():
    src = JointPmf(dsbs(0.1))
    ident = compose(src, CondPmf.identity(2))
    assert np.all(ident[0, :, 1] == 0) and np.all(ident[1, :, 0] == 0)

    const = compose(src, CondPmf.constant(2, 3))
    assert mutual_information(const.sum(axis=0)) == 0.0
    assert mutual_information(const.sum(axis=1)) == 0.0

    t = compose(src, CondPmf([[0.8, 0.2], [0.2, 0.8]]))
    assert mutual_information(t.sum(axis=1)) == pytest.approx(LN2 - binary_entropy(0.2), abs=1e-12)
    crossed = 0.2 * 0.9 + 0.8 * 0.1
    assert mutual_information(t.sum(axis=0)) == pytest.approx(LN2 - h_loop([crossed, 1 - crossed]), abs=1e-12)

    with pytest.raises(ValidationError):
        compose(src, CondPmf.identity(3))


def test_marginals_condition_product():
    pr = product([0.3, 0.7], [0.5, 0.5])
    np.testing.assert_allclose(pr.probs, [[0.15, 0.15], [0.35, 0.35]], atol=1e-15)
    pu, pv = marginals(pr)
    np.testing.assert_allclose(pu.probs, [0.3, 0.7])
    np.testing.assert_allclose(pv.probs, [0.5, 0.5])
    ident = JointPmf([[0.5, 0.0], [0.0, 0.5]])
    np.testing.assert_array_equal(condition(ident, 1).probs, [0.0, 1.0])
    with pytest.raises(ValidationError):
        condition(JointPmf([[1.0, 0.0], [0.0, 0.0]]), 1)


def test_validation():
    with pytest.raises(ValidationError):
        Pmf([0.5, 0.6])
    with pytest.raises(ValidationError):
        Pmf([1.2, -0.2])
    with pytest.raises(ValidationError):
        Pmf([np.nan, 1.0])
    assert Pmf.from_weights([1, 3]).probs.tolist() == [0.25, 0.75]
    # zero-probability symbols stay in the alphabet
    assert Pmf([0.0, 1.0, 0.0]).size == 3
    with pytest.raises(ValidationError):
        CondPmf([[0.5, 0.5], [0.7, 0.7]])
    p = Pmf([0.5, 0.5])
    with pytest.raises(ValueError):
        p.probs[0] = 1.0


def test_binary_helpers():
    for p in (0.0, 0.05, 0.11, 0.3):
        assert binary_entropy_inverse(binary_entropy(p)) == pytest.approx(p, abs=1e-9)
    # h is flat at 1/2, so the inverse is only accurate to about sqrt(machine eps)
    assert binary_entropy_inverse(LN2) == pytest.approx(0.5, abs=1e-7)
    assert binary_entropy(binary_entropy_inverse(0.5)) == pytest.approx(0.5, abs=1e-14)
    assert binary_convolution(0.1, 0.2) == pytest.approx(0.26)


# properties


@given(simplex_arrays((5,)))
def test_entropy_matches_loop(p):
    assert entropy(p) == pytest.approx(h_loop(p), abs=1e-12)
    assert 0 <= entropy(p) <= math.log(5) + 1e-12


@given(joint_pmfs())
def test_mi_nonnegative_and_matches_loop(j):
    val = mutual_information(j)
    assert val >= 0
    assert val == pytest.approx(mi_loop(j), abs=1e-12)


@given(simplex_arrays((2, 3, 2)))
def test_cmi_nonnegative_and_matches_loop(t):
    val = conditional_mutual_information(t)
    assert val >= 0
    assert val == pytest.approx(max(cmi_loop(t), 0.0), abs=1e-12)


@given(simplex_arrays((4,)), simplex_arrays((4,), min_mass=0.01))
def test_kl_nonnegative_and_pinsker(p, q):
    d = kl_divergence(p, q)
    assert d >= 0
    assert total_variation(p, q) <= math.sqrt(d / 2) + 1e-12


@given(joint_pmfs(), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_data_processing(j, w, seed):
    gen = np.random.default_rng(seed)
    t = compose(JointPmf(j), CondPmf(gen.dirichlet(np.ones(w), size=j.shape[0])))
    i_vw = mutual_information(t.sum(axis=0))
    i_uw = mutual_information(t.sum(axis=1))
    assert i_vw <= i_uw + 1e-12
    assert i_vw <= mutual_information(j) + 1e-12


@given(simplex_arrays((3, 2, 2)))
def test_chain_rule(t):
    # I(A,B;C) = I(A;C) + I(B;C|A)
    i_ab_c = mutual_information(t.reshape(6, 2))
    i_a_c = mutual_information(t.sum(axis=1))
    i_b_c_given_a = conditional_mutual_information(t, given=0)
    assert i_ab_c == pytest.approx(i_a_c + i_b_c_given_a, abs=1e-9)


@given(joint_pmfs(), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_compose_marginalises_back(j, w, seed):
    gen = np.random.default_rng(seed)
    aux = CondPmf(gen.dirichlet(np.ones(w), size=j.shape[0]))
    t = compose(JointPmf(j), aux)
    np.testing.assert_allclose(t.sum(axis=2), j, atol=1e-15)
