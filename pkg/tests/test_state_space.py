from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isqlimits import (
    ModelError,
    ModelSpec,
    ReducibleChainError,
    delta_matrix,
    enumerate_states,
    pi_tilde,
    pi_tilde_minus_identity,
    q_tilde,
    reversed_transition,
    scaled_transition,
    stationary_distribution,
)
from isqlimits.verify import random_transition_matrix


def test_enumerate_small_spaces():
    sp = enumerate_states(1, 1)
    assert sp.size == 2
    assert [sp.state(i) for i in range(2)] == [(0,), (1,)]
    sp = enumerate_states(2, 2)
    assert sp.size == 9
    assert sp.state(0) == (0, 0) and sp.state(8) == (2, 2)
    sp = enumerate_states(3, 1)
    assert sp.size == 8
    assert sp.index((1, 0, 1)) == 5


def test_enumerate_cap():
    with pytest.raises(ModelError, match="exceeds cap"):
        enumerate_states(13, 1)
    assert enumerate_states(12, 1).size == 4096


@given(st.integers(1, 4), st.integers(0, 3))
def test_index_round_trip_and_order(k, K):
    sp = enumerate_states(k, K)
    assert sp.size == (K + 1) ** k
    tuples = [sp.state(i) for i in range(sp.size)]
    assert all(a < b for a, b in zip(tuples, tuples[1:]))
    assert all(sp.index(x) == i for i, x in enumerate(tuples))


def test_index_unknown_state():
    with pytest.raises(ModelError):
        enumerate_states(1, 1).index((2,))


def test_delta_matrix():
    assert np.array_equal(delta_matrix(enumerate_states(1, 1), 1), np.diag([0.0, 1.0]))
    assert np.array_equal(np.diag(delta_matrix(enumerate_states(2, 1), 2)), [0, 1, 0, 1])
    sp = enumerate_states(3, 2)
    for i in (1, 2, 3):
        assert np.trace(delta_matrix(sp, i)) == sp.states[:, i - 1].sum()
    with pytest.raises(IndexError):
        delta_matrix(sp, 4)
    with pytest.raises(IndexError):
        delta_matrix(sp, 0)


@given(st.lists(st.floats(-5, 0), min_size=2, max_size=2))
def test_delta_combination_nonpositive(s):
    sp = enumerate_states(2, 2)
    D = sum(si * delta_matrix(sp, i + 1) for i, si in enumerate(s))
    assert np.count_nonzero(D - np.diag(np.diag(D))) == 0
    assert (np.diag(D) <= 0).all()


def test_stationary_examples():
    assert np.allclose(stationary_distribution(np.eye(1)).pi, [1.0])
    assert np.allclose(stationary_distribution([[0, 1], [1, 0]]).pi, [0.5, 0.5])
    assert np.allclose(stationary_distribution([[0.3, 0.7], [0.6, 0.4]]).pi, [6 / 13, 7 / 13], atol=1e-15)


@settings(max_examples=30)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_stationary_balance(m, seed):
    P = random_transition_matrix(m, np.random.default_rng(seed))
    pi = stationary_distribution(P).pi
    assert abs(pi.sum() - 1) <= 1e-12
    assert np.abs(pi @ P - pi).max() <= 1e-10


def test_reducible_rejected_with_states_named():
    P = np.array([[1.0, 0.0], [0.5, 0.5]])
    with pytest.raises(ReducibleChainError, match="reducible"):
        stationary_distribution(P)
    with pytest.raises(ReducibleChainError, match=r"\(1,\)"):
        ModelSpec(1, 1, 1.0, P, 0.5)


def test_model_checks():
    with pytest.raises(ModelError, match="sum to 1"):
        ModelSpec(1, 1, 1.0, [[0.5, 0.4], [0.5, 0.5]], 0.5)
    with pytest.raises(ModelError, match="negative"):
        ModelSpec(1, 1, 1.0, [[1.2, -0.2], [0.5, 0.5]], 0.5)
    with pytest.raises(ModelError, match="shape"):
        ModelSpec(1, 2, 1.0, [[0.5, 0.5], [0.5, 0.5]], 0.5)
    with pytest.raises(ModelError, match="alpha"):
        ModelSpec(1, 1, 1.0, [[0.5, 0.5], [0.5, 0.5]], 1.0)
    with pytest.raises(ModelError, match="lambda"):
        ModelSpec(1, 1, 0.0, [[0.5, 0.5], [0.5, 0.5]], 0.5)
    # row sums within 1e-12 are accepted
    ModelSpec(1, 1, 1.0, [[0.5, 0.5 + 5e-13], [0.5, 0.5]], 0.5)


def test_beta_exact():
    P = [[0.5, 0.5], [0.5, 0.5]]
    assert ModelSpec(1, 1, 1.0, P, Fraction(1, 3)).beta == Fraction(3, 2)
    assert ModelSpec(1, 1, 1.0, P, 0.5).beta == 1 / (1 - 0.5)


def test_support_restriction():
    m = ModelSpec(1, 1, 1.0, [[1.0]], 0.5, support=[(1,)])
    assert m.size == 1 and m.space.state(0) == (1,)
    with pytest.raises(ModelError):
        ModelSpec(1, 1, 1.0, [[1.0]], 0.5, support=[(2,)])


def test_scaled_transition_examples():
    P = np.array([[0.3, 0.7], [0.6, 0.4]])
    assert np.array_equal(scaled_transition(P, 1, 0.7), P)
    assert np.allclose(scaled_transition(np.eye(3), 50, 0.3), np.eye(3))
    assert np.allclose(scaled_transition([[0, 1], [1, 0]], 4, 0.5), [[0.5, 0.5], [0.5, 0.5]])


@given(st.sampled_from([1, 10, 100, 1000]), st.floats(0.05, 1.0), st.integers(0, 2**32 - 1))
def test_scaled_generator_invariant(n, gamma, seed):
    P = random_transition_matrix(4, np.random.default_rng(seed))
    Pn = scaled_transition(P, n, gamma)
    lam = 1.7
    assert np.abs(lam * n**gamma * (Pn - np.eye(4)) - lam * (P - np.eye(4))).max() <= 1e-12


def test_reversed_examples():
    P = np.array([[0.2, 0.8], [0.8, 0.2]])
    assert np.allclose(reversed_transition(P, [0.5, 0.5]), P)
    P = np.array([[0.3, 0.7], [0.6, 0.4]])
    assert np.allclose(reversed_transition(P, [6 / 13, 7 / 13]), P, atol=1e-15)
    with pytest.raises(ModelError, match="zero mass"):
        reversed_transition(P, [1.0, 0.0])


@settings(max_examples=30)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_reversal_involution_preserves_pi(m, seed):
    P = random_transition_matrix(m, np.random.default_rng(seed), min_entry=0.01)
    pi = stationary_distribution(P)
    Pr = reversed_transition(P, pi)
    assert np.allclose(Pr.sum(axis=1), 1.0, atol=1e-12)
    assert np.abs(pi.pi @ Pr - pi.pi).max() <= 1e-10
    assert np.abs(reversed_transition(Pr, pi) - P).max() <= 1e-12


def test_pi_tilde_examples():
    sp = enumerate_states(2, 2)
    assert np.array_equal(pi_tilde(sp, [0.0, 0.0], [0.3, 0.9]), np.eye(9))
    assert np.array_equal(pi_tilde(sp, [-1.0, -2.0], 0.0), np.eye(9))
    one = ModelSpec(1, 1, 1.0, [[1.0]], 0.5, support=[(1,)]).space
    assert pi_tilde(one, [-1.0], 0.5)[0, 0] == pytest.approx((np.exp(-1) - 1) * 0.5 + 1, abs=1e-15)
    assert pi_tilde(one, [-1.0], 0.5)[0, 0] == pytest.approx(0.683939, abs=1e-6)
    with pytest.raises(ModelError, match="<= 0"):
        pi_tilde(sp, [0.1, 0.0], 0.5)


@given(
    st.lists(st.floats(-30, 0), min_size=3, max_size=3),
    st.lists(st.floats(0, 1), min_size=3, max_size=3),
)
def test_pi_tilde_range_and_product_form(s, v):
    sp = enumerate_states(3, 2)
    d = np.diag(pi_tilde(sp, s, v))
    assert ((d > 0) & (d <= 1)).all()
    assert np.allclose(d - 1, pi_tilde_minus_identity(sp, s, v), rtol=0, atol=1e-15)
    prod = np.prod(1 + np.expm1(sp.states * np.array(s)) * np.array(v), axis=1)
    assert np.allclose(d, prod, rtol=1e-12, atol=1e-15)


def test_pi_tilde_minus_identity_no_cancellation():
    # tiny survival values: the difference stays accurate to relative precision
    sp = enumerate_states(2, 1)
    v = 1e-12
    diff = pi_tilde_minus_identity(sp, [-1.0, -1.0], [v, v])
    a = np.expm1(-1.0) * v
    assert diff[3] == pytest.approx(2 * a + a * a, rel=1e-14)


def test_q_tilde():
    sp = enumerate_states(1, 1)
    P = np.array([[0.3, 0.7], [0.6, 0.4]])
    assert np.array_equal(q_tilde(sp, [0.0], 0.4, P), P.T)
    one = ModelSpec(1, 1, 1.0, [[1.0]], 0.5, support=[(1,)]).space
    assert q_tilde(one, [-1.0], 0.5, [[1.0]])[0, 0] == pytest.approx(0.683939, abs=1e-6)
    sp = enumerate_states(2, 1)
    P = random_transition_matrix(4, np.random.default_rng(3))
    Q = q_tilde(sp, [-0.4, -1.3], [0.2, 0.7], P)
    D = pi_tilde(sp, [-0.4, -1.3], [0.2, 0.7])
    assert np.allclose(Q @ np.ones(4), D @ (P.T @ np.ones(4)))
