import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from isqlimits import (
    LimitRegime,
    ModelSpec,
    StepFunction,
    campbell_check,
    classify_regime,
    equilibrium_limit_lt,
    equilibrium_limit_mc,
    fast_limit_grid,
    fast_limit_lt,
    fast_limit_mc,
    fast_limit_reversed,
    limit_mc,
    limit_transform,
    sample_chain_beta,
    slow_limit_lt,
    stationary_distribution,
)
from isqlimits.verify import random_transition_matrix


def test_classify_regime():
    assert classify_regime(0.25, 0.5) is LimitRegime.SLOW
    assert classify_regime(0.5, 0.5) is LimitRegime.EQUILIBRIUM
    assert classify_regime(0.75, 0.5) is LimitRegime.FAST
    assert str(LimitRegime.FAST) == "fast"


def test_slow_limit(two_state, one_state):
    assert np.array_equal(slow_limit_lt(two_state, 0.0).values, np.eye(2))
    for t in (0.2, 1.0):
        assert slow_limit_lt(one_state, t).values[0, 0] == 1.0
        assert np.allclose(slow_limit_lt(two_state, t).row_sums(), 1.0, atol=1e-12)
    a = limit_transform(two_state, "slow", [-1.0], 0.6).values
    b = limit_transform(two_state, "slow", [-0.1], 0.6).values
    assert np.array_equal(a, b)


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0])
def test_limits_at_zero_s(four_state, t):
    ref = expm(t * four_state.generator())
    for lt in (fast_limit_lt, equilibrium_limit_lt):
        Y = lt(four_state, [0.0, 0.0], t).values
        assert np.abs(Y - ref).max() <= 1e-8
        assert np.abs(Y.sum(axis=1) - 1).max() <= 1e-8
    assert np.abs(slow_limit_lt(four_state, t).values - ref).max() <= 1e-8


@pytest.mark.parametrize("s", [-0.3, -1.0, -2.5])
@pytest.mark.parametrize("t", [0.1, 0.7, 1.0])
def test_one_state_closed_forms(one_state, s, t):
    beta = float(one_state.beta)
    u = t ** (1 / beta)
    assert fast_limit_lt(one_state, [s], t).values[0, 0] == pytest.approx(np.exp(beta * s * u), rel=1e-8)
    assert equilibrium_limit_lt(one_state, [s], t).values[0, 0] == pytest.approx(
        np.exp(beta * np.expm1(s) * u), rel=1e-8
    )


def test_limits_at_time_zero(two_state):
    for regime in LimitRegime:
        assert np.array_equal(limit_transform(two_state, regime, [-1.0], 0.0).values, np.eye(2))


def test_equilibrium_entries_in_unit_interval(four_state):
    Y = equilibrium_limit_lt(four_state, [-1.0, -0.5], 0.8).values
    assert (Y > 0).all() and (Y <= 1).all()


def test_reversed_chain_identity(four_state):
    s = [-0.7, -1.2]
    a = fast_limit_grid(four_state, s, 1.0, 2000, keep_every=100).solution
    b = fast_limit_reversed(four_state, s, 1.0, 2000, keep_every=100).solution
    assert np.abs(a - b).max() <= 1e-8


def test_chain_path_constant_when_p_identity():
    model = ModelSpec(1, 1, 1.0, np.eye(2) * 0.999999 + 0.000001 * np.array([[0, 1], [1, 0]]), 0.5)
    still = ModelSpec(1, 1, 1.0, [[1.0]], 0.5, support=[(1,)])
    path = sample_chain_beta(still, 0.0, (1,), np.random.default_rng(0))
    assert path.jump_times.size == 0 and path.final_state == 0
    assert path.occupation(still)[0] == 1.0
    path = sample_chain_beta(model, 0.2, 1, np.random.default_rng(0))
    assert path.start_state == 1


def test_chain_path_structure(four_state):
    rng = np.random.default_rng(3)
    for _ in range(50):
        path = sample_chain_beta(four_state, 0.3, (0, 1), rng)
        assert (np.diff(path.jump_times) > 0).all()
        assert (path.jump_times > 0.3).all() and (path.jump_times < 1).all()
        assert (path.states[1:] != path.states[:-1]).all()
        soj = path.sojourns()
        assert soj.sum() == pytest.approx(0.7)
        occ = path.occupation(four_state)
        manual = sum(l * four_state.space.states[x] for l, x in zip(soj, path.states))
        assert np.allclose(occ, manual, rtol=0, atol=1e-15)


def test_beta_one_recovers_homogeneous_chain(two_state):
    # number of jumps on [0, 1] of the homogeneous chain: P(no jump from 0) = exp(-lam * 0.7)
    rng = np.random.default_rng(8)
    m = 20000
    stay = sum(sample_chain_beta(two_state, 0.0, 0, rng, beta=1.0).jump_times.size == 0 for _ in range(m))
    p = np.exp(-0.7)
    assert abs(stay / m - p) <= 4 * np.sqrt(p * (1 - p) / m)


def test_occupation_matches_transform_derivative(two_state):
    t = 0.6
    beta = float(two_state.beta)
    a = 1 - t ** (1 / beta)
    pi = stationary_distribution(two_state.P).pi
    rng = np.random.default_rng(21)
    m = 100_000
    starts = rng.choice(2, size=m, p=pi)
    occ = np.array([sample_chain_beta(two_state, a, int(x), rng).occupation(two_state)[0] for x in starts])
    h = 1e-4
    d = (fast_limit_lt(two_state, [0.0], t).values - fast_limit_lt(two_state, [-h], t).values) / h
    # one-sided difference at the boundary s = 0, accurate to O(h)
    target = pi @ d @ np.ones(2) / (beta * two_state.lam)
    se = occ.std(ddof=1) / np.sqrt(m)
    assert abs(occ.mean() - target) <= 4 * se + 1e-4


def test_fast_mc_partitions_rows(four_state):
    est = fast_limit_mc(four_state, [0.0, 0.0], 0.7, 5000, seed=1)
    assert np.allclose(est.estimate.sum(axis=1), 1.0, rtol=0, atol=1e-12)


def test_fast_mc_one_state(one_state):
    est = fast_limit_mc(one_state, [-1.0], 0.5, 2000, seed=2)
    beta = float(one_state.beta)
    assert est.estimate[0, 0] == pytest.approx(np.exp(-beta * 0.5 ** (1 / beta)), abs=1e-12)
    assert est.within(np.array([[np.exp(-beta * 0.5 ** (1 / beta))]])).all()


def test_mc_against_odes(two_state):
    for t in (0.3, 1.0):
        f = fast_limit_mc(two_state, [-1.0], t, 100_000, seed=4)
        assert f.within(fast_limit_lt(two_state, [-1.0], t).values).all()
        e = equilibrium_limit_mc(two_state, [-1.0], t, 100_000, seed=4)
        assert e.within(equilibrium_limit_lt(two_state, [-1.0], t).values).all()


def test_equilibrium_mc_edge_cases(one_state, two_state):
    assert np.array_equal(equilibrium_limit_mc(two_state, [-1.0], 0.0, 100, seed=0).estimate, np.eye(2))
    est = equilibrium_limit_mc(one_state, [-1.3], 0.8, 100_000, seed=5)
    beta = float(one_state.beta)
    assert est.within(np.array([[np.exp(beta * np.expm1(-1.3) * 0.8 ** (1 / beta))]])).all()


def test_mc_argument_errors(two_state):
    with pytest.raises(ValueError):
        fast_limit_mc(two_state, [-1.0], 0.5, 0, seed=0)
    with pytest.raises(ValueError):
        equilibrium_limit_mc(two_state, [-1.0], 0.5, 0, seed=0)
    with pytest.raises(ValueError, match="slow"):
        limit_mc(two_state, "slow", [-1.0], 0.5, 10, 0)


def test_campbell():
    zero = campbell_check(StepFunction.constant(0.0), 3.0, 1000, 1)
    assert zero.estimate == 1.0 and zero.analytic == 1.0
    res = campbell_check(StepFunction.constant(-0.5), 2.0, 100_000, 2)
    assert res.analytic == pytest.approx(np.exp(2.0 * np.expm1(-0.5)))
    assert abs(res.estimate - res.analytic) <= 4 * res.stderr
    f = StepFunction([0.0, 0.4, 1.0], [-1.0, 0.3])
    res = campbell_check(f, 1.5, 100_000, 3)
    assert res.analytic == pytest.approx(np.exp(1.5 * 0.4 * np.expm1(-1.0)) * np.exp(1.5 * 0.6 * np.expm1(0.3)))
    assert abs(res.estimate - res.analytic) <= 4 * res.stderr


def test_step_function():
    f = StepFunction([0.0, 0.5, 1.0], [1.0, 2.0])
    assert f(0.0) == 1.0 and f(0.5) == 2.0 and f(0.999) == 2.0
    with pytest.raises(ValueError):
        StepFunction([0.0, 0.5, 0.4], [1.0, 2.0])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.95), st.floats(0.0, 1.0))
def test_regimes_agree_at_zero_s(seed, alpha, t):
    rng = np.random.default_rng(seed)
    model = ModelSpec(1, 2, float(rng.uniform(0.2, 3)), random_transition_matrix(3, rng), alpha)
    ref = expm(t * model.generator())
    for regime in LimitRegime:
        assert np.abs(limit_transform(model, regime, [0.0], t).values - ref).max() <= 1e-8
