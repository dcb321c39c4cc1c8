import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from isqlimits import ParetoService, integrated_survival, inverse_survival, sample, scaled_survival, survival


def test_survival_examples():
    assert survival(0.5, 0.5) == 1.0
    assert survival(0.5, 4.0) == 0.5
    assert survival(0.5, 1e12) * 1e12**0.5 == pytest.approx(1.0)
    assert survival(0.5, 1.0) == 1.0


@given(st.floats(0.01, 0.99), st.floats(0, 1e8), st.floats(0, 1e8))
def test_survival_monotone_and_tail_bound(alpha, a, b):
    lo, hi = sorted((a, b))
    assert survival(alpha, hi) <= survival(alpha, lo)
    assert lo**alpha * survival(alpha, lo) <= 1 + 1e-12


def test_scaled_survival():
    assert scaled_survival(0.5, 1, 3.0) == survival(0.5, 3.0)
    assert scaled_survival(0.5, 100, 0.25) == pytest.approx(0.2)
    assert scaled_survival(0.5, 100, 0.0) == 1.0


@given(st.floats(0.01, 0.99), st.integers(1, 10**6), st.floats(0, 10))
def test_scaled_is_survival_at_nt(alpha, n, t):
    assert scaled_survival(alpha, n, t) == survival(alpha, n * t)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("v", [0.3, 1.0, 2.5])
def test_tail_asymptotics(alpha, v):
    beta = 1 / (1 - alpha)
    n = 10**6
    assert n**alpha * scaled_survival(alpha, n, v**beta) == pytest.approx(v ** (-alpha * beta), rel=1e-6)


@pytest.mark.parametrize("alpha,n,power", [(0.5, 1, 1), (0.5, 37, 1), (0.3, 10, 2), (0.5, 10, 2), (0.8, 5, 3)])
def test_integrated_survival_quadrature(alpha, n, power):
    for t in (0.0, 0.01, 0.5, 1.0):
        ref, _ = integrate.quad(lambda u: survival(alpha, n * u) ** power, 0, t, points=[1 / n] if 1 / n < t else None)
        assert integrated_survival(alpha, n, t, power) == pytest.approx(ref, rel=1e-9, abs=1e-15)


def test_sample_examples():
    assert inverse_survival(0.5, 1.0) == 1.0
    assert inverse_survival(0.5, 0.25) == 16.0
    x = sample(0.5, np.random.default_rng(1), 10**6)
    assert (x >= 1).all()
    assert np.median(x) == pytest.approx(2 ** (1 / 0.5), rel=0.02)


def test_sample_ks():
    svc = ParetoService(0.6)
    x = svc.sample(np.random.default_rng(7), 10**5)
    res = stats.kstest(x, svc.cdf)
    assert res.statistic <= 0.01


def test_service_validation():
    with pytest.raises(ValueError):
        ParetoService(1.0)
