import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isqlimits.montecarlo import (
    EmpiricalTransform,
    chunk_sizes,
    cumulative_rows,
    estimate_transform,
    markov_step,
    stream,
    worker_count,
)


def _sampler(row, m, rng):
    return rng.random(m), rng.integers(0, 3, m)


@given(st.integers(1, 50_000), st.integers(1, 10_000))
def test_chunks_cover_trials(trials, chunk):
    sizes = chunk_sizes(trials, chunk)
    assert sum(sizes) == trials and all(0 < c <= chunk for c in sizes)


def test_streams_are_keyed():
    a = stream(1, 2, 3).random(4)
    assert np.array_equal(a, stream(1, 2, 3).random(4))
    assert not np.array_equal(a, stream(1, 2, 4).random(4))
    assert not np.array_equal(a, stream(2, 2, 3).random(4))
    stream(2**64 - 1, 0).random()


def test_worker_invariance():
    runs = [estimate_transform(_sampler, 3, 30_000, 7, "t", [0.0], 0.5, workers=w, chunk=4096) for w in (1, 2, 8)]
    for r in runs[1:]:
        assert r.estimate.tobytes() == runs[0].estimate.tobytes()
        assert r.stderr.tobytes() == runs[0].stderr.tobytes()


def test_worker_env(monkeypatch):
    monkeypatch.setenv("ISQLIMITS_WORKERS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2
    with pytest.raises(ValueError):
        worker_count(0)


def test_estimator_moments():
    est = estimate_transform(_sampler, 3, 40_000, 1, "m", [0.0], 0.5, rows=[1])
    # weights ~ U(0,1), terminal uniform on 3 states
    assert est.estimate[1] == pytest.approx([1 / 6] * 3, abs=0.01)
    assert est.stderr[1] == pytest.approx([np.sqrt((1 / 9 - 1 / 36) / 40_000)] * 3, rel=0.05)
    assert np.array_equal(est.estimate[0], [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        estimate_transform(_sampler, 3, 0, 1, "m", [0.0], 0.5)


def test_zscores():
    e = EmpiricalTransform(np.array([[1.0, 0.5]]), np.array([[0.0, 0.1]]), 10, np.zeros(1), 0.1)
    z = e.zscores(np.array([[1.0, 0.1]]))
    assert z[0, 0] == 0.0 and z[0, 1] == pytest.approx(4.0)
    assert np.isinf(e.zscores(np.array([[0.9, 0.5]]))[0, 0])


def test_markov_step_follows_rows():
    P = np.array([[0.2, 0.8, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    cum = cumulative_rows(P)
    rng = np.random.default_rng(0)
    nxt = markov_step(cum, np.zeros(100_000, dtype=int), rng.random(100_000))
    assert set(np.unique(nxt)) <= {0, 1}
    assert (nxt == 1).mean() == pytest.approx(0.8, abs=0.01)
    assert (markov_step(cum, np.array([1, 2]), np.array([0.999999, 0.0])) == [2, 0]).all()
