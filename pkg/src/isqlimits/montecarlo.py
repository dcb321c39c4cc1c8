"""Reproducible Monte Carlo plumbing.

Trials are cut into fixed-size chunks. Each chunk draws from its own Philox
stream keyed by ``(seed, estimator tag, row, chunk index)`` and returns
sufficient statistics ``(sum w, sum w^2)``, which are merged in chunk
order. The output therefore depends on the seed and the trial count only,
never on how many workers ran the chunks.
"""
from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

CHUNK_SIZE = 8192
WORKERS_ENV = "ISQLIMITS_WORKERS"


def tag(name: str) -> int:
    return zlib.crc32(name.encode())


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def chunk_sizes(trials: int, chunk: int = CHUNK_SIZE) -> list[int]:
    full, rest = divmod(trials, chunk)
    return [chunk] * full + ([rest] if rest else [])


@dataclass(frozen=True, eq=False)
class EmpiricalTransform:
    """Entrywise Monte Carlo mean and standard error of
    ``w * 1[terminal = y]`` per start row."""

    estimate: np.ndarray
    stderr: np.ndarray
    trials: int
    s: np.ndarray
    t: float
    scaling: object = None

    def zscores(self, reference: np.ndarray) -> np.ndarray:
        diff = np.abs(self.estimate - np.asarray(reference, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.stderr > 0, diff / self.stderr, np.where(diff > 1e-12, np.inf, 0.0))
        return z

    def within(self, reference: np.ndarray, n_se: float = 4.0) -> np.ndarray:
        return self.zscores(reference) <= n_se


# sampler(row, size, rng) -> (weights, terminal state indices)
Sampler = Callable[[int, int, np.random.Generator], tuple[np.ndarray, np.ndarray]]


def estimate_transform(
    sampler: Sampler,
    n_states: int,
    trials: int,
    seed: int,
    estimator: str,
    s,
    t: float,
    workers: int | None = None,
    chunk: int = CHUNK_SIZE,
    rows: Sequence[int] | None = None,
    scaling=None,
) -> EmpiricalTransform:
    if trials < 1:
        raise ValueError("need at least one trial")
    rows = range(n_states) if rows is None else rows
    key = tag(estimator)
    tasks = [(r, c, m) for r in rows for c, m in enumerate(chunk_sizes(trials, chunk))]

    def run(task):
        r, c, m = task
        w, y = sampler(r, m, stream(seed, key, r, c))
        s1 = np.bincount(y, weights=w, minlength=n_states)
        s2 = np.bincount(y, weights=w * w, minlength=n_states)
        return r, s1, s2

    n_workers = worker_count(workers)
    if n_workers == 1:
        results = list(map(run, tasks))
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run, tasks))

    sum1 = np.zeros((n_states, n_states))
    sum2 = np.zeros((n_states, n_states))
    for r, s1, s2 in results:
        sum1[r] += s1
        sum2[r] += s2
    mean = sum1 / trials
    if trials > 1:
        var = np.clip((sum2 - trials * mean**2) / (trials - 1), 0.0, None)
        se = np.sqrt(var / trials)
    else:
        se = np.full_like(mean, np.inf)
    return EmpiricalTransform(mean, se, trials, np.asarray(s, dtype=float), float(t), scaling)


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
    return mean, se


def cumulative_rows(P: np.ndarray) -> np.ndarray:
    cum = np.cumsum(np.asarray(P, dtype=float), axis=1)
    cum[:, -1] = 1.0
    return cum


def markov_step(cum: np.ndarray, current: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Next states for ``current`` given uniforms ``u`` in [0, 1)."""
    return (u[:, None] >= cum[current]).sum(axis=1)
