"""Limit transforms for the slow, fast and equilibrium regimes.

Each limit is available two ways: as the solution of a matrix ODE in the
time-changed clock ``u = t^(1/beta)``, and as a Monte Carlo average over
paths of the inhomogeneous chain ``X^beta`` (generator
``beta (1 - t)^(beta - 1) lam (P - I)``) and, for equilibrium, independent
Poisson processes of rate ``beta lam``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import expm

from .montecarlo import (
    CHUNK_SIZE,
    EmpiricalTransform,
    chunk_sizes,
    cumulative_rows,
    estimate_transform,
    markov_step,
    stream,
    tag,
)
from .regimes import LimitRegime, as_regime, classify_regime
from .state_space import ModelSpec, _check_s, reversed_transition, stationary_distribution
from .transform_engine import DEFAULT_STEPS, OdeGrid, TransformMatrix, grading_exponent, solve_graded_ode

__all__ = [
    "LimitRegime",
    "classify_regime",
    "slow_limit_lt",
    "fast_limit_lt",
    "equilibrium_limit_lt",
    "limit_transform",
    "fast_limit_grid",
    "equilibrium_limit_grid",
    "fast_limit_reversed",
    "InhomChainPath",
    "sample_chain_beta",
    "fast_limit_mc",
    "equilibrium_limit_mc",
    "limit_mc",
    "StepFunction",
    "CampbellResult",
    "campbell_check",
]


def _reporting_clock(model: ModelSpec, t: float) -> float:
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return float(t) ** (1.0 / float(model.beta))


def fast_potential(model: ModelSpec, s) -> np.ndarray:
    """Diagonal of ``beta lam sum_l s_l Delta_l``."""
    s = _check_s(s, model.k)
    return float(model.beta) * model.lam * (model.space.states @ s)


def equilibrium_potential(model: ModelSpec, s) -> np.ndarray:
    """Diagonal of ``beta lam sum_l (e^{s_l x_l} - 1)``."""
    s = _check_s(s, model.k)
    return float(model.beta) * model.lam * np.expm1(model.space.states * s[None, :]).sum(axis=1)


def _limit_grid(model: ModelSpec, potential: np.ndarray, t_max: float, steps: int, **kw) -> OdeGrid:
    beta = float(model.beta)
    G = model.generator()
    V = np.diag(potential)
    return solve_graded_ode(
        lambda u: beta * u ** (beta - 1.0) * G + V,
        np.eye(model.size),
        t_max,
        steps,
        grading=grading_exponent(model.beta),
        **kw,
    )


def fast_limit_grid(model: ModelSpec, s, t_max: float = 1.0, steps: int = DEFAULT_STEPS, **kw) -> OdeGrid:
    """``chi(s, u)`` on a grid in the time-changed clock."""
    return _limit_grid(model, fast_potential(model, s), t_max, steps, **kw)


def equilibrium_limit_grid(
    model: ModelSpec, s, t_max: float = 1.0, steps: int = DEFAULT_STEPS, **kw
) -> OdeGrid:
    return _limit_grid(model, equilibrium_potential(model, s), t_max, steps, **kw)


def slow_limit_lt(model: ModelSpec, t: float, s=None) -> TransformMatrix:
    """``exp(t lam (P - I))``; the queue limit is the point mass at 0, so ``s``
    plays no role."""
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    s = np.zeros(model.k) if s is None else _check_s(s, model.k)
    return TransformMatrix(expm(float(t) * model.generator()), s, float(t))


def fast_limit_lt(model: ModelSpec, s, t: float, steps: int = DEFAULT_STEPS) -> TransformMatrix:
    """Transform of ``(beta lam int_{1 - t^(1/beta)}^1 X^beta(v) dv, X^beta(1))``
    given ``X^beta(1 - t^(1/beta))``."""
    u = _reporting_clock(model, t)
    grid = fast_limit_grid(model, s, u, steps, keep_every=steps)
    return TransformMatrix(grid.final, np.asarray(s, dtype=float), float(t))


def equilibrium_limit_lt(model: ModelSpec, s, t: float, steps: int = DEFAULT_STEPS) -> TransformMatrix:
    u = _reporting_clock(model, t)
    grid = equilibrium_limit_grid(model, s, u, steps, keep_every=steps)
    return TransformMatrix(grid.final, np.asarray(s, dtype=float), float(t))


def limit_transform(model: ModelSpec, regime, s, t: float, steps: int = DEFAULT_STEPS) -> TransformMatrix:
    regime = as_regime(regime)
    if regime is LimitRegime.SLOW:
        return slow_limit_lt(model, t, s)
    if regime is LimitRegime.FAST:
        return fast_limit_lt(model, s, t, steps)
    return equilibrium_limit_lt(model, s, t, steps)


def fast_limit_reversed(
    model: ModelSpec, s, t_max: float = 1.0, steps: int = DEFAULT_STEPS, **kw
) -> OdeGrid:
    """Fast-limit transform through the reversed chain.

    Solves the right-multiplied system
    ``Y' = Y [beta u^(beta-1) lam (P^(r) - I) + diag(potential)]`` and returns
    ``diag(pi)^-1 Y' diag(pi)`` on the same grid.
    """
    pi = stationary_distribution(model.P).pi
    Pr = reversed_transition(model.P, pi)
    beta = float(model.beta)
    Gr_T = (model.lam * (Pr - np.eye(model.size))).T
    V = np.diag(fast_potential(model, s))
    # Y' = Y B  <=>  (Y')^T = B^T Y^T
    grid = solve_graded_ode(
        lambda u: beta * u ** (beta - 1.0) * Gr_T + V,
        np.eye(model.size),
        t_max,
        steps,
        grading=grading_exponent(model.beta),
        **kw,
    )
    # grid holds Y^T; chi = diag(pi)^-1 Y' diag(pi)
    chi = grid.solution * pi[None, None, :] / pi[None, :, None]
    return OdeGrid(grid.times, chi, grid.step_count)


@dataclass(frozen=True, eq=False)
class InhomChainPath:
    """Piecewise-constant right-continuous path of ``X^beta`` on ``[start_time, 1]``.

    ``states[0]`` is held on ``[start_time, jump_times[0])`` and ``states[i]``
    on ``[jump_times[i-1], jump_times[i])``; the last state is held up to 1.
    States are indices into the model's state space.
    """

    start_time: float
    jump_times: np.ndarray
    states: np.ndarray

    @property
    def start_state(self) -> int:
        return int(self.states[0])

    @property
    def final_state(self) -> int:
        return int(self.states[-1])

    def sojourns(self) -> np.ndarray:
        edges = np.concatenate(([self.start_time], self.jump_times, [1.0]))
        return np.diff(edges)

    def occupation(self, model: ModelSpec) -> np.ndarray:
        """``int_{start}^1 X^beta_j(v) dv`` for each queue ``j``."""
        return self.sojourns() @ model.space.states[self.states].astype(float)


def _chain_segments(P, lam, beta, start_time, start, m, rng):
    """Vectorised paths of ``X^beta`` from ``start`` at ``start_time``.

    A homogeneous chain with generator ``lam (P - I)`` is run by
    uniformisation on the clock ``h(t) = 1 - (1 - t)^beta`` and its event
    clocks are mapped back through ``h^-1(u) = 1 - (1 - u)^(1/beta)``.
    Returns per-segment ``(trial, state, length)`` plus terminal states.
    Self-transitions of the uniformised chain are kept as zero-effect
    segment splits.
    """
    span = (1.0 - start_time) ** beta
    clock0 = 1.0 - span
    N = rng.poisson(lam * span, m)
    total = int(N.sum())
    trial = np.repeat(np.arange(m), N)
    u = rng.random(total)
    u = u[np.lexsort((u, trial))]
    times = 1.0 - (1.0 - (clock0 + span * u)) ** (1.0 / beta)

    base = np.concatenate(([0], np.cumsum(N + 1)[:-1]))
    nseg = total + m
    seg_trial = np.repeat(np.arange(m), N + 1)
    seg_start = np.empty(nseg)
    seg_start[base] = start_time
    seg_start[np.arange(total) + trial + 1] = times
    seg_end = np.empty(nseg)
    seg_end[:-1] = seg_start[1:]
    seg_end[base + N] = 1.0

    seg_state = np.empty(nseg, dtype=np.int64)
    seg_state[base] = start
    cur = np.full(m, start, dtype=np.int64)
    cum = cumulative_rows(P)
    for r in range(1, int(N.max(initial=0)) + 1):
        act = np.flatnonzero(N >= r)
        cur[act] = markov_step(cum, cur[act], rng.random(act.size))
        seg_state[base[act] + r] = cur[act]
    return seg_trial, seg_state, seg_end - seg_start, cur


def _state_index(model: ModelSpec, state) -> int:
    if isinstance(state, (int, np.integer)):
        if not 0 <= state < model.size:
            raise IndexError(f"state index {state} outside 0..{model.size - 1}")
        return int(state)
    return model.space.index(state)


def sample_chain_beta(
    model: ModelSpec, start_time: float, start_state, rng: np.random.Generator, beta: float | None = None
) -> InhomChainPath:
    """One path of ``X^beta`` on ``[start_time, 1]``.

    ``start_state`` is a batch vector or an integer state index. ``beta``
    overrides the model's value (``beta = 1`` gives the homogeneous chain).
    """
    if not 0 <= start_time < 1:
        raise ValueError(f"start_time must lie in [0, 1), got {start_time}")
    beta = float(model.beta) if beta is None else float(beta)
    start = _state_index(model, start_state)
    _, seg_state, seg_len, _ = _chain_segments(model.P, model.lam, beta, start_time, start, 1, rng)
    edges = start_time + np.cumsum(seg_len)[:-1]
    keep = np.flatnonzero(seg_state[1:] != seg_state[:-1])
    return InhomChainPath(float(start_time), edges[keep], np.concatenate(([start], seg_state[1:][keep])))


def _fast_sampler(model: ModelSpec, s, t: float):
    s = _check_s(s, model.k)
    beta = float(model.beta)
    a = 1.0 - _reporting_clock(model, t)
    x = model.space.states.astype(float)
    scale = beta * model.lam

    def sampler(row, m, rng):
        seg_trial, seg_state, seg_len, term = _chain_segments(model.P, model.lam, beta, a, row, m, rng)
        occ = np.bincount(seg_trial, weights=seg_len * (x[seg_state] @ s), minlength=m)
        return np.exp(scale * occ), term

    return sampler


def _equilibrium_sampler(model: ModelSpec, s, t: float):
    s = _check_s(s, model.k)
    beta = float(model.beta)
    a = 1.0 - _reporting_clock(model, t)
    x = model.space.states.astype(float)
    rate = beta * model.lam

    def sampler(row, m, rng):
        seg_trial, seg_state, seg_len, term = _chain_segments(model.P, model.lam, beta, a, row, m, rng)
        # points of nu_j on each sojourn: Poisson(rate * length), independent over j
        counts = rng.poisson(rate * np.repeat(seg_len[:, None], model.k, axis=1))
        z = np.bincount(seg_trial, weights=(x[seg_state] * counts) @ s, minlength=m)
        return np.exp(z), term

    return sampler


def fast_limit_mc(
    model: ModelSpec, s, t: float, trials: int, seed: int, workers: int | None = None, chunk: int = CHUNK_SIZE
) -> EmpiricalTransform:
    """Feynman-Kac estimate of :func:`fast_limit_lt`; ``trials`` paths per start state."""
    return estimate_transform(
        _fast_sampler(model, s, t), model.size, trials, seed, "fast_limit_mc", s, t, workers, chunk
    )


def equilibrium_limit_mc(
    model: ModelSpec, s, t: float, trials: int, seed: int, workers: int | None = None, chunk: int = CHUNK_SIZE
) -> EmpiricalTransform:
    """Estimate of :func:`equilibrium_limit_lt` from ``Z_j = int X_j dnu_j``."""
    return estimate_transform(
        _equilibrium_sampler(model, s, t), model.size, trials, seed, "equilibrium_limit_mc", s, t, workers, chunk
    )


def limit_mc(model: ModelSpec, regime, s, t: float, trials: int, seed: int, workers: int | None = None):
    regime = as_regime(regime)
    if regime is LimitRegime.FAST:
        return fast_limit_mc(model, s, t, trials, seed, workers)
    if regime is LimitRegime.EQUILIBRIUM:
        return equilibrium_limit_mc(model, s, t, trials, seed, workers)
    raise ValueError("no Monte Carlo representation for the slow limit")


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous step function on ``[breaks[0], breaks[-1]]`` taking
    ``values[i]`` on ``[breaks[i], breaks[i+1])``."""

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or v.shape != (b.size - 1,) or not (np.diff(b) > 0).all():
            raise ValueError("need strictly increasing breaks and one value per interval")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, c: float, lo: float = 0.0, hi: float = 1.0) -> "StepFunction":
        return cls([lo, hi], [c])

    def __call__(self, v):
        i = np.searchsorted(self.breaks, v, side="right") - 1
        return self.values[np.clip(i, 0, self.values.size - 1)]


class CampbellResult(NamedTuple):
    estimate: float
    stderr: float
    analytic: float


def campbell_check(f: StepFunction, xi: float, trials: int, seed: int, chunk: int = CHUNK_SIZE) -> CampbellResult:
    """Compare ``E[exp(int f dnu)]`` for a rate-``xi`` Poisson process with
    ``exp(int (e^f - 1) xi dv)``."""
    if not xi > 0:
        raise ValueError("intensity must be positive")
    if trials < 1:
        raise ValueError("need at least one trial")
    lo, hi = f.breaks[0], f.breaks[-1]
    analytic = float(np.exp(xi * np.sum(np.expm1(f.values) * np.diff(f.breaks))))
    key = tag("campbell_check")
    s1 = s2 = 0.0
    for c, m in enumerate(chunk_sizes(trials, chunk)):
        rng = stream(seed, key, 0, c)
        N = rng.poisson(xi * (hi - lo), m)
        pts = lo + (hi - lo) * rng.random(int(N.sum()))
        total = np.bincount(np.repeat(np.arange(m), N), weights=f(pts), minlength=m)
        w = np.exp(total)
        s1 += w.sum()
        s2 += (w * w).sum()
    mean = s1 / trials
    se = float(np.sqrt(max(s2 - trials * mean**2, 0.0) / (trials - 1) / trials)) if trials > 1 else float("inf")
    return CampbellResult(float(mean), se, analytic)
