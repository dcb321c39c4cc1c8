"""Path-level simulation of the rescaled queue ``Z^(n)(t)``.

Arrivals: Poisson with rate ``lam n^gamma``. At arrival ``i`` the batch
chain moves one step with ``P_n`` and queue ``j`` receives ``X_ij``
customers sharing service time ``L_ij / n``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import inverse_survival
from .limit_laws import limit_transform
from .montecarlo import (
    CHUNK_SIZE,
    EmpiricalTransform,
    cumulative_rows,
    estimate_transform,
    markov_step,
)
from .regimes import LimitRegime, classify_regime
from .state_space import ModelSpec, _check_s, scaled_transition
from .transform_engine import DEFAULT_STEPS, ScalingSpec, prelimit_transform, regime_argument


@dataclass(frozen=True, eq=False)
class PathSample:
    """One realisation on ``[0, t]``; states are indices into the model's space."""

    t: float
    initial_state: int
    epochs: np.ndarray
    batch_states: np.ndarray
    service_times: np.ndarray  # already divided by n; shape (arrivals, k)
    queue: np.ndarray
    terminal_state: int

    @property
    def arrivals(self) -> int:
        return self.epochs.size

    def recompute_queue(self, model: ModelSpec) -> np.ndarray:
        alive = (self.epochs[:, None] <= self.t) & (self.t < self.epochs[:, None] + self.service_times)
        batches = model.space.states[self.batch_states]
        return (batches * alive).sum(axis=0).astype(np.int64)


def _state_index(model: ModelSpec, state) -> int:
    if isinstance(state, (int, np.integer)):
        if not 0 <= state < model.size:
            raise IndexError(f"state index {state} outside 0..{model.size - 1}")
        return int(state)
    return model.space.index(state)


def simulate_path(model: ModelSpec, scaling: ScalingSpec, t: float, x0, rng: np.random.Generator) -> PathSample:
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    start = _state_index(model, x0)
    N = int(rng.poisson(model.lam * scaling.speedup * t))
    epochs = np.sort(t * (1.0 - rng.random(N)))  # (0, t]
    cum = cumulative_rows(scaled_transition(model.P, scaling.n, scaling.gamma))
    states = np.empty(N, dtype=np.int64)
    cur = np.array([start])
    for i in range(N):
        cur = markov_step(cum, cur, rng.random(1))
        states[i] = cur[0]
    service = inverse_survival(model.alpha, 1.0 - rng.random((N, model.k))) / scaling.n
    service = np.asarray(service, dtype=float).reshape(N, model.k)
    alive = (epochs[:, None] <= t) & (t < epochs[:, None] + service)
    queue = (model.space.states[states] * alive).sum(axis=0).astype(np.int64)
    terminal = int(states[-1]) if N else start
    return PathSample(float(t), start, epochs, states, service, queue, terminal)


def _queue_batch(model: ModelSpec, scaling: ScalingSpec, t: float, start: int, m: int, rng):
    """Terminal queue vectors ``(m, k)`` and chain states for ``m`` paths."""
    k = model.k
    N = rng.poisson(model.lam * scaling.speedup * t, m)
    total = int(N.sum())
    trial = np.repeat(np.arange(m), N)
    epochs = t * (1.0 - rng.random(total))  # (0, t]
    epochs = epochs[np.lexsort((epochs, trial))]
    starts = np.concatenate(([0], np.cumsum(N)[:-1]))

    cum = cumulative_rows(scaled_transition(model.P, scaling.n, scaling.gamma))
    states = np.empty(total, dtype=np.int64)
    cur = np.full(m, start, dtype=np.int64)
    for r in range(int(N.max(initial=0))):
        act = np.flatnonzero(N > r)
        cur[act] = markov_step(cum, cur[act], rng.random(act.size))
        states[starts[act] + r] = cur[act]

    # alive iff L/n > t - T  <=>  U^(-1/alpha) > n (t - T)
    service = inverse_survival(model.alpha, 1.0 - rng.random((total, k)))
    alive = service > scaling.n * (t - epochs)[:, None]
    batches = model.space.states[states]
    Z = np.zeros((m, k))
    for j in range(k):
        Z[:, j] = np.bincount(trial, weights=batches[:, j] * alive[:, j], minlength=m)
    return Z, cur


def empirical_transform(
    model: ModelSpec,
    scaling: ScalingSpec,
    s,
    t: float,
    trials: int,
    seed: int,
    rescale_s: bool = False,
    workers: int | None = None,
    chunk: int = CHUNK_SIZE,
) -> EmpiricalTransform:
    """Monte Carlo estimate of ``psi_n(s*, t)``; ``trials`` paths per start state.

    ``rescale_s`` uses ``s* = s / n^(gamma - alpha)`` (fast regime only).
    """
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    regime = LimitRegime.FAST if rescale_s else LimitRegime.SLOW
    s_star = regime_argument(model, scaling, s, regime)

    def sampler(row, m, rng):
        Z, term = _queue_batch(model, scaling, t, row, m, rng)
        return np.exp(Z @ s_star), term

    return estimate_transform(
        sampler, model.size, trials, seed, "empirical_transform", s, t, workers, chunk, scaling=scaling
    )


@dataclass(frozen=True)
class SweepRow:
    regime: str
    n: int
    t: float
    s_id: int
    sup_distance: float
    method: str


def regime_sweep(
    model: ModelSpec,
    gamma,
    s,
    t: float | Sequence[float],
    n_ladder: Sequence[int],
    trials: int = 0,
    seed: int = 0,
    steps: int = DEFAULT_STEPS,
    s_id: int = 0,
    workers: int | None = None,
) -> list[SweepRow]:
    """Sup-entry distance from the prelimit transform to the regime's limit.

    Method ``ode`` uses the time-changed prelimit ODE. With ``trials > 0`` an
    ``mc`` row per ``n`` compares the simulated transform with the limit.
    """
    if list(n_ladder) != sorted(set(n_ladder)):
        raise ValueError("n_ladder must be strictly increasing")
    _check_s(s, model.k)
    regime = classify_regime(gamma, model.alpha)
    times = [float(t)] if np.isscalar(t) else [float(v) for v in t]
    rows = []
    for tv in times:
        limit = limit_transform(model, regime, s, tv, steps).values
        for n in n_ladder:
            scaling = ScalingSpec(n, gamma)
            pre = prelimit_transform(model, scaling, s, tv, regime, steps).values
            rows.append(SweepRow(regime.value, int(n), tv, s_id, float(np.abs(pre - limit).max()), "ode"))
            if trials > 0:
                emp = empirical_transform(
                    model, scaling, s, tv, trials, seed, rescale_s=regime is LimitRegime.FAST, workers=workers
                )
                rows.append(
                    SweepRow(regime.value, int(n), tv, s_id, float(np.abs(emp.estimate - limit).max()), "mc")
                )
    return rows


__all__ = [
    "PathSample",
    "simulate_path",
    "empirical_transform",
    "SweepRow",
    "regime_sweep",
]
