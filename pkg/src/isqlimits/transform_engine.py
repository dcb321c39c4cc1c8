"""Matrix ODEs for the joint Laplace transform of queue content and chain state.

Entry ``(x, y)`` of every transform is
``E[exp(<s, Z(t)>); X_{N_t} = y | X_0 = x]`` for ``s <= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .distributions import integrated_survival
from .regimes import LimitRegime, as_regime, classify_regime
from .state_space import ModelSpec, _check_s, scaled_transition, subset_product_sum

DEFAULT_STEPS = 2000


class SolverError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ScalingSpec:
    """Arrival rate times ``n^gamma``, switching slowed by ``n^gamma``,
    service times divided by ``n``."""

    n: int
    gamma: float | Fraction

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @property
    def speedup(self) -> float:
        """``n^gamma``."""
        return float(self.n) ** float(self.gamma)


@dataclass(frozen=True, eq=False)
class TransformMatrix:
    values: np.ndarray
    s: np.ndarray
    t: float

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def row_sums(self) -> np.ndarray:
        return self.values.sum(axis=1)


@dataclass(frozen=True, eq=False)
class OdeGrid:
    times: np.ndarray
    solution: np.ndarray
    step_count: int

    @property
    def final(self) -> np.ndarray:
        return self.solution[-1]

    def nearest(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-12 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a grid time")
        return self.solution[i]


def solve_linear_matrix_ode(
    coefficient: Callable[[float], np.ndarray],
    y0: np.ndarray,
    t_max: float,
    steps: int = DEFAULT_STEPS,
    keep_every: int = 1,
) -> OdeGrid:
    """Classical fixed-step RK4 for ``Y' = A(t) Y``, ``Y(0) = y0``.

    ``keep_every`` thins the stored grid (must divide ``steps``); the
    integration itself always uses ``steps`` steps.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if keep_every < 1 or steps % keep_every:
        raise ValueError("keep_every must divide steps")
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    A = _checked(coefficient)
    records = steps // keep_every
    out = np.empty((records + 1,) + np.shape(y0))
    out[0] = y = np.array(y0, dtype=float)
    for j in range(records):
        y = _rk4_segment(A, y, t_max * j / records, t_max * (j + 1) / records, keep_every)
        out[j + 1] = y
    times = t_max * np.arange(records + 1) / records
    return OdeGrid(times, out, steps)


def _checked(coefficient):
    def A(t):
        a = np.asarray(coefficient(t), dtype=float)
        if not np.isfinite(a).all():
            raise SolverError(f"non-finite coefficient at t={t!r}")
        return a

    return A


def _rk4_segment(A, y, a: float, b: float, m: int):
    """``m`` classical RK4 steps from ``a`` to ``b``; two new coefficient
    evaluations per step (the endpoint is reused)."""
    h = (b - a) / m
    a0 = A(a)
    for i in range(m):
        t1 = a + (b - a) * (i + 1) / m
        am = A(t1 - 0.5 * h)
        a1 = A(t1)
        k1 = a0 @ y
        k2 = am @ (y + 0.5 * h * k1)
        k3 = am @ (y + 0.5 * h * k2)
        k4 = a1 @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        a0 = a1
    return y


GRADING_CAP = 12


def grading_exponent(beta) -> int:
    """Integer ``r`` such that ``u = w^r`` makes ``beta u^(beta-1) du``
    smooth in ``w``: the denominator of ``beta`` when it is a small-denominator
    rational (the term becomes polynomial), otherwise 6 (``w^(6 beta - 1)``
    is at least five times differentiable)."""
    b = beta if isinstance(beta, Fraction) else Fraction(float(beta)).limit_denominator(GRADING_CAP)
    if b.denominator <= GRADING_CAP and abs(float(b) - float(beta)) < 1e-12:
        return b.denominator
    return 6


def solve_graded_ode(
    coefficient: Callable[[float], np.ndarray],
    y0: np.ndarray,
    t_max: float,
    steps: int = DEFAULT_STEPS,
    keep_every: int = 1,
    grading: int = 1,
    knots=(),
) -> OdeGrid:
    """RK4 for ``Y' = A(u) Y`` carried out in ``w = u^(1/grading)``.

    Meant for time-changed systems whose coefficients carry fractional
    powers of ``u`` near 0. ``knots`` are extra step boundaries where ``A``
    has a kink. The returned grid is uniform in ``u``, as for
    :func:`solve_linear_matrix_ode`; the internal steps are not.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if keep_every < 1 or steps % keep_every:
        raise ValueError("keep_every must divide steps")
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    if grading < 1:
        raise ValueError("grading must be a positive integer")
    r = int(grading)
    A = _checked(coefficient)
    B = (lambda w: A(w) if r == 1 else r * w ** (r - 1) * A(w**r))
    records = steps // keep_every
    times = t_max * np.arange(records + 1) / records
    cuts = sorted(float(k) for k in knots if 0 < k < t_max)
    out = np.empty((records + 1,) + np.shape(y0))
    out[0] = y = np.array(y0, dtype=float)
    total = 0
    for j in range(records):
        lo, hi = times[j], times[j + 1]
        pts = [lo] + [c for c in cuts if lo < c < hi] + [hi]
        w = np.array(pts) ** (1.0 / r)
        span = w[-1] - w[0]
        for a, b in zip(w[:-1], w[1:]):
            m = max(1, round(keep_every * (b - a) / span)) if span > 0 else keep_every
            y = _rk4_segment(B, y, a, b, m)
            total += m
        out[j + 1] = y
    return OdeGrid(times, out, total)


def _psi_coefficient(model: ModelSpec, s, scaling: ScalingSpec | None):
    s = _check_s(s, model.k)
    G = model.generator()
    e = np.expm1(model.space.states * s[None, :])
    if scaling is None:
        M = model.lam * model.P
        n = 1.0
    else:
        M = model.lam * scaling.speedup * scaled_transition(model.P, scaling.n, scaling.gamma)
        n = float(scaling.n)
    alpha = float(model.alpha)

    def surv(t: float) -> float:
        # scalar form of scaled_survival
        x = n * t
        return 1.0 if x <= 1.0 else x**-alpha

    def coefficient(t: float) -> np.ndarray:
        c = subset_product_sum(e * surv(t))
        return G + M * c[None, :]

    return coefficient


def solve_psi(model: ModelSpec, s, t_max: float = 1.0, steps: int = DEFAULT_STEPS, **kw) -> OdeGrid:
    """``d/dt psi = [lam (P - I) + lam P (pi_tilde(s, t) - I)] psi``, ``psi(s, 0) = I``."""
    coef = _psi_coefficient(model, s, None)
    return solve_linear_matrix_ode(coef, np.eye(model.size), t_max, steps, **kw)


def solve_psi_n(
    model: ModelSpec, scaling: ScalingSpec, s, t_max: float = 1.0, steps: int = DEFAULT_STEPS, **kw
) -> OdeGrid:
    """Rescaled system: rate ``lam n^gamma``, transitions ``P_n``, services ``L/n``."""
    coef = _psi_coefficient(model, s, scaling)
    return solve_linear_matrix_ode(coef, np.eye(model.size), t_max, steps, **kw)


def regime_argument(model: ModelSpec, scaling: ScalingSpec, s, regime) -> np.ndarray:
    """Transform argument fed to the prelimit: ``s`` or, in the fast regime,
    ``s / n^(gamma - alpha)``."""
    s = _check_s(s, model.k)
    if as_regime(regime) is LimitRegime.FAST:
        if classify_regime(scaling.gamma, model.alpha) is not LimitRegime.FAST:
            raise ValueError(
                f"fast-regime normalisation needs gamma > alpha, got gamma={scaling.gamma}, "
                f"alpha={model.alpha}"
            )
        return s / float(scaling.n) ** (float(scaling.gamma) - float(model.alpha))
    return s


def solve_chi_n(
    model: ModelSpec,
    scaling: ScalingSpec,
    s,
    regime,
    t_max: float = 1.0,
    steps: int = DEFAULT_STEPS,
    **kw,
) -> OdeGrid:
    """Prelimit transform in the time-changed clock: value at ``u`` is
    ``psi_n(s*, u^beta)`` with ``s*`` from :func:`regime_argument`."""
    s_star = regime_argument(model, scaling, s, regime)
    beta = float(model.beta)
    inner = _psi_coefficient(model, s_star, scaling)

    def coefficient(u: float) -> np.ndarray:
        return beta * u ** (beta - 1.0) * inner(u**beta)

    # survival of L/n switches at u^beta = 1/n
    kink = float(scaling.n) ** (-1.0 / beta)
    return solve_graded_ode(
        coefficient, np.eye(model.size), t_max, steps, grading=grading_exponent(model.beta), knots=[kink], **kw
    )


def prelimit_transform(
    model: ModelSpec, scaling: ScalingSpec, s, t: float, regime, steps: int = DEFAULT_STEPS
) -> TransformMatrix:
    """Prelimit transform at original time ``t``, integrated on ``[0, t^(1/beta)]``."""
    u = float(t) ** (1.0 / float(model.beta))
    grid = solve_chi_n(model, scaling, s, regime, u, steps, keep_every=steps)
    return TransformMatrix(grid.final, np.asarray(s, dtype=float), float(t))


def single_state_transform(model: ModelSpec, s, t, scaling: ScalingSpec | None = None):
    """Closed form when the chain has one state ``x``: the system is an
    M/G/infinity queue with deterministic batch ``x``, so

    ``psi = exp(lam_n sum_{c>=1} e_c(a) int_0^t P[L > n u]^c du)``

    with ``a_j = e^{s_j x_j} - 1`` and ``e_c`` the elementary symmetric
    polynomials. Vectorised over ``t``.
    """
    if model.size != 1:
        raise ValueError("closed form needs a single-state chain")
    s = _check_s(s, model.k)
    a = np.expm1(model.space.states[0] * s)
    esym = np.zeros(model.k + 1)
    esym[0] = 1.0
    for aj in a:
        esym[1:] = esym[1:] + aj * esym[:-1]
    n = 1 if scaling is None else scaling.n
    rate = model.lam * (1.0 if scaling is None else scaling.speedup)
    t = np.asarray(t, dtype=float)
    expo = sum(esym[c] * integrated_survival(model.alpha, n, t, c) for c in range(1, model.k + 1))
    return np.exp(rate * expo)
