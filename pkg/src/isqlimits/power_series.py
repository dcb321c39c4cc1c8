"""Power-series solution of the fast-limit ODE for rational tail index.

With ``alpha = 1 - p/q`` the substitution ``u = tau^p`` turns the fast-limit
system into ``Y' = (Q1 tau^a + Q2 tau^(p-1)) Y`` with polynomial
coefficients, solved by ``Y = sum_j U_j tau^j`` where
``j U_j = Q2 U_{j-p} + Q1 U_{j-a-1}``.

Two choices of ``(Q1, a)`` are supported:

``derived``
    ``Q1 = q lam (P - I)``, ``a = q - 1``; what the chain rule gives.
``printed``
    ``Q1 = (p + q) lam (P - I)``, ``a = q``; kept for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .limit_laws import fast_potential
from .state_space import ModelSpec, _check_s
from .transform_engine import TransformMatrix

COEFFICIENT_CAP = 5000
DEFAULT_J = 60
TAIL_THRESHOLD = 1e-12
MODES = ("derived", "printed")


@dataclass(frozen=True)
class RationalTail:
    p: int
    q: int

    def __post_init__(self):
        if not (isinstance(self.p, int) and isinstance(self.q, int)):
            raise TypeError("p and q must be integers")
        if not 0 < self.p < self.q:
            raise ValueError(f"need 0 < p < q, got p={self.p}, q={self.q}")
        if math.gcd(self.p, self.q) != 1:
            raise ValueError(f"p={self.p} and q={self.q} are not coprime")

    @property
    def alpha(self) -> Fraction:
        return 1 - Fraction(self.p, self.q)

    @property
    def beta(self) -> Fraction:
        return Fraction(self.q, self.p)


def rational_tail(p: int, q: int) -> RationalTail:
    return RationalTail(p, q)


@dataclass(frozen=True, eq=False)
class SeriesSolution:
    """Coefficients of ``sum_j U_j tau^j`` with ``tau = t^(1/p)``."""

    coefficients: np.ndarray
    p: int

    @property
    def J(self) -> int:
        return self.coefficients.shape[0] - 1

    @property
    def tail_bound(self) -> float:
        """Largest entry among the last ``p`` retained coefficients."""
        return float(np.abs(self.coefficients[-self.p :]).max())


def series_coefficients(Q1, Q2, p: int, q_exponent: int, J: int) -> SeriesSolution:
    """Coefficients for ``Y' = (Q1 t^a + Q2 t^(p-1)) Y``, ``Y(0) = I``, with
    ``a = q_exponent``."""
    if J < 0:
        raise ValueError("J must be nonnegative")
    if J > COEFFICIENT_CAP:
        raise ValueError(f"J={J} exceeds the coefficient cap {COEFFICIENT_CAP}")
    if p < 1 or q_exponent < 0:
        raise ValueError("need p >= 1 and a nonnegative exponent")
    Q1 = np.atleast_2d(np.asarray(Q1, dtype=float))
    Q2 = np.atleast_2d(np.asarray(Q2, dtype=float))
    m = Q1.shape[0]
    shift = q_exponent + 1
    U = np.zeros((J + 1, m, m))
    U[0] = np.eye(m)
    for j in range(1, J + 1):
        acc = np.zeros((m, m))
        if j >= p:
            acc += Q2 @ U[j - p]
        if j >= shift:
            acc += Q1 @ U[j - shift]
        U[j] = acc / j
    return SeriesSolution(U, p)


def evaluate_series(solution: SeriesSolution, t: float) -> tuple[np.ndarray, float]:
    """Sum ``U_j t^(j/p)`` by Horner's rule in ``t^(1/p)``.

    Returns the matrix and the largest entry of the last retained term.
    """
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    tau = float(t) ** (1.0 / solution.p)
    U = solution.coefficients
    acc = U[-1].copy()
    for j in range(U.shape[0] - 2, -1, -1):
        acc = acc * tau + U[j]
    last = float(np.abs(U[-1]).max()) * tau ** solution.J
    return acc, last


def _fast_matrices(model: ModelSpec, tail: RationalTail, s, mode: str):
    p, q = tail.p, tail.q
    G = model.generator()
    Q2 = p * np.diag(fast_potential(model, s))
    if mode == "derived":
        return q * G, q - 1, Q2
    if mode == "printed":
        return (p + q) * G, q, Q2
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def fast_series(model: ModelSpec, tail: RationalTail, s, J: int | None = None, mode: str = "derived") -> SeriesSolution:
    """Series for the fast-limit ``chi(s, u)`` in the time-changed clock.

    With ``J=None`` the order starts at 60 and doubles until the tail
    indicator drops below 1e-12 (or the cap is reached).
    """
    if not math.isclose(float(model.alpha), float(tail.alpha), rel_tol=1e-12, abs_tol=0.0):
        raise ValueError(f"model alpha {model.alpha} does not match tail alpha {tail.alpha}")
    s = _check_s(s, model.k)
    Q1, a, Q2 = _fast_matrices(model, tail, s, mode)
    if J is not None:
        return series_coefficients(Q1, Q2, tail.p, a, J)
    J = DEFAULT_J
    while True:
        sol = series_coefficients(Q1, Q2, tail.p, a, J)
        if sol.tail_bound < TAIL_THRESHOLD or 2 * J > COEFFICIENT_CAP:
            return sol
        J *= 2


def fast_series_transform(
    model: ModelSpec, tail: RationalTail, s, t: float, J: int | None = None, mode: str = "derived"
) -> TransformMatrix:
    """Fast-limit transform at original time ``t`` from the series."""
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    sol = fast_series(model, tail, s, J, mode)
    u = float(t) ** (1.0 / float(tail.beta))
    values, _ = evaluate_series(sol, u)
    return TransformMatrix(values, np.asarray(s, dtype=float), float(t))
