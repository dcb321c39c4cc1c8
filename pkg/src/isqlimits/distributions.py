"""Pareto service times with survival ``min(1, t^-alpha)``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def survival(alpha: float, t):
    """``P[L > t]``. Vectorised over ``t``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(t > 1.0, t ** -float(alpha), 1.0)
    return out if out.ndim else float(out)


def scaled_survival(alpha: float, n: float, t):
    """``P[L/n > t] = P[L > n t]``."""
    return survival(alpha, float(n) * np.asarray(t, dtype=float))


def integrated_survival(alpha: float, n: float, t, power: int = 1):
    """``int_0^t P[L > n u]^power du`` in closed form."""
    e = float(alpha) * power
    n = float(n)
    t = np.asarray(t, dtype=float)
    nt = np.maximum(n * t, 1.0)
    if e == 1.0:
        tail = (1.0 + np.log(nt)) / n
    else:
        tail = (1.0 + (nt ** (1.0 - e) - 1.0) / (1.0 - e)) / n
    out = np.where(n * t <= 1.0, t, tail)
    return out if out.ndim else float(out)


def inverse_survival(alpha: float, u):
    """Point where the survival function equals ``u`` in (0, 1]: ``u^{-1/alpha}``."""
    out = np.asarray(u, dtype=float) ** (-1.0 / float(alpha))
    return out if out.ndim else float(out)


def sample(alpha: float, rng: np.random.Generator, size=None):
    u = 1.0 - rng.random(size)  # (0, 1]
    return inverse_survival(alpha, u)


@dataclass(frozen=True)
class ParetoService:
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"tail index must lie in (0, 1), got {self.alpha}")

    def survival(self, t):
        return survival(self.alpha, t)

    def cdf(self, t):
        return 1.0 - np.asarray(survival(self.alpha, t))

    def scaled_survival(self, n, t):
        return scaled_survival(self.alpha, n, t)

    def sample(self, rng, size=None):
        return sample(self.alpha, rng, size)
