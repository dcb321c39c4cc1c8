from __future__ import annotations

import enum
from fractions import Fraction
from numbers import Rational


class LimitRegime(str, enum.Enum):
    SLOW = "slow"
    EQUILIBRIUM = "equilibrium"
    FAST = "fast"

    def __str__(self) -> str:
        return self.value


def _exact(x):
    if isinstance(x, Rational):
        return Fraction(x)
    return None


def classify_regime(gamma, alpha) -> LimitRegime:
    """Slow if ``gamma < alpha``, equilibrium if equal, fast if greater.

    Rationals (``int``/``Fraction``) are compared exactly; anything else is
    compared as floats with no tolerance.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    g, a = _exact(gamma), _exact(alpha)
    if g is None or a is None:
        g, a = float(gamma), float(alpha)
    if g < a:
        return LimitRegime.SLOW
    if g > a:
        return LimitRegime.FAST
    return LimitRegime.EQUILIBRIUM


def as_regime(regime) -> LimitRegime:
    try:
        return LimitRegime(str(regime).lower())
    except ValueError:
        raise ValueError(
            f"unknown regime {regime!r}; expected one of {[r.value for r in LimitRegime]}"
        ) from None
