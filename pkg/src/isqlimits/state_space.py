"""Modulating state space and the matrices built on it.

States are batch vectors ``x = (x_1, ..., x_k)`` with ``x_j in {0, ..., K}``,
stored in lexicographic order. Every matrix in the package is indexed by
positions in that order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

DEFAULT_STATE_CAP = 4096
ROW_SUM_TOL = 1e-12


class ModelError(ValueError):
    pass


class ReducibleChainError(ModelError):
    pass


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Ordered finite set of batch vectors.

    ``states`` is an ``(size, k)`` integer array. The full space
    ``{0..K}^k`` comes from :func:`enumerate_states`; a subset (used for
    chains pinned to a single batch vector) comes from :meth:`from_states`.
    """

    k: int
    K: int
    states: np.ndarray
    _index: dict = field(repr=False, compare=False)

    @classmethod
    def from_states(cls, k: int, K: int, states: Sequence[Sequence[int]]) -> "StateSpace":
        arr = np.asarray(states, dtype=np.int64).reshape(-1, k)
        if arr.min(initial=0) < 0 or arr.max(initial=0) > K:
            raise ModelError(f"state components must lie in 0..{K}")
        tuples = [tuple(int(v) for v in row) for row in arr]
        if len(set(tuples)) != len(tuples):
            raise ModelError("duplicate states in support")
        if tuples != sorted(tuples):
            raise ModelError("states must be listed in lexicographic order")
        arr.setflags(write=False)
        return cls(k, K, arr, {x: i for i, x in enumerate(tuples)})

    @property
    def size(self) -> int:
        return self.states.shape[0]

    def __len__(self) -> int:
        return self.size

    def state(self, index: int) -> tuple[int, ...]:
        return tuple(int(v) for v in self.states[index])

    def index(self, state: Sequence[int]) -> int:
        try:
            return self._index[tuple(int(v) for v in state)]
        except KeyError:
            raise ModelError(f"{tuple(state)} is not a state of this space") from None

    def component(self, i: int) -> np.ndarray:
        """Vector of ``x_i`` over states, for 1-based queue index ``i``."""
        if not 1 <= i <= self.k:
            raise IndexError(f"queue index {i} outside 1..{self.k}")
        return self.states[:, i - 1].astype(float)


def enumerate_states(k: int, K: int, cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    if k < 1 or K < 0:
        raise ModelError(f"need k >= 1 and K >= 0, got k={k}, K={K}")
    size = (K + 1) ** k
    if size > cap:
        raise ModelError(f"state space size (K+1)^k = {size} exceeds cap {cap}")
    states = list(itertools.product(range(K + 1), repeat=k))
    return StateSpace.from_states(k, K, states)


def delta_matrix(space: StateSpace, i: int) -> np.ndarray:
    return np.diag(space.component(i))


def check_stochastic(P: np.ndarray, tol: float = ROW_SUM_TOL) -> None:
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ModelError(f"transition matrix must be square, got shape {P.shape}")
    if not np.isfinite(P).all():
        raise ModelError("transition matrix has non-finite entries")
    if (P < 0).any():
        raise ModelError("transition matrix has negative entries")
    bad = np.flatnonzero(np.abs(P.sum(axis=1) - 1.0) > tol)
    if bad.size:
        raise ModelError(f"rows {bad.tolist()} of the transition matrix do not sum to 1")


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    frontier = np.array([start])
    while frontier.size:
        nxt = adj[frontier].any(axis=0) & ~seen
        seen |= nxt
        frontier = np.flatnonzero(nxt)
    return seen


def check_irreducible(P: np.ndarray, space: StateSpace | None = None) -> None:
    """Raise :class:`ReducibleChainError` unless every state reaches every other."""
    adj = P > 0
    forward = _reachable(adj, 0)
    backward = _reachable(adj.T, 0)
    bad = np.flatnonzero(~(forward & backward))
    if bad.size:
        names = [space.state(i) for i in bad] if space is not None else bad.tolist()
        raise ReducibleChainError(
            f"transition matrix is reducible: states {names} are not in the "
            f"communicating class of state {space.state(0) if space is not None else 0}"
        )


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Base model: ``k`` queues, batches in ``{0..K}^k``, arrival rate ``lam``,
    embedded transition matrix ``P``, tail index ``alpha``.

    ``support`` optionally restricts the chain to a subset of ``{0..K}^k``;
    ``P`` is then indexed by that subset.
    """

    k: int
    K: int
    lam: float
    P: np.ndarray
    alpha: float | Fraction
    support: tuple[tuple[int, ...], ...] | None = None
    space: StateSpace = field(init=False, repr=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ModelError(f"lambda must be positive, got {self.lam}")
        if not 0 < self.alpha < 1:
            raise ModelError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.support is None:
            space = enumerate_states(self.k, self.K)
        else:
            support = tuple(tuple(int(v) for v in x) for x in self.support)
            object.__setattr__(self, "support", support)
            space = StateSpace.from_states(self.k, self.K, support)
        P = np.array(self.P, dtype=float)
        if P.shape != (space.size, space.size):
            raise ModelError(f"P has shape {P.shape}, state space has {space.size} states")
        check_stochastic(P)
        check_irreducible(P, space)
        P.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "space", space)

    @property
    def beta(self) -> float | Fraction:
        return 1 / (1 - self.alpha)

    @property
    def size(self) -> int:
        return self.space.size

    def generator(self) -> np.ndarray:
        """``lam * (P - I)``."""
        return self.lam * (self.P - np.eye(self.size))


@dataclass(frozen=True, eq=False)
class StationaryDist:
    pi: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.pi if dtype is None else self.pi.astype(dtype)


def stationary_distribution(P: np.ndarray) -> StationaryDist:
    """Solve ``pi P = pi``, ``sum(pi) = 1`` with one balance row replaced by
    the normalisation row."""
    P = np.asarray(P, dtype=float)
    check_stochastic(P)
    check_irreducible(P)
    m = P.shape[0]
    A = P.T - np.eye(m)
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    # clip round-off negatives, renormalise
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    pi.setflags(write=False)
    return StationaryDist(pi)


def scaled_transition(P: np.ndarray, n: int, gamma: float) -> np.ndarray:
    """``P_n = P / n^gamma + (1 - 1/n^gamma) I``."""
    if n < 1:
        raise ModelError(f"n must be >= 1, got {n}")
    if not gamma > 0:
        raise ModelError(f"gamma must be positive, got {gamma}")
    P = np.asarray(P, dtype=float)
    w = float(n) ** -float(gamma)
    return w * P + (1.0 - w) * np.eye(P.shape[0])


def reversed_transition(P: np.ndarray, pi: np.ndarray | StationaryDist) -> np.ndarray:
    """Time reversal ``diag(pi)^-1 P' diag(pi)``."""
    P = np.asarray(P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if (pi <= 0).any():
        raise ModelError("stationary distribution has zero mass; reversal undefined")
    return (P.T * pi[None, :]) / pi[:, None]


def _check_s(s: Sequence[float], k: int) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.shape != (k,):
        raise ModelError(f"s must have {k} components, got shape {s.shape}")
    if (s > 0).any():
        raise ModelError(f"transform arguments must be <= 0, got s={s.tolist()}")
    return s


def _survival_vector(v, k: int) -> np.ndarray:
    v = np.broadcast_to(np.asarray(v, dtype=float), (k,))
    if ((v < 0) | (v > 1)).any():
        raise ModelError("survival values must lie in [0, 1]")
    return v


def pi_tilde_factors(space: StateSpace, s, survival_values) -> np.ndarray:
    """``(e^{s_j x_j} - 1) v_j`` for every state and queue, shape ``(size, k)``."""
    s = _check_s(s, space.k)
    v = _survival_vector(survival_values, space.k)
    return np.expm1(space.states * s[None, :]) * v[None, :]


def subset_product_sum(a: np.ndarray) -> np.ndarray:
    """Row-wise sum over non-empty column subsets ``I`` of ``prod_{l in I} a_l``.

    Built one column at a time, ``c <- c (1 + a_j) + a_j``, so no near-one
    product is ever formed and then reduced by 1.
    """
    c = np.zeros(a.shape[0])
    for j in range(a.shape[1]):
        c = c * (1.0 + a[:, j]) + a[:, j]
    return c


def pi_tilde_minus_identity(space: StateSpace, s, survival_values) -> np.ndarray:
    """Diagonal of ``pi_tilde(s, r) - I``."""
    return subset_product_sum(pi_tilde_factors(space, s, survival_values))


def _pi_tilde_diagonal(space: StateSpace, s, survival_values) -> np.ndarray:
    # product of (1 - v_j) + v_j e^{s_j x_j}: stays positive where 1 + (pi_tilde - I) would underflow
    s = _check_s(s, space.k)
    v = _survival_vector(survival_values, space.k)
    return np.prod((1.0 - v)[None, :] + v[None, :] * np.exp(space.states * s[None, :]), axis=1)


def pi_tilde(space: StateSpace, s, survival_values) -> np.ndarray:
    return np.diag(_pi_tilde_diagonal(space, s, survival_values))


def q_tilde(space: StateSpace, s, survival_values, P: np.ndarray) -> np.ndarray:
    d = _pi_tilde_diagonal(space, s, survival_values)
    return d[:, None] * np.asarray(P, dtype=float).T
