"""Acceptance suites run by ``isqlimits verify`` and the test-suite.

Each suite returns a list of :class:`CriterionResult`; a result passes when
its numerical check holds and the run finished inside its time budget.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .config import default_config_path, load_config
from .limit_laws import (
    StepFunction,
    campbell_check,
    equilibrium_limit_lt,
    equilibrium_limit_mc,
    fast_limit_grid,
    fast_limit_lt,
    fast_limit_mc,
)
from .power_series import RationalTail, evaluate_series, fast_series
from .simulator import empirical_transform, regime_sweep
from .state_space import ModelSpec, check_irreducible
from .transform_engine import ScalingSpec, single_state_transform, solve_linear_matrix_ode, solve_psi, solve_psi_n

SEED = 20240611
TRIALS = 100_000
N_SE = 4.0
T_GRID = np.linspace(0.0, 1.0, 101)


@dataclass
class CriterionResult:
    criterion: str
    passed: bool
    measured: str
    limit: str
    runtime: float = 0.0
    budget: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.passed and (self.budget is None or self.runtime < self.budget)

    def line(self) -> str:
        budget = "" if self.budget is None else f" (< {self.budget:g} s)"
        status = "PASS" if self.ok else "FAIL"
        return f"{status} {self.criterion}: {self.measured} [{self.limit}] {self.runtime:.2f} s{budget}"


def random_transition_matrix(m: int, rng: np.random.Generator, min_entry: float = 0.0) -> np.ndarray:
    """A random irreducible stochastic ``m x m`` matrix (dense, or with a
    cycle guaranteeing irreducibility when sparse entries are drawn)."""
    while True:
        W = rng.random((m, m)) * (rng.random((m, m)) < 0.6)
        W[np.arange(m), (np.arange(m) + 1) % m] += rng.random(m) + 0.05
        W += min_entry
        P = W / W.sum(axis=1, keepdims=True)
        try:
            check_irreducible(P)
            return P
        except ValueError:
            continue


def criterion4_model(tail: RationalTail | None = None) -> ModelSpec:
    alpha = 0.5 if tail is None else tail.alpha
    return ModelSpec(1, 1, 1.0, np.array([[0.3, 0.7], [0.6, 0.4]]), alpha)


def one_state_model(alpha=0.5, lam=1.0) -> ModelSpec:
    return ModelSpec(1, 1, lam, np.array([[1.0]]), alpha, support=[(1,)])


def _timed(fn: Callable[[], CriterionResult]) -> CriterionResult:
    start = time.perf_counter()
    res = fn()
    res.runtime = time.perf_counter() - start
    return res


# 1 ------------------------------------------------------------------------
_SIZES = {2: (1, 1), 4: (2, 1), 9: (2, 2)}


def _semigroup_error(model: ModelSpec) -> float:
    grid = solve_psi(model, np.zeros(model.k), 1.0, 2000, keep_every=20)
    G = model.lam * (model.P - np.eye(model.size))
    return max(float(np.abs(Y - expm(t * G)).max()) for t, Y in zip(grid.times, grid.solution))


def criterion_semigroup(seed: int = SEED, per_size: int = 5, config_path=None) -> list[CriterionResult]:
    def run():
        rng = np.random.default_rng(seed)
        worst = {}
        for m, (k, K) in _SIZES.items():
            errs = []
            for _ in range(per_size):
                P = random_transition_matrix(m, rng)
                lam = float(rng.uniform(0.2, 3.0))
                errs.append(_semigroup_error(ModelSpec(k, K, lam, P, float(rng.uniform(0.1, 0.9)))))
            worst[m] = max(errs)
        err = max(worst.values())
        return CriterionResult(
            "1 semigroup",
            err <= 1e-8,
            f"max err {err:.2e} over |S| {sorted(worst)} x {per_size}",
            "<= 1e-08",
            budget=5.0,
            details={"per_size": worst},
        )

    out = [_timed(run)]

    def run_default():
        cfg = load_config(config_path or default_config_path())
        err = _semigroup_error(cfg.model)
        return CriterionResult("1 semigroup (default config)", err <= 1e-8, f"max err {err:.2e}", "<= 1e-08")

    out.append(_timed(run_default))
    return out


# 2 ------------------------------------------------------------------------
def criterion_mginf(gammas=(0.25, 0.5, 0.75)) -> list[CriterionResult]:
    def run():
        model = one_state_model()
        worst = 0.0
        for s in (-0.5, -1.0, -2.0):
            grid = solve_psi(model, [s], 1.0, 2000, keep_every=20)
            exact = single_state_transform(model, [s], grid.times)
            worst = max(worst, float(np.abs(grid.solution[:, 0, 0] / exact - 1).max()))
            for gamma in gammas:
                for n in (1, 10, 100):
                    sc = ScalingSpec(n, gamma)
                    grid = solve_psi_n(model, sc, [s], 1.0, 2000, keep_every=20)
                    exact = single_state_transform(model, [s], grid.times, sc)
                    worst = max(worst, float(np.abs(grid.solution[:, 0, 0] / exact - 1).max()))
        return CriterionResult(
            "2 M/G/inf oracle", worst <= 1e-6, f"max rel err {worst:.2e}", "<= 1e-06", budget=5.0
        )

    return [_timed(run)]


# 3 ------------------------------------------------------------------------
_SERIES_SHAPES = [(1, 1), (1, 2), (1, 3), (2, 1)]


def series_mode_errors(model: ModelSpec, tail: RationalTail, s, steps: int = 2000) -> dict[str, float]:
    """Sup over ``t`` in [0, 1] of |series - ODE| for both coefficient modes."""
    grid = fast_limit_grid(model, s, 1.0, steps, keep_every=steps // 100)
    errs = {}
    for mode in ("derived", "printed"):
        sol = fast_series(model, tail, s, mode=mode)
        errs[mode] = max(
            float(np.abs(evaluate_series(sol, u)[0] - Y).max()) for u, Y in zip(grid.times, grid.solution)
        )
    return errs


def criterion_series(seed: int = SEED, instances: int = 4) -> list[CriterionResult]:
    def run():
        rng = np.random.default_rng(seed + 3)
        derived = printed = 0.0
        for p, q in ((1, 2), (2, 3)):
            tail = RationalTail(p, q)
            for i in range(instances):
                k, K = _SERIES_SHAPES[i % len(_SERIES_SHAPES)]
                m = (K + 1) ** k
                model = ModelSpec(k, K, float(rng.uniform(0.5, 2.0)), random_transition_matrix(m, rng), tail.alpha)
                errs = series_mode_errors(model, tail, -np.ones(k))
                derived = max(derived, errs["derived"])
                printed = max(printed, errs["printed"])
        matched = [name for name, e in (("derived", derived), ("printed", printed)) if e <= 1e-6]
        return CriterionResult(
            "3 series vs ODE",
            derived <= 1e-6,
            f"derived {derived:.2e}, printed {printed:.2e}; matched mode: {', '.join(matched) or 'none'}",
            "derived <= 1e-06",
            budget=10.0,
            details={"derived": derived, "printed": printed, "matched": matched},
        )

    return [_timed(run)]


# 4 ------------------------------------------------------------------------
LADDER = (10, 100, 1000, 10_000)


def convergence_distances(gamma, t: float = 0.7, s=(-1.0,), steps: int = 2000) -> list[float]:
    rows = regime_sweep(criterion4_model(), gamma, list(s), t, LADDER, steps=steps)
    return [r.sup_distance for r in rows]


CONVERGENCE_GAMMAS = {"slow": 0.25, "equilibrium": 0.5, "fast": 0.75}


def criterion_convergence(regimes=tuple(CONVERGENCE_GAMMAS)) -> list[CriterionResult]:
    out = []
    for name in regimes:
        gamma = CONVERGENCE_GAMMAS[name]

        def run(gamma=gamma, name=name):
            d = convergence_distances(gamma)
            decreasing = all(b < a for a, b in zip(d, d[1:]))
            ratio = d[0] / d[-1]
            return CriterionResult(
                f"4 convergence {name} (gamma={gamma})",
                decreasing and ratio >= 5,
                "distances " + ", ".join(f"{x:.3e}" for x in d) + f"; d(10)/d(1e4) = {ratio:.2f}",
                "strictly decreasing, ratio >= 5",
                budget=10.0,
                details={"distances": d, "ratio": ratio},
            )

        out.append(_timed(run))
    return out


# 5-7 ----------------------------------------------------------------------
def simulator_estimate(workers=None):
    model = criterion4_model()
    return model, empirical_transform(model, ScalingSpec(10, 0.5), [-1.0], 0.7, TRIALS, SEED, workers=workers)


def feynman_kac_estimates(workers=None):
    model = criterion4_model()
    return model, {t: fast_limit_mc(model, [-1.0], t, TRIALS, SEED, workers) for t in (0.3, 0.7, 1.0)}


def equilibrium_estimates(workers=None):
    model = criterion4_model()
    return model, {t: equilibrium_limit_mc(model, [-1.0], t, TRIALS, SEED, workers) for t in (0.3, 0.7, 1.0)}


CAMPBELL_FUNCTIONS = (
    StepFunction.constant(-0.7),
    StepFunction([0.0, 0.3, 0.6, 1.0], [-1.0, 0.4, -0.2]),
    StepFunction([0.0, 0.5, 1.0], [0.3, -2.0]),
)


def campbell_results():
    return [campbell_check(f, 2.0, TRIALS, SEED + i) for i, f in enumerate(CAMPBELL_FUNCTIONS)]


def criterion_simulator() -> list[CriterionResult]:
    def run():
        model, emp = simulator_estimate()
        ode = solve_psi_n(model, ScalingSpec(10, 0.5), [-1.0], 0.7).final
        z = float(emp.zscores(ode).max())
        return CriterionResult(
            "5 simulator vs ODE", z <= N_SE, f"max |z| {z:.2f}", f"<= {N_SE:g} SE", budget=30.0
        )

    return [_timed(run)]


def criterion_feynman_kac() -> list[CriterionResult]:
    def run():
        model, ests = feynman_kac_estimates()
        z = max(float(e.zscores(fast_limit_lt(model, [-1.0], t).values).max()) for t, e in ests.items())
        return CriterionResult(
            "6 Feynman-Kac duality", z <= N_SE, f"max |z| {z:.2f} at t in (0.3, 0.7, 1)", f"<= {N_SE:g} SE",
            budget=60.0,
        )

    return [_timed(run)]


def criterion_campbell() -> list[CriterionResult]:
    def run_eq():
        model, ests = equilibrium_estimates()
        z = max(float(e.zscores(equilibrium_limit_lt(model, [-1.0], t).values).max()) for t, e in ests.items())
        return CriterionResult(
            "7 equilibrium MC vs ODE", z <= N_SE, f"max |z| {z:.2f}", f"<= {N_SE:g} SE", budget=60.0
        )

    def run_campbell():
        res = campbell_results()
        z = [abs(r.estimate - r.analytic) / r.stderr for r in res]
        return CriterionResult(
            "7 Campbell formula",
            max(z) <= N_SE,
            "|z| " + ", ".join(f"{v:.2f}" for v in z) + " on 3 step functions",
            f"<= {N_SE:g} SE",
            budget=60.0,
        )

    return [_timed(run_eq), _timed(run_campbell)]


# 8 ------------------------------------------------------------------------
def perturbation_constants(seed: int, ns=(8, 16, 32, 64), steps: int = 2000, d: int = 3) -> list[float]:
    """``n * sup_t |Y_n - Y|`` for ``Y' = A Y`` versus ``Y_n' = (A + B/n) Y_n``."""
    rng = np.random.default_rng(seed)
    A0, A1, B0, B1 = (rng.uniform(-1, 1, (d, d)) for _ in range(4))
    ts = np.linspace(0, 1, 201)

    def bound(F):
        return max(np.abs(F(t)).sum(axis=1).max() for t in ts)

    Af = lambda t: A0 + A1 * np.cos(2 * np.pi * t)
    Bf = lambda t: B0 * np.exp(-t) + B1 * t
    a = 10 / bound(Af) * rng.uniform(0.2, 1)
    b = 10 / bound(Bf) * rng.uniform(0.2, 1)
    Y = solve_linear_matrix_ode(lambda t: a * Af(t), np.eye(d), 1.0, steps).solution
    out = []
    for n in ns:
        Yn = solve_linear_matrix_ode(lambda t: a * Af(t) + b * Bf(t) / n, np.eye(d), 1.0, steps).solution
        out.append(n * float(np.abs(Yn - Y).max()))
    return out


def criterion_perturbation(seeds=range(4)) -> list[CriterionResult]:
    def run():
        worst = 1.0
        ratios = []
        for sd in seeds:
            C = perturbation_constants(SEED + sd)
            r = [C[i + 1] / C[i] for i in range(len(C) - 1)]
            ratios += r
            worst = max(worst, max(max(x, 1 / x) for x in r))
        return CriterionResult(
            "8 perturbation rate 1/n",
            worst <= 1.5,
            f"n*err ratios per doubling in [{min(ratios):.3f}, {max(ratios):.3f}]",
            "within factor 1.5",
            budget=5.0,
        )

    return [_timed(run)]


# 9 ------------------------------------------------------------------------
def _fingerprint(workers) -> list[bytes]:
    parts = []
    _, emp = simulator_estimate(workers)
    parts += [emp.estimate.tobytes(), emp.stderr.tobytes()]
    for fn in (feynman_kac_estimates, equilibrium_estimates):
        _, ests = fn(workers)
        for t in sorted(ests):
            parts += [ests[t].estimate.tobytes(), ests[t].stderr.tobytes()]
    for r in campbell_results():
        parts.append(np.array(r[:2]).tobytes())
    return parts


def criterion_determinism(workers=(1, 2, 8)) -> list[CriterionResult]:
    def run():
        prints = {w: _fingerprint(w) for w in workers}
        base = prints[workers[0]]
        same = all(prints[w] == base for w in workers)
        return CriterionResult(
            "9 determinism",
            same,
            f"criteria 5-7 outputs {'bit-identical' if same else 'DIFFER'} under workers {list(workers)}",
            "bit-identical",
        )

    return [_timed(run)]


SUITES: dict[str, Callable[[], list[CriterionResult]]] = {
    "semigroup": criterion_semigroup,
    "mginf": criterion_mginf,
    "series-vs-ode": criterion_series,
    "convergence": criterion_convergence,
    "simulator": criterion_simulator,
    "feynman-kac": criterion_feynman_kac,
    "campbell": criterion_campbell,
    "perturbation": criterion_perturbation,
    "determinism": criterion_determinism,
}


def run_suite(name: str, echo: Callable[[str], None] | None = print) -> list[CriterionResult]:
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise KeyError(f"unknown suite {name!r}; choose from {['all', *SUITES]}")
    results = []
    for n in names:
        for res in SUITES[n]():
            if echo:
                echo(res.line())
            results.append(res)
    return results
