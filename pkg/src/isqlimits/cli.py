"""Command-line entry point: ``isqlimits {solve,limit,series,sweep,simulate,verify}``."""
from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np

from .config import ConfigError, ExperimentConfig, default_config_path, load_config, with_overrides
from .limit_laws import fast_limit_lt, limit_mc, limit_transform
from .output import table_manifest, write_table
from .power_series import evaluate_series, fast_series
from .regimes import LimitRegime, classify_regime
from .simulator import empirical_transform, regime_sweep
from .transform_engine import regime_argument, single_state_transform, solve_psi, solve_psi_n
from .verify import SUITES, run_suite


def state_label(model, i: int) -> str:
    return ":".join(str(int(v)) for v in model.space.states[i])


def _entries(model, matrix):
    m = model.size
    for x in range(m):
        for y in range(m):
            yield state_label(model, x), state_label(model, y), x, y, matrix[x, y]


def _regime(cfg: ExperimentConfig) -> LimitRegime:
    if cfg.gamma is not None:
        return classify_regime(cfg.gamma, cfg.model.alpha)
    if cfg.regime is not None:
        return cfg.regime
    raise ConfigError(["scaling.gamma: required to classify the regime"])


def _psi_on_grid(cfg: ExperimentConfig, s):
    """``[(t, matrix)]`` for the configured t grid, one solve when the grid is uniform."""
    model = cfg.model
    if cfg.n is None:
        solve = lambda s, t, steps, **kw: solve_psi(model, s, t, steps, **kw)
    else:
        scaling = cfg.scaling()
        solve = lambda s, t, steps, **kw: solve_psi_n(model, scaling, s, t, steps, **kw)
    if cfg.t_uniform:
        intervals = len(cfg.t) - 1
        per = max(1, math.ceil(cfg.steps / intervals))
        grid = solve(s, cfg.t[-1], per * intervals, keep_every=per)
        return list(zip(cfg.t, grid.solution))
    out = []
    for t in cfg.t:
        grid = solve(s, t, cfg.steps, keep_every=cfg.steps)
        out.append((t, grid.final))
    return out


def cmd_solve(cfg: ExperimentConfig):
    model = cfg.model
    scaling = cfg.scaling() if cfg.n is not None else None
    columns = ["t", "s_id", "x", "y", "value", "row_sum", "closed_form"]
    rows = []
    for s_id, s in enumerate(cfg.s):
        for t, Y in _psi_on_grid(cfg, s):
            closed = float(single_state_transform(model, s, t, scaling)) if model.size == 1 else None
            sums = Y.sum(axis=1)
            for xl, yl, x, _, v in _entries(model, Y):
                rows.append([t, s_id, xl, yl, v, sums[x], closed])
    return columns, rows


def cmd_limit(cfg: ExperimentConfig):
    model = cfg.model
    regime = _regime(cfg)
    n_se = cfg.tolerances["n_se"]
    columns = ["regime", "t", "s_id", "x", "y", "value", "mc_estimate", "mc_stderr", "within_4se"]
    rows = []
    for s_id, s in enumerate(cfg.s):
        for t in cfg.t:
            lt = limit_transform(model, regime, s, t, cfg.steps).values
            mc = None
            if cfg.mc and regime is not LimitRegime.SLOW:
                mc = limit_mc(model, regime, s, t, cfg.trials, cfg.seed)
                ok = mc.within(lt, n_se)
            for xl, yl, x, y, v in _entries(model, lt):
                if mc is None:
                    rows.append([regime.value, t, s_id, xl, yl, v, None, None, None])
                else:
                    rows.append([regime.value, t, s_id, xl, yl, v, mc.estimate[x, y], mc.stderr[x, y], ok[x, y]])
    return columns, rows


def cmd_series(cfg: ExperimentConfig):
    if cfg.tail is None:
        raise ConfigError(["model.tail: the series solver needs alpha = 1 - p/q given as tail {p, q}"])
    model = cfg.model
    tol = cfg.tolerances["series"]
    columns = ["t", "s_id", "x", "y", "derived", "printed", "ode", "matched"]
    rows = []
    for s_id, s in enumerate(cfg.s):
        sols = {mode: fast_series(model, cfg.tail, s, cfg.J, mode) for mode in ("derived", "printed")}
        block = []
        worst = {"derived": 0.0, "printed": 0.0}
        for t in cfg.t:
            u = float(t) ** (1.0 / float(cfg.tail.beta))
            vals = {mode: evaluate_series(sol, u)[0] for mode, sol in sols.items()}
            ode = fast_limit_lt(model, s, t, cfg.steps).values
            for mode in worst:
                worst[mode] = max(worst[mode], float(np.abs(vals[mode] - ode).max()))
            for xl, yl, x, y, v in _entries(model, ode):
                block.append([t, s_id, xl, yl, vals["derived"][x, y], vals["printed"][x, y], v])
        matched = "+".join(mode for mode, e in worst.items() if e <= tol) or "none"
        rows += [r + [matched] for r in block]
    return columns, rows


def cmd_sweep(cfg: ExperimentConfig):
    ladder = cfg.n_ladder or ([cfg.n] if cfg.n is not None else None)
    if not ladder or cfg.gamma is None:
        raise ConfigError(["scaling.n_ladder (or scaling.n) and scaling.gamma are required for sweep"])
    columns = ["regime", "n", "t", "s_id", "sup_distance", "method"]
    rows = []
    for s_id, s in enumerate(cfg.s):
        for r in regime_sweep(
            cfg.model, cfg.gamma, s, cfg.t, ladder, cfg.trials if cfg.mc else 0, cfg.seed, cfg.steps, s_id
        ):
            rows.append([r.regime, r.n, r.t, r.s_id, r.sup_distance, r.method])
    return columns, rows


def cmd_simulate(cfg: ExperimentConfig):
    model = cfg.model
    scaling = cfg.scaling()
    regime = LimitRegime.FAST if cfg.rescale_s else LimitRegime.SLOW
    n_se = cfg.tolerances["n_se"]
    columns = ["t", "s_id", "x", "y", "estimate", "stderr", "ode", "within_4se"]
    rows = []
    for s_id, s in enumerate(cfg.s):
        s_star = regime_argument(model, scaling, s, regime)
        for t in cfg.t:
            emp = empirical_transform(model, scaling, s, t, cfg.trials, cfg.seed, rescale_s=cfg.rescale_s)
            ode = solve_psi_n(model, scaling, s_star, t, cfg.steps, keep_every=cfg.steps).final
            ok = emp.within(ode, n_se)
            for xl, yl, x, y, v in _entries(model, ode):
                rows.append([t, s_id, xl, yl, emp.estimate[x, y], emp.stderr[x, y], v, ok[x, y]])
    return columns, rows


COMMANDS = {
    "solve": cmd_solve,
    "limit": cmd_limit,
    "series": cmd_series,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isqlimits", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML experiment file (default: the packaged default.yaml)")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, help="Monte Carlo seed, 0 .. 2^64 - 1")
        p.add_argument("--trials", type=int, help="Monte Carlo paths per start state")
        p.add_argument("--steps", type=int, help="RK4 steps")
        p.add_argument("--format", choices=["csv", "json"], help="table format")
    v = sub.add_parser("verify")
    v.add_argument("suite", choices=["all", *SUITES])
    v.add_argument("--config", help="config used by the semigroup suite's default-config check")
    return parser


def run_command(name: str, cfg: ExperimentConfig):
    start = time.perf_counter()
    columns, rows = COMMANDS[name](cfg)
    manifest = table_manifest(name, cfg.resolved, cfg.seed)
    return write_table(
        cfg.out_dir, name, columns, rows, manifest, cfg.formats, wall_time=time.perf_counter() - start
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        if args.config:
            from . import verify

            results = []
            for name in ([*SUITES] if args.suite == "all" else [args.suite]):
                fn = SUITES[name]
                batch = verify.criterion_semigroup(config_path=args.config) if name == "semigroup" else fn()
                for r in batch:
                    print(r.line())
                results += batch
        else:
            results = run_suite(args.suite)
        failed = sum(not r.ok for r in results)
        print(f"{len(results) - failed}/{len(results)} criteria passed")
        return 1 if failed else 0
    try:
        cfg = load_config(args.config or default_config_path())
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError([f"--seed: must lie in [0, 2^64), got {args.seed}"])
        with_overrides(
            cfg, seed=args.seed, trials=args.trials, steps=args.steps, out_dir=args.out, formats=args.format
        )
        paths = run_command(args.command, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
