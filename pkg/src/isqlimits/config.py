"""Experiment configuration files (YAML).

Schema::

    model:
      k: 1                      # number of queues
      K: 1                      # batch components in 0..K
      lambda: 1.0
      P: [[0.3, 0.7], [0.6, 0.4]]
      alpha: 0.5                # float, "p/q" string, or omit and give tail
      tail: {p: 1, q: 2}        # optional; alpha = 1 - p/q, enables `series`
      support: [[1]]            # optional subset of {0..K}^k, P indexed by it
    scaling:
      gamma: 0.5                # float or "num/den"
      n: 10                     # single n (solve, simulate)
      n_ladder: [10, 100]       # increasing ladder (sweep)
      regime: fast              # optional assertion checked against gamma/alpha
    probe:
      s: [[-1.0], [-0.5]]       # list of s vectors (a scalar is fine when k = 1)
      t: {start: 0, stop: 1, num: 11}   # or an explicit list
      rescale_s: false          # simulate: use s / n^(gamma - alpha)
    engine:
      steps: 2000
      trials: 100000
      seed: 12345
      J: null                   # series order, null = adaptive
      mc: false                 # limit: add Monte Carlo columns
      tolerances: {n_se: 4.0, series: 1.0e-6}
    output:
      directory: out
      formats: [csv]            # csv and/or json
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .power_series import RationalTail
from .regimes import LimitRegime, classify_regime
from .state_space import ModelError, ModelSpec
from .transform_engine import DEFAULT_STEPS, ScalingSpec

FORMATS = ("csv", "json")
DEFAULT_TOLERANCES = {"n_se": 4.0, "series": 1e-6}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid config:\n  " + "\n  ".join(problems))


@dataclass
class ExperimentConfig:
    model: ModelSpec
    tail: RationalTail | None
    gamma: float | Fraction | None
    n: int | None
    n_ladder: list[int] | None
    regime: LimitRegime | None
    s: list[np.ndarray]
    t: list[float]
    t_uniform: bool
    rescale_s: bool = False
    steps: int = DEFAULT_STEPS
    trials: int = 100_000
    seed: int = 0
    J: int | None = None
    mc: bool = False
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out_dir: Path = Path("out")
    formats: list[str] = field(default_factory=lambda: ["csv"])
    t_spec: Any = None

    @property
    def resolved(self) -> dict:
        """Every setting after defaults and overrides, as plain data that
        :func:`parse_config` accepts back."""
        m = self.model
        model = {"k": m.k, "K": m.K, "lambda": m.lam, "P": m.P.tolist(), "alpha": _plain(m.alpha)}
        if self.tail is not None:
            model["tail"] = {"p": self.tail.p, "q": self.tail.q}
        if m.support is not None:
            model["support"] = [list(x) for x in m.support]
        scaling = {}
        if self.gamma is not None:
            scaling["gamma"] = _plain(self.gamma)
        if self.n is not None:
            scaling["n"] = self.n
        if self.n_ladder is not None:
            scaling["n_ladder"] = list(self.n_ladder)
        if self.regime is not None:
            scaling["regime"] = self.regime.value
        return {
            "model": model,
            "scaling": scaling,
            "probe": {"s": [v.tolist() for v in self.s], "t": self.t_spec, "rescale_s": self.rescale_s},
            "engine": {
                "steps": self.steps,
                "trials": self.trials,
                "seed": self.seed,
                "J": self.J,
                "mc": self.mc,
                "tolerances": dict(self.tolerances),
            },
            "output": {"directory": str(self.out_dir), "formats": list(self.formats)},
        }

    def scaling(self, n: int | None = None) -> ScalingSpec:
        n = self.n if n is None else n
        if n is None or self.gamma is None:
            raise ConfigError(["scaling.n and scaling.gamma are required for this command"])
        return ScalingSpec(n, self.gamma)


def _number(value, where: str, problems: list[str], exact: bool = False):
    if isinstance(value, bool):
        problems.append(f"{where}: expected a number, got {value!r}")
        return None
    if isinstance(value, int):
        return Fraction(value) if exact else value
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        try:
            if "/" in value:
                return Fraction(value.replace(" ", ""))
            return float(value)
        except (ValueError, ZeroDivisionError):
            pass
    problems.append(f"{where}: expected a number, got {value!r}")
    return None


def _integer(value, where: str, problems: list[str], minimum: int | None = None):
    if isinstance(value, str) and value.strip().isdigit():
        value = int(value.strip())
    if isinstance(value, int) and not isinstance(value, bool):
        v = value
    else:
        v = _number(value, where, problems)
        if v is None:
            return None
        if float(v) != int(float(v)):
            problems.append(f"{where}: expected an integer, got {value!r}")
            return None
        v = int(float(v))
    if minimum is not None and v < minimum:
        problems.append(f"{where}: must be >= {minimum}, got {v}")
        return None
    return v


def _t_grid(raw, problems) -> tuple[list[float], bool]:
    if isinstance(raw, dict):
        start = _number(raw.get("start", 0.0), "probe.t.start", problems)
        stop = _number(raw.get("stop", 1.0), "probe.t.stop", problems)
        num = _integer(raw.get("num", 11), "probe.t.num", problems, minimum=1)
        if None in (start, stop, num):
            return [], False
        ts = np.linspace(float(start), float(stop), num).tolist()
        uniform = float(start) == 0.0 and num > 1
    else:
        items = raw if isinstance(raw, list) else [raw]
        ts = []
        for i, v in enumerate(items):
            x = _number(v, f"probe.t[{i}]", problems)
            if x is not None:
                ts.append(float(x))
        uniform = False
    for i, v in enumerate(ts):
        if not 0.0 <= v <= 1.0:
            problems.append(f"probe.t[{i}]: must lie in [0, 1], got {v}")
    return ts, uniform


def _s_vectors(raw, k: int | None, problems) -> list[np.ndarray]:
    if raw is None:
        return [np.zeros(k or 1)]
    items = raw if isinstance(raw, list) else [raw]
    if items and not isinstance(items[0], list) and k != 1:
        items = [items]  # one vector given flat
    out = []
    for i, v in enumerate(items):
        vec = v if isinstance(v, list) else [v]
        nums = [_number(x, f"probe.s[{i}]", problems) for x in vec]
        if None in nums:
            continue
        arr = np.array([float(x) for x in nums])
        if k is not None and arr.size != k:
            problems.append(f"probe.s[{i}]: needs {k} components, got {arr.size}")
        elif (arr > 0).any():
            problems.append(f"probe.s[{i}]: components must be <= 0, got {arr.tolist()}")
        else:
            out.append(arr)
    return out


def _plain(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    return x


def _plain_t(raw, ts):
    if isinstance(raw, dict):
        return {"start": ts[0], "stop": ts[-1], "num": len(ts)} if ts else raw
    return list(ts)


def parse_config(raw: dict[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["top level: expected a mapping"])
    unknown = set(raw) - {"model", "scaling", "probe", "engine", "output"}
    problems += [f"{key}: unknown section" for key in sorted(unknown)]

    m = raw.get("model") or {}
    if not m:
        problems.append("model: section is required")
    k = _integer(m.get("k"), "model.k", problems, minimum=1) if "k" in m else None
    K = _integer(m.get("K"), "model.K", problems, minimum=0) if "K" in m else None
    if m and k is None and "k" not in m:
        problems.append("model.k: required")
    if m and K is None and "K" not in m:
        problems.append("model.K: required")
    lam = _number(m.get("lambda"), "model.lambda", problems) if "lambda" in m else None
    if m and "lambda" not in m:
        problems.append("model.lambda: required")
    elif lam is not None and not lam > 0:
        problems.append(f"model.lambda: must be positive, got {lam}")

    tail = None
    if "tail" in m:
        t_raw = m["tail"] or {}
        p = _integer(t_raw.get("p"), "model.tail.p", problems, minimum=1)
        q = _integer(t_raw.get("q"), "model.tail.q", problems, minimum=2)
        if p is not None and q is not None:
            try:
                tail = RationalTail(p, q)
            except ValueError as exc:
                problems.append(f"model.tail: {exc}")
    alpha = None
    if "alpha" in m:
        alpha = _number(m["alpha"], "model.alpha", problems)
        if alpha is not None and not 0 < alpha < 1:
            problems.append(f"model.alpha: must lie in (0, 1), got {m['alpha']}")
            alpha = None
    if tail is not None:
        if alpha is not None and float(alpha) != float(tail.alpha):
            problems.append(f"model.alpha: {alpha} disagrees with tail (p, q) giving {tail.alpha}")
        alpha = tail.alpha
    elif alpha is None and m and "alpha" not in m:
        problems.append("model.alpha: required (or give model.tail)")

    P = m.get("P")
    if m and P is None:
        problems.append("model.P: required")
    support = m.get("support")

    model = None
    if not problems:
        try:
            model = ModelSpec(k, K, float(lam), np.array(P, dtype=float), alpha, support=support)
        except (ModelError, ValueError, TypeError) as exc:
            problems.append(f"model: {exc}")

    sc = raw.get("scaling") or {}
    gamma = _number(sc["gamma"], "scaling.gamma", problems, exact=True) if "gamma" in sc else None
    if gamma is not None and not gamma > 0:
        problems.append(f"scaling.gamma: must be positive, got {sc['gamma']}")
        gamma = None
    if isinstance(gamma, Fraction) and gamma.denominator == 1 and not isinstance(sc["gamma"], str):
        gamma = int(gamma)
    n = _integer(sc["n"], "scaling.n", problems, minimum=1) if "n" in sc else None
    ladder = None
    if "n_ladder" in sc:
        items = sc["n_ladder"] if isinstance(sc["n_ladder"], list) else [sc["n_ladder"]]
        ladder = [_integer(v, f"scaling.n_ladder[{i}]", problems, minimum=1) for i, v in enumerate(items)]
        if None not in ladder and ladder != sorted(set(ladder)):
            problems.append("scaling.n_ladder: must be strictly increasing")
    regime = None
    if "regime" in sc:
        try:
            regime = LimitRegime(str(sc["regime"]).lower())
        except ValueError:
            problems.append(f"scaling.regime: unknown regime {sc['regime']!r}")
    if regime is not None and gamma is not None and alpha is not None:
        actual = classify_regime(gamma, alpha)
        if actual is not regime:
            rule = {"fast": "gamma > alpha", "slow": "gamma < alpha", "equilibrium": "gamma = alpha"}
            problems.append(
                f"scaling.regime: {regime.value} requires {rule[regime.value]}, "
                f"but gamma={sc['gamma']} and alpha={alpha} give {actual.value}"
            )

    pr = raw.get("probe") or {}
    s_list = _s_vectors(pr.get("s"), k, problems)
    ts, uniform = _t_grid(pr.get("t", [1.0]), problems)
    rescale = bool(pr.get("rescale_s", False))
    if rescale and gamma is not None and alpha is not None:
        if classify_regime(gamma, alpha) is not LimitRegime.FAST:
            problems.append(
                f"probe.rescale_s: s / n^(gamma - alpha) requires gamma > alpha, "
                f"got gamma={sc['gamma']}, alpha={alpha}"
            )

    en = raw.get("engine") or {}
    steps = _integer(en.get("steps", DEFAULT_STEPS), "engine.steps", problems, minimum=1)
    trials = _integer(en.get("trials", 100_000), "engine.trials", problems, minimum=1)
    seed = _integer(en.get("seed", 0), "engine.seed", problems, minimum=0)
    J = en.get("J")
    if J is not None:
        J = _integer(J, "engine.J", problems, minimum=0)
    tolerances = dict(DEFAULT_TOLERANCES)
    for key, v in (en.get("tolerances") or {}).items():
        if key not in DEFAULT_TOLERANCES:
            problems.append(f"engine.tolerances.{key}: unknown tolerance")
            continue
        x = _number(v, f"engine.tolerances.{key}", problems)
        if x is not None:
            tolerances[key] = float(x)

    out = raw.get("output") or {}
    directory = Path(out.get("directory", "out"))
    if base_dir is not None and not directory.is_absolute():
        directory = base_dir / directory
    formats = out.get("formats", ["csv"])
    formats = formats if isinstance(formats, list) else [formats]
    for f in formats:
        if f not in FORMATS:
            problems.append(f"output.formats: unknown format {f!r}; expected {list(FORMATS)}")

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        model=model,
        tail=tail,
        gamma=gamma,
        n=n,
        n_ladder=ladder,
        regime=regime,
        s=s_list,
        t=ts,
        t_uniform=uniform,
        rescale_s=rescale,
        steps=steps,
        trials=trials,
        seed=seed,
        J=J,
        mc=bool(en.get("mc", False)),
        tolerances=tolerances,
        out_dir=directory,
        formats=list(formats),
        t_spec=_plain_t(pr.get("t", [1.0]), ts),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return parse_config(raw or {})


def default_config_path() -> Path:
    return Path(__file__).parent / "configs" / "default.yaml"


def with_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Apply command-line overrides (``None`` means keep the file's value)."""
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("seed", "trials", "steps"):
            if int(value) < (0 if key == "seed" else 1):
                raise ConfigError([f"--{key}: invalid value {value}"])
            setattr(cfg, key, int(value))
        elif key == "out_dir":
            cfg.out_dir = Path(value)
        elif key == "formats":
            cfg.formats = [value]
        else:
            raise KeyError(key)
    return cfg
