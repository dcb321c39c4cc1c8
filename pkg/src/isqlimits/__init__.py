"""Laplace transforms, scaling limits and simulation for an infinite-server
queue fed by Markov-switched batches with Pareto service times."""

__version__ = "0.1.0"

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .distributions import ParetoService, integrated_survival, inverse_survival, sample, scaled_survival, survival
from .limit_laws import (
    CampbellResult,
    InhomChainPath,
    StepFunction,
    campbell_check,
    equilibrium_limit_grid,
    equilibrium_limit_lt,
    equilibrium_limit_mc,
    fast_limit_grid,
    fast_limit_lt,
    fast_limit_mc,
    fast_limit_reversed,
    limit_mc,
    limit_transform,
    sample_chain_beta,
    slow_limit_lt,
)
from .montecarlo import EmpiricalTransform
from .power_series import (
    RationalTail,
    SeriesSolution,
    evaluate_series,
    fast_series,
    fast_series_transform,
    rational_tail,
    series_coefficients,
)
from .regimes import LimitRegime, classify_regime
from .simulator import PathSample, SweepRow, empirical_transform, regime_sweep, simulate_path
from .state_space import (
    ModelError,
    ModelSpec,
    ReducibleChainError,
    StateSpace,
    StationaryDist,
    delta_matrix,
    enumerate_states,
    pi_tilde,
    pi_tilde_minus_identity,
    q_tilde,
    reversed_transition,
    scaled_transition,
    stationary_distribution,
)
from .transform_engine import (
    OdeGrid,
    ScalingSpec,
    SolverError,
    TransformMatrix,
    prelimit_transform,
    single_state_transform,
    solve_chi_n,
    solve_linear_matrix_ode,
    solve_psi,
    solve_psi_n,
)
