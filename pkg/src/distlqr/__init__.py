"""Exact and truncated return distributions for discounted LQR, CVaR evaluation
and risk-averse zeroth-order gain optimization."""

from .bound import BoundInputs, bound_at, bound_constant
from .errors import (
    ConfigError,
    DistLQRError,
    HypothesisViolation,
    InstanceError,
    NonConvergence,
    StabilityBoundary,
    UnstableGain,
)
from .linsys import (
    ClosedLoop,
    LinearSystem,
    NoiseModel,
    StabilityFlags,
    close_loop,
    is_bound_admissible,
    is_mean_square_stable,
    sample_noise,
)
from .lqr import ValueCertificate, solve_lyapunov, solve_riccati
from .montecarlo import RolloutConfig, build_mc_distribution, rollout_return
from .optimizer import OptimizerTrace, PGConfig, evaluate_objective, run, sample_perturbation
from .returns import (
    EmpiricalDistribution,
    ReturnModel,
    build_empirical,
    histogram,
    ks_distance,
    sample_return,
    sample_return_via_rollout,
    truncated_return,
)
from .risk import RiskSpec, cvar, value_at_risk

__version__ = "0.1.0"
