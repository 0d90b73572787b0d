"""Risk-averse policy gradient over static gains with a residual zeroth-order estimator.

Each episode perturbs the current gain on the sphere of radius delta, evaluates
the CVaR of the truncated return there, and steps along

    g_t = (d / delta^2) * (C(K_t + U_t) - C(K_{t-1} + U_{t-1})) * U_t

where d = p*n is the number of gain entries. The previous evaluation is reused,
so every episode costs one objective call.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as rngmod
from .errors import InstanceError, StabilityBoundary, UnstableGain
from .linsys import LinearSystem, NoiseModel, is_mean_square_stable
from .returns import ReturnModel, truncated_return
from .risk import cvar_of_samples

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PGConfig:
    eta: float = 4e-4
    delta: float = 0.1
    episodes: int = 3000
    N: int = 10
    M: int = 20_000
    alpha: float = 1.0
    seed: int = 0
    crn: bool = True
    n_dim: int | None = None
    max_resamples: int = 100
    max_halvings: int = 60

    def __post_init__(self):
        if self.eta < 0:
            raise InstanceError("eta must be non-negative")
        if self.delta <= 0:
            raise InstanceError("delta must be positive")
        if self.episodes < 0 or self.N < 0 or self.M < 1:
            raise InstanceError("episodes and N must be >= 0 and M >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise InstanceError("alpha must lie in (0, 1]")


@dataclass
class EpisodeRecord:
    t: int
    K: np.ndarray
    K_hat: np.ndarray
    objective: float
    grad: np.ndarray
    K_next: np.ndarray
    stability_resamples: int = 0
    step_halvings: int = 0


@dataclass
class OptimizerTrace:
    K0: np.ndarray
    bootstrap_objective: float = float("nan")
    records: list[EpisodeRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def final_K(self) -> np.ndarray:
        """Gain after the last update (K_0 if no episode ran)."""
        if not self.records:
            return self.K0
        return self.records[-1].K_next

    def gains(self) -> np.ndarray:
        """Iterates K_0 .. K_T stacked into a (T+1, p, n) array."""
        return np.stack([self.K0] + [r.K_next for r in self.records])

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])


def sample_perturbation(shape, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform direction on the Frobenius sphere of radius ``delta``."""
    if delta <= 0:
        raise InstanceError("delta must be positive")
    if isinstance(shape, int):
        shape = (1, shape)
    while True:
        z = rng.standard_normal(shape)
        norm = np.linalg.norm(z)
        if norm > 0:
            return delta * z / norm


def residual_gradient(c_now: float, c_prev: float, U: np.ndarray, delta: float) -> np.ndarray:
    return (U.size / delta ** 2) * (c_now - c_prev) * U


def evaluate_objective(sys: LinearSystem, K_hat, noise: NoiseModel, x, N: int, M: int, alpha: float,
                       rng: np.random.Generator | None = None, W=None) -> float:
    """CVaR_alpha of G_N(x) under ``K_hat`` from M draws.

    Pass a fixed (M, N, n) noise block ``W`` to evaluate with common random numbers;
    otherwise fresh draws come from ``rng``.
    """
    model = ReturnModel.build(sys, K_hat, noise, N)
    if W is None:
        if rng is None:
            raise InstanceError("need either rng or a fixed noise block")
        W = noise.sample((M, N), rng)
    if N == 0 or noise.is_zero:
        x = np.asarray(x, dtype=float)
        return float(x @ model.P @ x)
    return cvar_of_samples(truncated_return(model, x, W), alpha)


def _stable_perturbation(sys, K, cfg, prng, t, trace):
    for attempt in range(cfg.max_resamples):
        U = sample_perturbation(K.shape, cfg.delta, prng)
        if is_mean_square_stable(sys, K + U):
            return U, attempt
    raise StabilityBoundary(
        f"episode {t}: no stabilizing perturbation in {cfg.max_resamples} attempts", trace
    )


def run(sys: LinearSystem, noise: NoiseModel, x, K0, cfg: PGConfig,
        objective: Callable[[np.ndarray], float] | None = None) -> OptimizerTrace:
    """Run the policy-gradient loop for ``cfg.episodes`` episodes.

    ``objective`` replaces the CVaR evaluation (used to test the estimator on
    known functions); it receives the perturbed gain and returns a float.
    """
    K = np.array(sys.gain(K0))
    if cfg.n_dim is not None and cfg.n_dim != K.size:
        raise InstanceError(f"n_dim={cfg.n_dim} does not match the {K.size} gain entries")
    if not is_mean_square_stable(sys, K):
        raise UnstableGain("initial gain is not mean-square stable")

    prng = rngmod.stream(cfg.seed, "perturbation")
    if objective is None:
        nrng = rngmod.stream(cfg.seed, "returns")
        W = None
        if cfg.crn:
            # stored as contiguous (N, n, M) panels so evaluation needs no copy
            W = np.ascontiguousarray(noise.sample((cfg.M, cfg.N), nrng).transpose(1, 2, 0)).transpose(2, 0, 1)

        def objective(K_hat):
            return evaluate_objective(sys, K_hat, noise, x, cfg.N, cfg.M, cfg.alpha, rng=nrng, W=W)

    trace = OptimizerTrace(K.copy())
    U, _ = _stable_perturbation(sys, K, cfg, prng, 0, trace)
    c_prev = objective(K + U)
    trace.bootstrap_objective = c_prev

    for t in range(1, cfg.episodes + 1):
        U, resamples = _stable_perturbation(sys, K, cfg, prng, t, trace)
        K_hat = K + U
        c_now = objective(K_hat)
        grad = residual_gradient(c_now, c_prev, U, cfg.delta)
        step = cfg.eta
        K_next = K - step * grad
        halvings = 0
        while not is_mean_square_stable(sys, K_next):
            halvings += 1
            if halvings > cfg.max_halvings:
                K_next = K.copy()
                break
            step *= 0.5
            K_next = K - step * grad
        if halvings:
            log.info("episode %d: step halved %d times to keep the loop stable", t, halvings)
        trace.records.append(EpisodeRecord(t, K, K_hat, c_now, grad, K_next, resamples, halvings))
        K = K_next
        c_prev = c_now
    return trace
