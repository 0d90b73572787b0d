"""Reference return distribution by direct closed-loop simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InstanceError, UnstableGain
from .linsys import LinearSystem, NoiseModel, close_loop, is_bound_admissible
from .lqr import solve_lyapunov
from .returns import EmpiricalDistribution

MIN_HORIZON = 50
DEFAULT_TAIL_TOL = 1e-8


def cost_scale(sys: LinearSystem, K, noise: NoiseModel, x) -> float:
    """Scale of the discounted cost: lambda_max(P) (||x||^2 + sigma0^2 / (1 - gamma))."""
    P = solve_lyapunov(sys, K).P
    x = np.asarray(x, dtype=float).reshape(-1)
    return float(np.linalg.eigvalsh(P)[-1] * (x @ x + noise.sigma0_sq / (1.0 - sys.gamma)))


def default_horizon(gamma: float, scale: float, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    """Smallest H >= 50 with gamma^H * scale / (1 - gamma) <= tail_tol."""
    if scale <= 0:
        return MIN_HORIZON
    H = math.ceil(math.log(tail_tol * (1.0 - gamma) / scale) / math.log(gamma))
    return max(MIN_HORIZON, H)


@dataclass(frozen=True)
class RolloutConfig:
    horizon: int
    samples: int
    tail_tol: float | None = None

    def __post_init__(self):
        if self.horizon < 1 or self.samples < 1:
            raise InstanceError("horizon and samples must both be at least 1")

    def tail_estimate(self, gamma: float, scale: float) -> float:
        """Heuristic size of the discarded tail, gamma^H * scale / (1 - gamma)."""
        return gamma ** self.horizon * scale / (1.0 - gamma)

    @classmethod
    def auto(cls, sys, K, noise, x, samples, tail_tol=DEFAULT_TAIL_TOL) -> "RolloutConfig":
        H = default_horizon(sys.gamma, cost_scale(sys, K, noise, x), tail_tol)
        return cls(H, samples, tail_tol)


def _checked_loop(sys, K):
    cl = close_loop(sys, K)
    if not is_bound_admissible(cl, sys.gamma).mean_square_stable:
        raise UnstableGain("closed loop is not mean-square stable")
    return cl


def rollout_batch(sys: LinearSystem, K, x, W, terminal_P=None):
    """Discounted stage costs along x_{t+1} = A_K x_t + w_t for each sequence in ``W``.

    ``W`` is (M, H, n). With ``terminal_P`` the term gamma^H x_H'Px_H is added.
    """
    cl = _checked_loop(sys, K)
    x = np.asarray(x, dtype=float).reshape(-1)
    W = np.asarray(W, dtype=float)
    if W.ndim != 3 or W.shape[2] != sys.n or x.size != sys.n:
        raise InstanceError("dimension mismatch between system, state and noise")
    M, H, _ = W.shape
    state = np.broadcast_to(x, (M, sys.n))
    total = np.zeros(M)
    disc = 1.0
    for t in range(H):
        total += disc * np.einsum("ij,ij->i", state @ cl.Q_K, state)
        state = state @ cl.A_K.T + W[:, t, :]
        disc *= sys.gamma
    if terminal_P is not None:
        total += disc * np.einsum("ij,ij->i", state @ terminal_P, state)
    return total


def rollout_return(sys: LinearSystem, K, noise: NoiseModel, x, horizon: int, rng) -> float:
    """One simulated discounted cost over ``horizon`` steps."""
    W = noise.sample((1, horizon), rng)
    return float(rollout_batch(sys, K, x, W)[0])


def build_mc_distribution(sys, K, noise, x, cfg: RolloutConfig, rng) -> EmpiricalDistribution:
    _checked_loop(sys, K)
    W = noise.sample((cfg.samples, cfg.horizon), rng)
    return EmpiricalDistribution(rollout_batch(sys, K, x, W))
