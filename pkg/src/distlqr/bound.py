"""Sup-CDF truncation error bound C * gamma^N for the truncated return."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import HypothesisViolation, InstanceError
from .linsys import LinearSystem, NoiseModel, close_loop
from .lqr import ValueCertificate, solve_lyapunov


@dataclass(frozen=True, eq=False)
class BoundInputs:
    """Everything the constant depends on. ``L0`` bounds the density of G_N; None if unknown."""

    cert: ValueCertificate
    rho_K: float
    gamma: float
    x: np.ndarray
    sigma0_sq: float
    mu0: float
    L0: float | None = None

    def __post_init__(self):
        if self.rho_K >= 1.0 or self.gamma * self.rho_K >= 1.0:
            raise HypothesisViolation(f"bound requires ||A_K||_2 < 1, got rho_K = {self.rho_K:.6g}")
        if not 0.0 < self.gamma < 1.0:
            raise InstanceError("gamma must lie in (0, 1)")
        if self.sigma0_sq < 0 or self.mu0 < 0:
            raise InstanceError("moment bounds must be non-negative")
        if self.L0 is not None and self.L0 <= 0:
            raise InstanceError("L0 must be positive when supplied")
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(-1))

    @classmethod
    def from_problem(cls, sys: LinearSystem, K, noise: NoiseModel, x, L0=None) -> "BoundInputs":
        cl = close_loop(sys, K)
        if cl.rho_K >= 1.0:
            raise HypothesisViolation(f"bound requires ||A_K||_2 < 1, got rho_K = {cl.rho_K:.6g}")
        return cls(solve_lyapunov(sys, K), cl.rho_K, sys.gamma, x, noise.sigma0_sq, noise.mu0, L0)


class BoundConstant(NamedTuple):
    C_over_L0: float
    C: float | None
    terms: tuple[float, float, float]


def bound_constant(b: BoundInputs) -> BoundConstant:
    """C / L0 as the sum of the quadratic, drift and cross-noise contributions."""
    g, rho = b.gamma, b.rho_K
    P_norm = float(np.linalg.norm(b.cert.P, 2))
    lam_max = float(np.linalg.eigvalsh(b.cert.P)[-1])
    quad = lam_max * b.sigma0_sq * g / (1.0 - g)
    drift = 2.0 * b.mu0 * P_norm * float(np.linalg.norm(b.x)) * g / (1.0 - g * rho)
    cross = 2.0 * b.mu0 ** 2 * P_norm * g * rho / ((1.0 - g) * (1.0 - rho))
    c = quad + drift + cross
    return BoundConstant(c, None if b.L0 is None else b.L0 * c, (quad, drift, cross))


def bound_at(b: BoundInputs, N: int) -> float:
    """C gamma^N, or (C/L0) gamma^N when no density bound was supplied."""
    if N < 1:
        raise InstanceError("the bound holds for N >= 1")
    const = bound_constant(b)
    c = const.C if const.C is not None else const.C_over_L0
    return c * b.gamma ** N
