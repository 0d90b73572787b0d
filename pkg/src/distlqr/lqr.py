"""Discounted Lyapunov and Riccati equations solved by fixed-point iteration."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence, UnstableGain
from .linsys import LinearSystem, close_loop, is_bound_admissible

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 1_000_000
# iterates beyond this magnitude are treated as diverging
_DIVERGENCE_CAP = 1e100
_TINY = np.finfo(float).tiny


@dataclass(frozen=True, eq=False)
class ValueCertificate:
    """Cost-to-go matrix ``P`` for gain ``K``: E[return from x] = x'Px + const."""

    P: np.ndarray
    K: np.ndarray
    residual: float
    iterations: int

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.P @ x)


def _relative_step(new, old):
    d = new - old
    return math.sqrt(float(np.vdot(d, d)) / max(float(np.vdot(new, new)), _TINY))


def _error_estimate(step, prev_step):
    """Distance-to-fixed-point estimate step / (1 - r) from the observed contraction r."""
    if not math.isfinite(prev_step) or prev_step == 0.0:
        return step
    r = min(step / prev_step, 0.999999)
    return step / (1.0 - r) if r > 0 else step


def solve_lyapunov(sys: LinearSystem, K, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> ValueCertificate:
    """Solve P = Q_K + gamma A_K' P A_K by value iteration from P_0 = Q.

    Requires mean-square stability (gamma * spectral_radius(A_K)^2 < 1), which is
    exactly the condition for the iteration to contract.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    K = sys.gain(K)
    cl = close_loop(sys, K)
    if not is_bound_admissible(cl, sys.gamma).mean_square_stable:
        raise UnstableGain(
            f"closed loop is not mean-square stable: gamma*sr^2 = {sys.gamma * cl.spectral_radius ** 2:.6g}"
        )
    A_K, Q_K, g = cl.A_K, cl.Q_K, sys.gamma
    P = np.array(sys.Q)
    res = prev = np.inf
    for it in range(1, max_iter + 1):
        P_next = Q_K + g * (A_K.T @ P @ A_K)
        P_next = 0.5 * (P_next + P_next.T)
        prev, res = res, _relative_step(P_next, P)
        P = P_next
        if _error_estimate(res, prev) < tol:
            break
    else:
        raise NonConvergence(f"Lyapunov iteration stalled at residual {res:.3g}", res, max_iter)
    P.setflags(write=False)
    return ValueCertificate(P, K, res, it)


def optimal_gain(sys: LinearSystem, P) -> np.ndarray:
    """K = -gamma (R + gamma B'PB)^{-1} B'PA."""
    g = sys.gamma
    BtP = sys.B.T @ P
    return -g * np.linalg.solve(sys.R + g * BtP @ sys.B, BtP @ sys.A)


def riccati_map(sys: LinearSystem, P) -> np.ndarray:
    """One value-iteration step of the discounted Riccati equation."""
    A, B, g = sys.A, sys.B, sys.gamma
    AtPB = A.T @ P @ B
    gain_term = AtPB @ np.linalg.solve(sys.R + g * B.T @ P @ B, AtPB.T)
    P_next = sys.Q + g * (A.T @ P @ A) - g * g * gain_term
    return 0.5 * (P_next + P_next.T)


def riccati_iterates(sys: LinearSystem, steps: int):
    """First ``steps`` value-iteration matrices starting from Q (for monotonicity checks)."""
    P = np.array(sys.Q)
    out = [P]
    for _ in range(steps):
        P = riccati_map(sys, P)
        out.append(P)
    return out


def solve_riccati(sys: LinearSystem, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Optimal risk-neutral certificate and gain ``(cert, K_star)``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    P = np.array(sys.Q)
    res = prev = np.inf
    for it in range(1, max_iter + 1):
        P_next = riccati_map(sys, P)
        if not np.all(np.isfinite(P_next)) or np.abs(P_next).max() > _DIVERGENCE_CAP:
            raise NonConvergence(
                "Riccati iteration diverged; the discounted pair has no stabilizing solution", np.inf, it
            )
        prev, res = res, _relative_step(P_next, P)
        P = P_next
        if _error_estimate(res, prev) < tol:
            break
    else:
        raise NonConvergence(f"Riccati iteration stalled at residual {res:.3g}", res, max_iter)
    K = optimal_gain(sys, P)
    K.setflags(write=False)
    P.setflags(write=False)
    cl = close_loop(sys, K)
    if not is_bound_admissible(cl, sys.gamma).mean_square_stable:
        raise NonConvergence("Riccati fixed point does not yield a mean-square stable gain", res, it)
    return ValueCertificate(P, K, res, it), K
