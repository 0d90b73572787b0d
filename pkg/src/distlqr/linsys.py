"""Problem instance: dynamics, cost weights, disturbance laws and stability predicates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InstanceError

PD_RELATIVE_TOL = 1e-10

NOISE_KINDS = ("gaussian", "uniform_box", "degenerate")


def _frozen(a, name, ndim=2) -> np.ndarray:
    try:
        arr = np.array(a, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"{name} is not numeric: {exc}") from None
    if ndim == 2 and arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if ndim == 1 and arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != ndim:
        raise InstanceError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InstanceError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def _symmetrize(M: np.ndarray) -> np.ndarray:
    S = 0.5 * (M + M.T)
    S.setflags(write=False)
    return S


def _check_pd(M: np.ndarray, name: str) -> None:
    eig = np.linalg.eigvalsh(M)
    top = float(eig[-1])
    if top <= 0 or float(eig[0]) <= PD_RELATIVE_TOL * top:
        raise InstanceError(f"{name} is not positive definite (eigenvalues {eig})")


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """x_{t+1} = A x_t + B u_t + w_t with stage cost x'Qx + u'Ru, discounted by gamma."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    gamma: float

    def __post_init__(self):
        A = _frozen(self.A, "A")
        B = _frozen(self.B, "B")
        Q = _frozen(self.Q, "Q")
        R = _frozen(self.R, "R")
        n = A.shape[0]
        if A.shape != (n, n):
            raise InstanceError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise InstanceError(f"B must have {n} rows, got {B.shape}")
        p = B.shape[1]
        if Q.shape != (n, n):
            raise InstanceError(f"Q must be {n}x{n}, got {Q.shape}")
        if R.shape != (p, p):
            raise InstanceError(f"R must be {p}x{p}, got {R.shape}")
        Q = _symmetrize(Q)
        R = _symmetrize(R)
        _check_pd(Q, "Q")
        _check_pd(R, "R")
        gamma = float(self.gamma)
        if not 0.0 < gamma < 1.0:
            raise InstanceError(f"gamma must lie in (0, 1), got {gamma}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @classmethod
    def scalar(cls, a=1.0, b=1.0, q=1.0, r=1.0, gamma=0.6) -> "LinearSystem":
        return cls([[a]], [[b]], [[q]], [[r]], gamma)

    def gain(self, K) -> np.ndarray:
        """Validate and freeze a p x n feedback gain for this system."""
        K = _frozen(K, "K")
        if K.shape != (self.p, self.n):
            raise InstanceError(f"K must be {self.p}x{self.n}, got {K.shape}")
        return K


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """i.i.d. disturbance law plus the moment bounds used by the truncation bound.

    ``sigma0_sq`` bounds E[w'w] and ``mu0`` bounds E[||w||]; both are derived from
    the law when omitted and may be overridden by the caller.
    """

    kind: str
    mean: np.ndarray | None = None
    covariance: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    point: np.ndarray | None = None
    sigma0_sq: float | None = None
    mu0: float | None = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InstanceError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if self.kind == "gaussian":
            if self.mean is None or self.covariance is None:
                raise InstanceError("gaussian noise needs mean and covariance")
            mean = _frozen(self.mean, "mean", ndim=1)
            cov = _symmetrize(_frozen(self.covariance, "covariance"))
            if cov.shape != (mean.size, mean.size):
                raise InstanceError(f"covariance must be {mean.size}x{mean.size}, got {cov.shape}")
            eig, vecs = np.linalg.eigh(cov)
            if eig[0] < -PD_RELATIVE_TOL * max(abs(eig[-1]), 1.0):
                raise InstanceError("covariance is not positive semidefinite")
            object.__setattr__(self, "mean", mean)
            object.__setattr__(self, "covariance", cov)
            # symmetric square root tolerates singular covariances
            root = eig.clip(min=0.0) ** 0.5
            factor = (vecs * root) @ vecs.T
            factor.setflags(write=False)
            object.__setattr__(self, "_factor", factor)
            s2 = float(np.trace(cov) + mean @ mean)
            if mean.size == 1 and not np.any(mean):
                # folded normal: E|w| = sigma*sqrt(2/pi)
                m1 = math.sqrt(float(cov[0, 0]) * 2.0 / math.pi)
            else:
                m1 = math.sqrt(s2)
        elif self.kind == "uniform_box":
            if self.lower is None or self.upper is None:
                raise InstanceError("uniform_box noise needs lower and upper")
            lo = _frozen(self.lower, "lower", ndim=1)
            hi = _frozen(self.upper, "upper", ndim=1)
            if lo.shape != hi.shape:
                raise InstanceError("lower and upper must have the same length")
            if np.any(lo > hi):
                raise InstanceError("uniform_box requires lower <= upper elementwise")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
            s2 = float(np.sum((lo * lo + lo * hi + hi * hi) / 3.0))
            m1 = math.sqrt(s2)
        else:
            if self.point is None:
                raise InstanceError("degenerate noise needs a point")
            pt = _frozen(self.point, "point", ndim=1)
            object.__setattr__(self, "point", pt)
            s2 = float(pt @ pt)
            m1 = float(np.linalg.norm(pt))

        sigma0_sq = s2 if self.sigma0_sq is None else float(self.sigma0_sq)
        mu0 = m1 if self.mu0 is None else float(self.mu0)
        if sigma0_sq < 0 or mu0 < 0:
            raise InstanceError("moment bounds must be non-negative")
        if self.sigma0_sq is not None and self.mu0 is not None and sigma0_sq < mu0 * mu0 * (1 - 1e-12):
            raise InstanceError(f"sigma0_sq={sigma0_sq} < mu0^2={mu0 * mu0} contradicts Jensen's inequality")
        object.__setattr__(self, "sigma0_sq", sigma0_sq)
        object.__setattr__(self, "mu0", mu0)

    @classmethod
    def gaussian(cls, mean, covariance, **bounds) -> "NoiseModel":
        return cls("gaussian", mean=mean, covariance=covariance, **bounds)

    @classmethod
    def standard_normal(cls, n: int = 1) -> "NoiseModel":
        return cls.gaussian(np.zeros(n), np.eye(n))

    @classmethod
    def uniform_box(cls, lower, upper, **bounds) -> "NoiseModel":
        return cls("uniform_box", lower=lower, upper=upper, **bounds)

    @classmethod
    def degenerate(cls, point, **bounds) -> "NoiseModel":
        return cls("degenerate", point=point, **bounds)

    @property
    def dim(self) -> int:
        if self.kind == "gaussian":
            return self.mean.size
        if self.kind == "uniform_box":
            return self.lower.size
        return self.point.size

    @property
    def is_zero(self) -> bool:
        """True when every draw is exactly the zero vector."""
        return self.kind == "degenerate" and not np.any(self.point)

    def expected_mean(self) -> np.ndarray:
        if self.kind == "gaussian":
            return self.mean
        if self.kind == "uniform_box":
            return 0.5 * (self.lower + self.upper)
        return self.point

    def second_moment(self) -> np.ndarray:
        """E[w w'] for the exact law (not the user-supplied bounds)."""
        m = self.expected_mean()
        if self.kind == "gaussian":
            return self.covariance + np.outer(m, m)
        if self.kind == "uniform_box":
            return np.diag((self.upper - self.lower) ** 2 / 12.0) + np.outer(m, m)
        return np.outer(m, m)

    def sample(self, shape, rng: np.random.Generator) -> np.ndarray:
        """Array of shape ``shape + (dim,)`` of i.i.d. draws."""
        if isinstance(shape, int):
            shape = (shape,)
        shape = tuple(shape)
        d = self.dim
        if self.kind == "gaussian":
            z = rng.standard_normal(shape + (d,))
            return self.mean + z @ self._factor
        if self.kind == "uniform_box":
            u = rng.random(shape + (d,))
            return self.lower + (self.upper - self.lower) * u
        return np.broadcast_to(self.point, shape + (d,)).copy()


def sample_noise(model: NoiseModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. disturbance vectors as a (count, dim) array."""
    if count < 0:
        raise InstanceError("count must be non-negative")
    return model.sample(count, rng)


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    A_K: np.ndarray
    Q_K: np.ndarray
    rho_K: float
    spectral_radius: float


class StabilityFlags(NamedTuple):
    mean_square_stable: bool
    norm_contractive: bool
    discount_contractive: bool


def close_loop(sys: LinearSystem, K) -> ClosedLoop:
    K = sys.gain(K)
    A_K = sys.A + sys.B @ K
    Q_K = sys.Q + K.T @ sys.R @ K
    A_K.setflags(write=False)
    Q_K.setflags(write=False)
    rho = float(np.linalg.norm(A_K, 2))
    sr = float(np.max(np.abs(np.linalg.eigvals(A_K))))
    # eigvals and svd round differently; keep the ordering invariant exact
    sr = min(sr, rho)
    return ClosedLoop(A_K, Q_K, rho, sr)


def is_bound_admissible(cl: ClosedLoop, gamma: float) -> StabilityFlags:
    """The three stability predicates; callers pick the one their feature needs."""
    return StabilityFlags(
        mean_square_stable=cl.spectral_radius ** 2 * gamma < 1.0,
        norm_contractive=cl.rho_K < 1.0,
        discount_contractive=gamma * cl.rho_K < 1.0,
    )


def is_mean_square_stable(sys: LinearSystem, K) -> bool:
    """gamma * spectral_radius(A + BK)^2 < 1, without the norm computations of close_loop."""
    A_K = sys.A + sys.B @ sys.gain(K)
    sr = float(np.max(np.abs(np.linalg.eigvals(A_K))))
    return sr * sr * sys.gamma < 1.0
