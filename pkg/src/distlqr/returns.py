"""Truncated closed-form return G_N(x), empirical distributions and their comparison.

The truncated return for gain K, cost-to-go P and noise draws w_0..w_{N-1} is

    x'Px + sum_k g^{k+1} [ w_k'P w_k + 2 w_k'P A_K^{k+1} x + 2 w_k'P s_k ]

with s_k = sum_{tau<k} A_K^{k-tau} w_tau = A_K (s_{k-1} + w_{k-1}), s_0 = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InstanceError
from .linsys import ClosedLoop, LinearSystem, NoiseModel, close_loop
from .lqr import ValueCertificate, solve_lyapunov


@dataclass(frozen=True, eq=False)
class ReturnModel:
    sys: LinearSystem
    K: np.ndarray
    cert: ValueCertificate
    noise: NoiseModel
    N: int

    def __post_init__(self):
        K = self.sys.gain(self.K)
        object.__setattr__(self, "K", K)
        if int(self.N) != self.N or self.N < 0:
            raise InstanceError(f"truncation depth N must be a non-negative integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if self.noise.dim != self.sys.n:
            raise InstanceError(f"noise dimension {self.noise.dim} does not match state dimension {self.sys.n}")
        if not np.array_equal(self.cert.K, K):
            raise InstanceError("certificate was computed for a different gain")
        object.__setattr__(self, "_loop", close_loop(self.sys, K))

    @classmethod
    def build(cls, sys: LinearSystem, K, noise: NoiseModel, N: int) -> "ReturnModel":
        """Solve the Lyapunov equation for ``K`` and wrap everything up."""
        return cls(sys, K, solve_lyapunov(sys, K), noise, N)

    @property
    def loop(self) -> ClosedLoop:
        return self._loop

    @property
    def P(self) -> np.ndarray:
        return self.cert.P


def _state(model, x):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.sys.n:
        raise InstanceError(f"x has dimension {x.size}, expected {model.sys.n}")
    return x


def _noise_block(model, W):
    W = np.asarray(W, dtype=float)
    single = W.ndim == 2
    if single:
        W = W[None]
    if W.ndim != 3 or W.shape[2] != model.sys.n:
        raise InstanceError(f"noise must have shape (N, n) or (M, N, n), got {np.shape(W)}")
    return W, single


def truncated_return(model: ReturnModel, x, W, depth=None):
    """Evaluate the truncated closed form on given noise.

    ``W`` is (N, n) for one sequence or (M, N, n) for a batch; ``depth`` uses only
    the first ``depth`` draws of each sequence (default: all of them).
    """
    x = _state(model, x)
    W, single = _noise_block(model, W)
    N = W.shape[1] if depth is None else int(depth)
    if N > W.shape[1]:
        raise InstanceError(f"depth {N} exceeds the {W.shape[1]} supplied draws")
    P, A_K, g = model.P, model.loop.A_K, model.sys.gamma
    # (N, n, M) layout: each step works on contiguous n x M panels
    Wt = np.ascontiguousarray(W[:, :N, :].transpose(1, 2, 0))
    total = np.full(W.shape[0], float(x @ P @ x))
    s = np.zeros((x.size, W.shape[0]))
    drift = A_K @ x
    disc = g
    for k in range(N):
        w = Wt[k]
        Pw = np.dot(P, w)
        v = 2.0 * s
        v += w
        term = np.einsum("ij,ij->j", Pw, v)
        term += 2.0 * np.dot(drift, Pw)
        term *= disc
        total += term
        s = np.dot(A_K, s + w)
        drift = A_K @ drift
        disc *= g
    return float(total[0]) if single else total


def sample_return(model: ReturnModel, x, rng: np.random.Generator) -> float:
    """One draw of G_N(x)."""
    W = model.noise.sample((model.N,), rng)
    return truncated_return(model, x, W)


def sample_return_via_rollout(model: ReturnModel, x, noise_sequence) -> float:
    """Same quantity as :func:`truncated_return`, obtained by simulating the state.

    Uses x'Px + sum_t g^{t+1} (w_t'P w_t + 2 w_t'P A_K x_t) with x_{t+1} = A_K x_t + w_t.
    """
    x = _state(model, x)
    W = np.asarray(noise_sequence, dtype=float)
    W = W.reshape(-1, x.size) if W.size else np.zeros((0, x.size))
    if W.shape[0] != model.N:
        raise InstanceError(f"expected {model.N} noise vectors, got {W.shape[0]}")
    P, A_K, g = model.P, model.loop.A_K, model.sys.gamma
    total = float(x @ P @ x)
    state = x
    for t, w in enumerate(W):
        nxt = A_K @ state
        total += g ** (t + 1) * float(w @ P @ w + 2.0 * (w @ P @ nxt))
        state = nxt + w
    return total


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Sorted, read-only sample set."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).reshape(-1))
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def count(self) -> int:
        return self.samples.size

    def __len__(self):
        return self.samples.size

    def cdf(self, z):
        """Right-continuous empirical CDF (fraction of samples <= z)."""
        if self.count == 0:
            raise InstanceError("empty distribution")
        return np.searchsorted(self.samples, z, side="right") / self.count

    def mean(self) -> float:
        if self.count == 0:
            raise InstanceError("empty distribution")
        return float(self.samples.mean())

    def std_error(self) -> float:
        if self.count < 2:
            return float("nan")
        return float(self.samples.std(ddof=1) / np.sqrt(self.count))

    def shifted(self, c: float) -> "EmpiricalDistribution":
        return EmpiricalDistribution(self.samples + c)

    def scaled(self, lam: float) -> "EmpiricalDistribution":
        return EmpiricalDistribution(self.samples * lam)


def draw_noise(model: ReturnModel, M: int, rng: np.random.Generator, depth=None) -> np.ndarray:
    """(M, depth, n) block of disturbances; ``depth`` defaults to the model's N."""
    depth = model.N if depth is None else depth
    return model.noise.sample((M, depth), rng)


def build_empirical(model: ReturnModel, x, M: int, rng: np.random.Generator) -> EmpiricalDistribution:
    if M < 1:
        raise InstanceError("M must be at least 1")
    x = _state(model, x)
    if model.N == 0 or model.noise.is_zero:
        return EmpiricalDistribution(np.full(M, float(x @ model.P @ x)))
    return EmpiricalDistribution(truncated_return(model, x, draw_noise(model, M, rng)))


def ks_distance(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    """Exact two-sample Kolmogorov-Smirnov statistic."""
    if a.count == 0 or b.count == 0:
        raise InstanceError("KS distance needs two non-empty samples")
    z = np.concatenate([a.samples, b.samples])
    # integer arithmetic keeps the statistic an exact multiple of 1/lcm(na, nb)
    na, nb = a.count, b.count
    ca = np.searchsorted(a.samples, z, side="right").astype(np.int64)
    cb = np.searchsorted(b.samples, z, side="right").astype(np.int64)
    return float(np.max(np.abs(ca * nb - cb * na))) / (na * nb)


def histogram(d: EmpiricalDistribution, bins: int, range=None):
    """``(centers, frequencies)`` over evenly spaced bins; frequencies sum to one.

    Samples outside an explicit range are counted in the end bins.
    """
    if bins < 1:
        raise InstanceError("bins must be at least 1")
    if d.count == 0:
        raise InstanceError("empty distribution")
    if range is None:
        lo, hi = float(d.samples[0]), float(d.samples[-1])
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
    else:
        lo, hi = map(float, range)
        if not lo < hi:
            raise InstanceError(f"histogram range needs lo < hi, got ({lo}, {hi})")
    counts, edges = np.histogram(np.clip(d.samples, lo, hi), bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, counts / d.count


def density_bound_estimate(d: EmpiricalDistribution) -> float:
    """Largest histogram density with sqrt(M) bins; a plug-in for the density bound L0."""
    bins = max(1, int(np.ceil(np.sqrt(d.count))))
    centers, freq = histogram(d, bins)
    width = (centers[1] - centers[0]) if bins > 1 else 1.0
    return float(freq.max() / width)
