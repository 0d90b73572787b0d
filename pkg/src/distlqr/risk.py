"""Upper-tail CVaR and VaR on empirical cost distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InstanceError
from .returns import EmpiricalDistribution


@dataclass(frozen=True)
class RiskSpec:
    alpha: float
    estimator: str = "tail_mean"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise InstanceError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.estimator != "tail_mean":
            raise InstanceError(f"unknown CVaR estimator {self.estimator!r}")


def tail_count(M: int, alpha: float) -> int:
    # guard against alpha*M landing a hair above an integer
    return min(M, max(1, math.ceil(alpha * M - 1e-9)))


def cvar_of_samples(samples, alpha: float) -> float:
    """Mean of the largest ceil(alpha*M) entries of an unsorted array."""
    z = np.asarray(samples, dtype=float)
    if z.size == 0:
        raise InstanceError("CVaR of an empty sample")
    if not 0.0 < alpha <= 1.0:
        raise InstanceError(f"alpha must lie in (0, 1], got {alpha}")
    m = tail_count(z.size, alpha)
    if m == z.size:
        return float(z.mean())
    return float(np.partition(z, z.size - m)[z.size - m:].mean())


def cvar(d: EmpiricalDistribution, spec: RiskSpec | float) -> float:
    """Average of the worst (largest) ceil(alpha*M) costs; alpha=1 gives the mean.

    Ties at the threshold are included up to the count, so duplicated samples
    give a deterministic answer.
    """
    alpha = spec.alpha if isinstance(spec, RiskSpec) else RiskSpec(float(spec)).alpha
    if d.count == 0:
        raise InstanceError("CVaR of an empty distribution")
    m = tail_count(d.count, alpha)
    return float(d.samples[d.count - m:].mean())


def value_at_risk(d: EmpiricalDistribution, alpha: float) -> float:
    """The smallest sample inside the CVaR tail."""
    RiskSpec(alpha)
    if d.count == 0:
        raise InstanceError("VaR of an empty distribution")
    return float(d.samples[d.count - tail_count(d.count, alpha)])
