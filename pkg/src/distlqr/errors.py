"""Exception hierarchy shared by the solvers, samplers and the CLI."""


class DistLQRError(Exception):
    """Base class for all package errors."""


class InstanceError(DistLQRError, ValueError):
    """Malformed problem instance (shapes, definiteness, parameter ranges)."""


class UnstableGain(DistLQRError):
    """The closed loop fails the stability predicate required by an operation."""


class NonConvergence(DistLQRError):
    """A fixed-point iteration did not reach its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StabilityBoundary(DistLQRError):
    """The optimizer could not find a stabilizing perturbation; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class HypothesisViolation(DistLQRError):
    """Inputs violate the contraction hypothesis of the truncation bound."""


class ConfigError(DistLQRError):
    """Invalid experiment configuration."""
