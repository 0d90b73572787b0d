import math

import numpy as np
import pytest

from distlqr import (
    BoundInputs,
    EmpiricalDistribution,
    HypothesisViolation,
    InstanceError,
    LinearSystem,
    NoiseModel,
    ReturnModel,
    bound_at,
    bound_constant,
    ks_distance,
    truncated_return,
)
from distlqr import rng as rngmod
from distlqr.returns import density_bound_estimate, draw_noise

from conftest import SCALAR_K


@pytest.fixture
def scalar_inputs(scalar_sys, std_noise):
    return BoundInputs.from_problem(scalar_sys, [[SCALAR_K]], std_noise, [1.0])


def test_degenerate_noise_gives_zero(scalar_sys):
    b = BoundInputs.from_problem(scalar_sys, [[SCALAR_K]], NoiseModel.degenerate([0.0]), [3.0], L0=2.0)
    const = bound_constant(b)
    assert const.C_over_L0 == 0.0 and const.C == 0.0
    assert all(bound_at(b, N) == 0.0 for N in (1, 5, 40))


def test_scalar_value_and_terms(scalar_inputs):
    P, rho, g = 1.4683749474060304, 1 + SCALAR_K, 0.6
    mu = math.sqrt(2 / math.pi)
    quad = P * 1.0 * g / (1 - g)
    drift = 2 * mu * P * 1.0 * g / (1 - g * rho)
    cross = 2 * mu ** 2 * P * g * rho / ((1 - g) * (1 - rho))
    const = bound_constant(scalar_inputs)
    np.testing.assert_allclose(const.terms, (quad, drift, cross), rtol=1e-6)
    assert const.C_over_L0 == pytest.approx(7.45, abs=5e-3)
    assert const.C is None


def test_bound_at_examples(scalar_sys, std_noise, scalar_inputs):
    b = BoundInputs.from_problem(scalar_sys, [[SCALAR_K]], std_noise, [1.0], L0=1.0)
    assert bound_at(b, 15) == pytest.approx(7.45 * 0.6 ** 15, rel=1e-3)
    assert bound_at(b, 15) == pytest.approx(3.5e-3, abs=1e-4)
    assert bound_at(scalar_inputs, 15) == bound_at(b, 15)


def test_zero_state_drops_drift_term(scalar_sys):
    a = BoundInputs.from_problem(scalar_sys, [[SCALAR_K]], NoiseModel.standard_normal(1), [0.0])
    assert bound_constant(a).terms[1] == 0.0
    # doubling mu0 at fixed sigma0_sq quadruples the cross term only
    big = NoiseModel.gaussian([0.0], [[1.0]], sigma0_sq=4.0, mu0=2.0 * math.sqrt(2 / math.pi))
    small = NoiseModel.gaussian([0.0], [[1.0]], sigma0_sq=4.0, mu0=math.sqrt(2 / math.pi))
    tb = bound_constant(BoundInputs.from_problem(scalar_sys, [[SCALAR_K]], big, [0.0])).terms
    ts = bound_constant(BoundInputs.from_problem(scalar_sys, [[SCALAR_K]], small, [0.0])).terms
    assert tb[0] == ts[0] and tb[2] == pytest.approx(4 * ts[2], rel=1e-14)


def test_geometric_in_depth(scalar_inputs):
    vals = np.array([bound_at(scalar_inputs, N) for N in range(1, 30)])
    np.testing.assert_allclose(vals[1:] / vals[:-1], 0.6, rtol=1e-12)
    assert np.all(np.diff(vals) < 0)


def test_zero_depth_rejected(scalar_inputs):
    with pytest.raises(InstanceError):
        bound_at(scalar_inputs, 0)


def test_hypothesis_violation(std_noise):
    # spectral radius 0.5 but operator norm > 1: mean-square stable, bound not applicable
    sys_ = LinearSystem([[0.5, 3.0], [0.0, 0.5]], [[1.0], [0.0]], np.eye(2), [[1.0]], 0.6)
    with pytest.raises(HypothesisViolation):
        BoundInputs.from_problem(sys_, [[0.0, 0.0]], NoiseModel.standard_normal(2), [1.0, 0.0])
    with pytest.raises(HypothesisViolation):
        BoundInputs(None, 1.0, 0.6, [1.0], 1.0, 0.5)


def test_invalid_L0(scalar_sys, std_noise):
    with pytest.raises(InstanceError):
        BoundInputs.from_problem(scalar_sys, [[SCALAR_K]], std_noise, [1.0], L0=-1.0)


def test_empirical_dominance_with_estimated_density(scalar_sys, std_noise):
    M = 100_000
    ref_model = ReturnModel.build(scalar_sys, [[SCALAR_K]], std_noise, 200)
    W = draw_noise(ref_model, M, rngmod.stream(0, "dominance"))
    ref = EmpiricalDistribution(truncated_return(ref_model, [1.0], W))
    L0 = density_bound_estimate(ref)
    b = BoundInputs.from_problem(scalar_sys, [[SCALAR_K]], std_noise, [1.0], L0=L0)
    slack = 3 * math.sqrt(2 / M)
    for N in range(5, 21):
        ks = ks_distance(EmpiricalDistribution(truncated_return(ref_model, [1.0], W, depth=N)), ref)
        assert ks <= bound_at(b, N) + slack, (N, ks, bound_at(b, N))
