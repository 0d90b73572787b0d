import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distlqr import EmpiricalDistribution, InstanceError, RiskSpec, cvar, value_at_risk
from distlqr.risk import cvar_of_samples, tail_count

four = EmpiricalDistribution([4.0, 1.0, 3.0, 2.0])


def test_examples():
    assert cvar(four, 1.0) == 2.5
    assert cvar(four, RiskSpec(0.5)) == 3.5
    assert value_at_risk(four, 0.5) == 3.0
    assert value_at_risk(four, 1.0) == 1.0
    point = EmpiricalDistribution([7.25] * 9)
    for a in (0.01, 0.3, 1.0):
        assert cvar(point, a) == 7.25 and value_at_risk(point, a) == 7.25
    assert value_at_risk(EmpiricalDistribution([2.0]), 0.2) == 2.0


def test_tail_count_rounding():
    assert tail_count(30, 0.1) == 3
    assert tail_count(10, 0.01) == 1
    assert tail_count(4, 0.26) == 2
    assert tail_count(5, 1.0) == 5


def test_invalid_inputs():
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(InstanceError):
            RiskSpec(bad)
    with pytest.raises(InstanceError):
        RiskSpec(0.5, "interpolated")
    with pytest.raises(InstanceError):
        cvar(EmpiricalDistribution([]), 0.5)
    with pytest.raises(InstanceError):
        value_at_risk(EmpiricalDistribution([]), 0.5)


def test_unsorted_helper_matches_sorted_version():
    z = np.random.default_rng(0).standard_normal(1001)
    for a in (0.01, 0.4, 0.999, 1.0):
        assert cvar_of_samples(z, a) == pytest.approx(cvar(EmpiricalDistribution(z), a), rel=1e-12)


def test_ties_are_deterministic():
    d = EmpiricalDistribution([1.0, 2.0, 2.0, 2.0, 5.0])
    assert cvar(d, 0.4) == 3.5


def random_exact_sets(count, seed=2024):
    """Integer samples paired with risk levels whose tail counts are powers of two.

    Tail means are then sums of integers divided by 2^k, so shifting by an integer
    and scaling by a power of two are exact in floating point.
    """
    rng = np.random.default_rng(seed)
    for _ in range(count):
        M = int(rng.integers(1, 300))
        d = EmpiricalDistribution(rng.integers(-1000, 1000, size=M).astype(float))
        counts = [2 ** k for k in range(M.bit_length()) if 2 ** k <= M]
        alphas = sorted({m / M for m in counts})
        yield rng, d, alphas


def test_risk_axioms_hold_exactly_on_random_sets():
    for rng, d, alphas in random_exact_sets(1000):
        c = float(rng.integers(-50, 50))
        lam = float(2 ** int(rng.integers(-3, 4)))
        for a in alphas:
            base = cvar(d, a)
            assert cvar(d.shifted(c), a) == base + c
            assert cvar(d.scaled(lam), a) == lam * base
            assert base >= d.mean()
            assert base >= value_at_risk(d, a)
        vals = [cvar(d, a) for a in alphas]
        assert all(x >= y for x, y in zip(vals, vals[1:]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50),
       st.floats(0.001, 1.0), st.floats(0.001, 1.0))
def test_axioms_on_arbitrary_floats(xs, a1, a2):
    d = EmpiricalDistribution(xs)
    lo, hi = sorted((a1, a2))
    tol = 1e-9 * max(1.0, np.abs(d.samples).max())
    assert cvar(d, lo) >= cvar(d, hi) - tol
    assert cvar(d, lo) >= d.mean() - tol
    assert cvar(d, hi) >= value_at_risk(d, hi) - tol
    assert cvar(d.shifted(17.5), lo) == pytest.approx(cvar(d, lo) + 17.5, abs=4 * tol)
    assert cvar(d.scaled(3.0), lo) == pytest.approx(3.0 * cvar(d, lo), abs=4 * tol)
