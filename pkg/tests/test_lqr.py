import math
import time

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from distlqr import LinearSystem, NonConvergence, UnstableGain, close_loop, solve_lyapunov, solve_riccati
from distlqr.lqr import riccati_iterates

from conftest import random_spd, random_stable_problem


def scalar_lyapunov(a, b, q, r, gamma, k):
    a_k = a + b * k
    return (q + r * k * k) / (1.0 - gamma * a_k * a_k)


def scalar_riccati(gamma):
    # A=B=Q=R=1: gamma P^2 - (2 gamma - 1) P - 1 = 0, positive root
    b = 2 * gamma - 1
    return (b + math.sqrt(b * b + 4 * gamma)) / (2 * gamma)


@pytest.mark.parametrize("gamma, expected", [(0.6, 1.468373), (0.8, 1.575609)])
def test_lyapunov_scalar_reference_gain(gamma, expected):
    cert = solve_lyapunov(LinearSystem.scalar(gamma=gamma), [[-0.4684]])
    oracle = scalar_lyapunov(1, 1, 1, 1, gamma, -0.4684)
    assert cert.P[0, 0] == pytest.approx(oracle, rel=1e-11)
    assert cert.P[0, 0] == pytest.approx(expected, abs=5e-6)
    assert cert.residual < 1e-12


def test_lyapunov_deadbeat_gain_is_one_step():
    sys_ = LinearSystem([[0.5]], [[1.0]], [[1.0]], [[2.0]], 0.9)
    cert = solve_lyapunov(sys_, [[-0.5]])
    assert cert.P[0, 0] == 1.0 + 2.0 * 0.25


def test_lyapunov_rejects_unstable():
    with pytest.raises(UnstableGain):
        solve_lyapunov(LinearSystem.scalar(gamma=0.6), [[0.5]])


def test_lyapunov_nonconvergence_carries_residual():
    with pytest.raises(NonConvergence) as info:
        solve_lyapunov(LinearSystem.scalar(gamma=0.99), [[-0.01]], max_iter=3)
    assert info.value.residual > 0


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_lyapunov_residual_invariant(n, p, seed):
    sys_, K = random_stable_problem(np.random.default_rng(seed), n, p)
    cert = solve_lyapunov(sys_, K)
    cl = close_loop(sys_, K)
    resid = cert.P - (cl.Q_K + sys_.gamma * cl.A_K.T @ cert.P @ cl.A_K)
    assert np.linalg.norm(resid) <= 1e-10 * np.linalg.norm(cert.P)
    np.testing.assert_array_equal(cert.P, cert.P.T)
    assert np.linalg.eigvalsh(cert.P)[0] > 0
    # independent route: scipy's direct solver on the sqrt(gamma)-scaled loop
    direct = scipy.linalg.solve_discrete_lyapunov(math.sqrt(sys_.gamma) * cl.A_K.T, cl.Q_K)
    np.testing.assert_allclose(cert.P, direct, rtol=1e-8, atol=1e-10)


def test_riccati_scalar_reference():
    cert, K = solve_riccati(LinearSystem.scalar(gamma=0.6))
    assert cert.P[0, 0] == pytest.approx(scalar_riccati(0.6), abs=1e-10)
    assert cert.P[0, 0] == pytest.approx(1.4683749, abs=1e-7)
    assert K[0, 0] == pytest.approx(-0.468375, abs=1e-6)
    assert K[0, 0] == pytest.approx(-0.4684, abs=1e-3)


def test_riccati_no_actuation():
    sys_ = LinearSystem([[0.5, 0.2], [0.0, 0.7]], np.zeros((2, 1)), np.eye(2), [[1.0]], 0.8)
    cert, K = solve_riccati(sys_)
    np.testing.assert_array_equal(K, np.zeros((1, 2)))
    np.testing.assert_allclose(cert.P, solve_lyapunov(sys_, np.zeros((1, 2))).P, rtol=1e-10)


def test_riccati_static_problem():
    sys_ = LinearSystem(np.zeros((2, 2)), np.ones((2, 1)), np.eye(2), [[1.0]], 0.6)
    cert, K = solve_riccati(sys_)
    np.testing.assert_allclose(cert.P, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(K, 0.0, atol=1e-15)


def test_riccati_unstabilizable_diverges_quickly():
    t0 = time.perf_counter()
    with pytest.raises(NonConvergence):
        solve_riccati(LinearSystem([[2.0]], [[0.0]], [[1.0]], [[1.0]], 0.6))
    assert time.perf_counter() - t0 < 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_riccati_properties(n, p, seed):
    rng = np.random.default_rng(seed)
    sys_ = LinearSystem(rng.standard_normal((n, n)) * 0.8, rng.standard_normal((n, p)),
                        random_spd(rng, n), random_spd(rng, p), rng.uniform(0.3, 0.95))
    tol = 1e-12
    cert, K = solve_riccati(sys_, tol=tol)
    g = math.sqrt(sys_.gamma)
    direct = scipy.linalg.solve_discrete_are(g * sys_.A, g * sys_.B, sys_.Q, sys_.R)
    np.testing.assert_allclose(cert.P, direct, rtol=1e-7, atol=1e-9)
    # the optimal gain's own Lyapunov cost is the Riccati solution; beyond
    # cond(P) ~ 1e3 rounding rather than iteration error dominates
    lyap = solve_lyapunov(sys_, K, tol=tol).P
    if np.linalg.cond(cert.P) < 1e3:
        assert np.linalg.norm(lyap - cert.P) <= 10 * tol * np.linalg.norm(cert.P)
    # value iteration from Q is monotone in the PSD order
    iters = riccati_iterates(sys_, 30)
    for P0, P1 in zip(iters, iters[1:]):
        assert np.linalg.eigvalsh(P1 - P0)[0] >= -1e-9 * max(1.0, np.abs(P1).max())
    # any other stabilizing gain costs at least as much
    for _ in range(5):
        K_other = K + 0.3 * rng.standard_normal(K.shape)
        try:
            P_other = solve_lyapunov(sys_, K_other).P
        except UnstableGain:
            continue
        x = rng.standard_normal(n)
        assert x @ P_other @ x >= x @ cert.P @ x - 1e-9 * max(1.0, x @ cert.P @ x)
