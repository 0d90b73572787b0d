import numpy as np
import pytest

from distlqr import LinearSystem, NoiseModel

SCALAR_K = -0.4684


@pytest.fixture
def scalar_sys():
    return LinearSystem.scalar(gamma=0.6)


@pytest.fixture
def std_noise():
    return NoiseModel.standard_normal(1)


@pytest.fixture
def zero_noise():
    return NoiseModel.degenerate([0.0])


def random_spd(rng, n, floor=0.1):
    X = rng.standard_normal((n, n))
    return X @ X.T + floor * np.eye(n)


def random_stable_problem(rng, n, p, rho=0.95, gamma=None):
    """System and gain with ||A + BK||_2 = u * rho for u ~ U(0, 1)."""
    B = rng.standard_normal((n, p))
    K = rng.standard_normal((p, n))
    target = rng.standard_normal((n, n))
    target *= rng.uniform(0.0, 1.0) * rho / np.linalg.norm(target, 2)
    A = target - B @ K
    gamma = rng.uniform(0.3, 0.95) if gamma is None else gamma
    return LinearSystem(A, B, random_spd(rng, n), random_spd(rng, p), gamma), K


_ACCEPTANCE = []


def record_criterion(number, title, ok, detail):
    _ACCEPTANCE.append((number, title, ok, detail))
    print(f"[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
