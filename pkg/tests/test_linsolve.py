import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import dense_operator, dense_solve
from thinfilm.linsolve import apply_operator, implicit_solve, residual

TWO_PI = 2 * np.pi


def test_stencil_matches_dense_operator():
    n = 16
    h = 1 / n
    a = 1 + np.random.default_rng(0).random(n)
    L = dense_operator(a, h)
    v = np.random.default_rng(1).standard_normal(n)
    np.testing.assert_allclose(apply_operator(a, v, h), L @ v, rtol=1e-12, atol=1e-12 * np.abs(L @ v).max())


def test_constant_coefficient_fourier():
    for n in (8, 32, 128):
        h = 1 / n
        x = np.arange(n) * h
        dt = 1e-5
        rhs = np.sin(TWO_PI * x)
        mu = ((2 - 2 * np.cos(TWO_PI * h)) / h**2) ** 2
        v = implicit_solve(np.ones(n), rhs, dt)
        np.testing.assert_allclose(v, rhs / (1 + dt * mu), rtol=0, atol=1e-10)


def test_identity_limit():
    rhs = np.cos(TWO_PI * np.arange(64) / 64) + 2
    assert np.max(np.abs(implicit_solve(np.ones(64), rhs, 1e-16) - rhs)) <= 1e-12
    assert np.array_equal(implicit_solve(np.ones(64), rhs, 0.0), rhs)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        implicit_solve(np.array([1.0, 0.0, 1, 1, 1, 1, 1, 1]), np.ones(8), 1e-3)
    with pytest.raises(ValueError):
        implicit_solve(np.ones(8), np.ones(8), -1e-3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([8, 16, 64]), st.floats(1e-8, 1e-2))
def test_matches_dense_and_residual(seed, n, dt):
    rng = np.random.default_rng(seed)
    a = np.exp(rng.normal(0, 1, n))
    rhs = rng.standard_normal(n)
    h = 1 / n
    v = implicit_solve(a, rhs, dt)
    ref = dense_solve(a, rhs, dt, h)
    assert np.max(np.abs(v - ref)) <= 1e-10 * max(1, np.abs(ref).max())
    assert residual(a, v, rhs, dt) <= 1e-10 * np.abs(rhs).max()
    assert abs(v.mean() - rhs.mean()) <= 1e-12 * max(1, np.abs(rhs).max())
