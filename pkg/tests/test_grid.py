import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thinfilm.grid import (Field, TorusGrid, d_flux, fd_diff, integrate, lq_norm, read_snapshot,
                           sobolev_norm, spectral_diff, spectral_resample, write_snapshot)

TWO_PI = 2 * np.pi


def sample(n, func):
    return TorusGrid(n).sample(func)


@pytest.mark.parametrize("n", [6, 7, 9, 0])
def test_grid_rejects_small_or_odd(n):
    with pytest.raises(ValueError):
        TorusGrid(n)


def test_spacing_is_derived():
    g = TorusGrid(128)
    assert g.h * g.n == 1.0
    assert g.x[1] == g.h


def test_field_rejects_bad_values():
    g = TorusGrid(8)
    with pytest.raises(ValueError):
        Field(g, np.ones(7))
    with pytest.raises(ValueError):
        Field(g, [1, 2, 3, np.nan, 5, 6, 7, 8])
    f = Field(g, np.ones(8))
    with pytest.raises(ValueError):
        f.values[0] = 2.0


@pytest.mark.parametrize("order", [1, 2, 4])
def test_fd_of_constant_vanishes(order):
    f = sample(16, lambda x: 3.0 + 0 * x)
    assert np.all(fd_diff(f, order).values == 0)


def test_fd_second_order_eigenvalue():
    n = 128
    h = 1 / n
    f = sample(n, lambda x: np.sin(TWO_PI * x))
    expected = -(2 / h**2) * (1 - np.cos(TWO_PI * h)) * f.values
    np.testing.assert_allclose(fd_diff(f, 2).values, expected, rtol=0, atol=1e-9)


def test_fd_fourth_is_second_twice():
    f = sample(64, lambda x: x * (1 - x))
    assert np.array_equal(fd_diff(fd_diff(f, 2), 2).values, fd_diff(f, 4).values)


def test_fd_rejects_order():
    with pytest.raises(ValueError):
        fd_diff(sample(8, np.sin), 3)


def test_spectral_eigenfunction():
    f = sample(16, lambda x: np.sin(TWO_PI * x))
    np.testing.assert_allclose(spectral_diff(f, 4).values, TWO_PI**4 * f.values, rtol=0, atol=1e-10 * TWO_PI**4)


def test_spectral_mixed_first_derivative():
    f = sample(64, lambda x: np.sin(TWO_PI * x) + np.cos(2 * TWO_PI * x))
    x = f.grid.x
    exact = TWO_PI * np.cos(TWO_PI * x) - 2 * TWO_PI * np.sin(2 * TWO_PI * x)
    np.testing.assert_allclose(spectral_diff(f, 1).values, exact, atol=1e-11)


def test_spectral_of_constant():
    assert np.allclose(spectral_diff(sample(16, lambda x: 2 + 0 * x), 3).values, 0, atol=1e-12)


def test_integrate_examples():
    assert integrate(sample(32, lambda x: 1 + 0 * x)) == pytest.approx(1.0, abs=1e-15)
    assert abs(integrate(sample(32, lambda x: 1 + 0.5 * np.sin(TWO_PI * x))) - 1) < 1e-14
    assert abs(integrate(sample(32, lambda x: np.sin(TWO_PI * x) ** 2)) - 0.5) < 1e-14


def test_sobolev_examples():
    f = sample(64, lambda x: np.sin(TWO_PI * x))
    assert sobolev_norm(f, 0) == pytest.approx(np.sqrt(0.5), rel=1e-14)
    assert sobolev_norm(f, 1) == pytest.approx(np.sqrt((1 + 4 * np.pi**2) / 2), rel=1e-14)
    c = sample(16, lambda x: -3 + 0 * x)
    for s in (-2, 0, 1.5, 4):
        assert sobolev_norm(c, s) == pytest.approx(3.0, rel=1e-14)
    with pytest.raises(ValueError):
        sobolev_norm(f, 5)


def test_lq_examples():
    c = sample(16, lambda x: -2 + 0 * x)
    for q in (1, 2, 3.5, np.inf):
        assert lq_norm(c, q) == pytest.approx(2.0)
    f = sample(64, lambda x: np.sin(TWO_PI * x))
    assert lq_norm(f, np.inf) == pytest.approx(1.0, abs=1e-15)
    assert abs(lq_norm(f, 2) - sobolev_norm(f, 0)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2**31))
def test_telescoping_and_adjointness(seed):
    rng = np.random.default_rng(seed)
    n = 64
    F = rng.standard_normal(n)
    assert abs(integrate(d_flux(F, 1 / n))) <= n * np.finfo(float).eps * np.abs(F).max() * n
    g = TorusGrid(n)
    a, b = Field(g, rng.standard_normal(n)), Field(g, rng.standard_normal(n))

    def ip(u, v):
        return integrate(u.values * v.values)

    assert abs(ip(fd_diff(a, 2), b) - ip(a, fd_diff(b, 2))) < 1e-12 * n**2
    assert abs(ip(fd_diff(a, 1), b) + ip(a, fd_diff(b, 1))) < 1e-12 * n


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31))
def test_parseval_random(seed):
    f = Field(TorusGrid(32), np.random.default_rng(seed).standard_normal(32))
    assert abs(lq_norm(f, 2) - sobolev_norm(f, 0)) < 1e-12


def band_limited(n, coef):
    x = np.arange(n) / n
    k = np.arange(1, coef.size + 1)
    return Field(TorusGrid(n), np.real(coef @ np.exp(1j * TWO_PI * np.outer(k, x))))


def test_fd_matches_spectral_second_order():
    coef = np.random.default_rng(1).standard_normal(4) * (1 + 1j)
    errs = []
    grids = [32, 64, 128, 256]
    for n in grids:
        f = band_limited(n, coef)
        errs.append(np.max(np.abs(fd_diff(f, 2).values - spectral_diff(f, 2).values)))
    slope = -np.polyfit(np.log(grids), np.log(errs), 1)[0]
    assert slope >= 1.9


def test_resample_roundtrip():
    f = band_limited(32, np.array([1.0, 0.5j, 0.25]))
    up = spectral_resample(f, 128)
    np.testing.assert_allclose(up.values[::4], f.values, atol=1e-13)
    np.testing.assert_allclose(spectral_resample(up, 32).values, f.values, atol=1e-13)


def test_snapshot_roundtrip(tmp_path):
    f = band_limited(16, np.array([0.3, 0.1]))
    write_snapshot(f, tmp_path / "u.txt")
    g = read_snapshot(tmp_path / "u.txt")
    assert g.grid.n == 16 and np.array_equal(g.values, f.values)
