import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thinfilm.coefficients import LennardJonesType, MixedPowers, PowerLaw
from thinfilm.grid import Field, TorusGrid, spectral_diff_array
from thinfilm.functionals import (CSV_HEADER, EntropyDensity, alpha_entropy, check_admissible,
                                  check_sup_bound_explicit, diagnostics_row, dissipations, energy, entropy_density,
                                  entropy_quartic_coefficient, gamma_range, mass, random_positive_corpus,
                                  sup_bound_ratios, write_diagnostics_csv)

TWO_PI = 2 * np.pi
LJ = LennardJonesType(8, 1)


def profile(n, a=0.25, level=1.0):
    return level + a * np.sin(TWO_PI * np.arange(n) / n)


def test_mass_examples():
    assert mass(np.ones(16)) == pytest.approx(1.0)
    assert abs(mass(profile(64, 0.5)) - 1) < 1e-14


def test_energy_examples():
    assert energy(np.full(32, 2.0), LJ) == pytest.approx(2.0**-8 - 0.25 + 1, rel=1e-14)
    assert energy(np.ones(32), LJ) == pytest.approx(1.0, rel=1e-14)
    grad = [energy(profile(n, 0.1), None) for n in (64, 128, 256, 512)]
    target = 0.25 * 0.1**2 * TWO_PI**2
    assert target == pytest.approx(0.098696, rel=1e-5)
    errs = [abs(g - target) for g in grad]
    assert errs[-1] < 2e-6 and all(3.9 < a / b < 4.1 for a, b in zip(errs, errs[1:]))
    with pytest.raises(ValueError):
        energy(np.array([1.0, 0.0, 1, 1, 1, 1, 1, 1]), LJ)


def test_entropy_examples():
    ed = EntropyDensity(PowerLaw(2), 0.0)
    assert entropy_density(ed, 2.0) == pytest.approx(0.30685281944, abs=1e-11)
    assert entropy_density(EntropyDensity(PowerLaw(1), 0.0), math.e) == pytest.approx(1.0, rel=1e-14)
    for mob in (PowerLaw(2), PowerLaw(3), MixedPowers(((1, 3), (1, 2)))):
        for beta in (-0.4, 0.5):
            assert EntropyDensity(mob, beta)(1.0, method="quadrature") == 0.0
    u = Field(TorusGrid(16), np.full(16, 2.0))
    assert alpha_entropy(u, ed) == pytest.approx(1 - math.log(2), rel=1e-13)
    assert alpha_entropy(np.ones(16), ed) == 0.0


def test_entropy_rejects():
    with pytest.raises(ValueError):
        EntropyDensity(PowerLaw(2), 1.0)
    with pytest.raises(ValueError):
        EntropyDensity(PowerLaw(2), 0.0)(np.array([1.0, -1.0]))


@pytest.mark.parametrize("n", [0, 2, 4])
@pytest.mark.parametrize("beta", [-0.4, 0.9])
def test_entropy_closed_vs_quadrature_sample(n, beta):
    ed = EntropyDensity(PowerLaw(n), beta)
    r = np.logspace(-3, 3, 25)
    closed = ed(r, method="closed")
    quad = ed(r, method="quadrature")
    np.testing.assert_allclose(quad, closed, rtol=1e-10, atol=1e-300)


def test_entropy_convex():
    r = np.linspace(0.05, 20, 400)
    for mob in (PowerLaw(2), MixedPowers(((1, 3), (1, 2)))):
        h = EntropyDensity(mob, 0.25)(r, method="quadrature")
        assert np.min(h[:-2] - 2 * h[1:-1] + h[2:]) >= -1e-12


def test_entropy_table_matches_quadrature():
    ed = EntropyDensity(MixedPowers(((1, 3), (1, 2))), 0.0)
    r = np.array([0.013, 0.37, 1.9, 55.0])
    np.testing.assert_allclose(ed(r, method="table"), ed(r, method="quadrature"), rtol=1e-5)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_alpha_entropy_dual_path(seed):
    u = random_positive_corpus(1, 64, seed)[0]
    ed = EntropyDensity(PowerLaw(3), 0.5)
    assert alpha_entropy(u, ed, "quadrature") == pytest.approx(alpha_entropy(u, ed, "closed"), rel=1e-10, abs=1e-14)


def test_gamma_range_examples():
    lo, hi = gamma_range(0.0)
    # sqrt((1 - 0)(1 + 0)) = 1
    assert (lo, hi) == pytest.approx((1 / 3, 1.0), abs=1e-15)
    lo, hi = gamma_range(0.5)
    assert (lo, hi) == pytest.approx(((2.5 - 1) / 3, (2.5 + 1) / 3), abs=1e-15)
    lo, hi = gamma_range(1 - 1e-12)
    assert hi - lo < 1e-5 and lo == pytest.approx(1, abs=1e-5)
    lo, hi = gamma_range(-0.5 + 1e-12)
    assert lo == pytest.approx(0.5, abs=1e-5) and hi == pytest.approx(0.5, abs=1e-5)
    with pytest.raises(ValueError):
        gamma_range(1.0)


@pytest.mark.parametrize("beta", [-0.4, 0.0, 0.5, 0.9])
def test_quartic_coefficient_vanishes_at_endpoints(beta):
    for g in gamma_range(beta):
        assert abs(entropy_quartic_coefficient(beta, g)) < 1e-12
    assert entropy_quartic_coefficient(beta, sum(gamma_range(beta)) / 2) > 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([-0.4, 0.0, 0.5]), st.floats(0.0, 1.0))
def test_integration_by_parts_identity(seed, beta, t):
    # spectral evaluation of int u^b u_x u_xxx = -g^-2 int u^{b+2-2g} (u^g)_xx^2 - c int u^{b-2} u_x^4
    lo, hi = gamma_range(beta)
    g = lo + t * (hi - lo)
    u = random_positive_corpus(1, 256, seed, n_modes=4)[0]
    d = lambda v, k: spectral_diff_array(v, k)
    lhs = np.mean(u**beta * d(u, 1) * d(u, 3))
    rhs = -np.mean(u ** (beta + 2 - 2 * g) * d(u**g, 2) ** 2) / g**2 \
        - entropy_quartic_coefficient(beta, g) * np.mean(u ** (beta - 2) * d(u, 1) ** 4)
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-10 * np.mean(u**beta * d(u, 2) ** 2))
    # at either endpoint the Bernis-type residual is nonnegative
    for ge in (lo, hi):
        resid = -np.mean(u**beta * d(u, 1) * d(u, 3)) - np.mean(u ** (beta + 2 - 2 * ge) * d(u**ge, 2) ** 2) / ge**2
        assert resid >= -1e-8 * max(1.0, abs(lhs))


def test_dissipations_examples():
    assert dissipations(np.full(32, 1.3), PowerLaw(2), LJ, 0.0, 1.0) == (0.0, 0.0, 0.0, 0.0)
    errs = []
    for n in (64, 128, 256):
        u = profile(n)
        D3 = dissipations(u, PowerLaw(2), LJ, 0.0, 1.0)[3]
        exact = np.mean(u**-2.0 * spectral_diff_array(u, 1) ** 4)
        errs.append(abs(D3 - exact))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5
    u = profile(64)
    for beta in (-0.4, 0.0, 0.5):
        g = sum(gamma_range(beta)) / 2
        a = dissipations(u, PowerLaw(2), LJ, beta, g)[3]
        b = dissipations(2 * u, PowerLaw(2), LJ, beta, g)[3]
        assert b == pytest.approx(2 ** (beta + 2) * a, rel=1e-12)
    with pytest.raises(ValueError):
        dissipations(u, PowerLaw(2), LJ, 0.0, 1.2)


def test_sup_bound_explicit_examples():
    c = 1.7
    chk = check_sup_bound_explicit(np.full(32, c), 0.0, 8)
    assert chk.lhs == pytest.approx(c**-8) and chk.rhs == pytest.approx(2 * c**-8) and chk.passed
    assert check_sup_bound_explicit(profile(256, 0.9), 0.0, 3).passed
    for f in random_positive_corpus(200, 128, seed=3):
        assert check_sup_bound_explicit(f, 0.0, 8).passed


def test_sup_bound_ratios_examples():
    assert sup_bound_ratios(np.ones(16), 0.0, 8).quartic == pytest.approx(1.0)
    big = [sup_bound_ratios(lam * profile(128, 0.5), 0.0, 8).quartic for lam in (1e2, 1e4, 1e6)]
    assert max(big) < 10 * min(big)


def test_admissible_examples():
    rep = check_admissible(2, 0, 1, 2, 1)
    assert rep.admissible and rep.trace_smoothness == pytest.approx(1.0)
    rep = check_admissible(2, 0, 0.4, 2, 1)
    assert not rep.admissible and not rep.trace_condition
    rep = check_admissible(4, 0, 1, 2, 2)
    assert rep.admissible and rep.trace_smoothness == pytest.approx(2.0)
    assert not check_admissible(4, 1.0, 1, 2, 1).weight_condition


def test_diagnostics_csv(tmp_path):
    ed = EntropyDensity(PowerLaw(2), 0.0)
    row = diagnostics_row(0.5, profile(32), PowerLaw(2), LJ, ed, 1.0, 1e-4)
    assert all(np.isfinite(float(x)) for x in row.csv().split(","))
    bad = diagnostics_row(0.5, profile(32, 2.0), PowerLaw(2), LJ, ed, 1.0, 1e-4)
    assert math.isnan(bad.energy) and bad.min_u < 0
    write_diagnostics_csv([row], tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER == "t,mass,min_u,max_u,energy,H_beta,D_energy,D1,D2,D3,h1_norm,dt"
    assert [float(v) for v in lines[1].split(",")][0] == 0.5
