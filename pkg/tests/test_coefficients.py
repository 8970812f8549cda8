import numpy as np
import pytest

from thinfilm.coefficients import (PROBE_GRID, AssumptionError, CoefficientSet, CutoffSpec, LennardJonesType,
                                   MixedPowers, NonlinearInterp, PowerLaw, PurePower, derived_coefficients, eta,
                                   mobility_eval, mobility_from_dict, potential_eval, potential_from_dict,
                                   regularize, validate_mobility, validate_pair)

SPECS = [PowerLaw(2.0), PowerLaw(0.5), MixedPowers(((1.0, 3.0), (1.0, 2.0))),
         NonlinearInterp(1.0, PowerLaw(2.0), PowerLaw(3.0))]


def test_mobility_examples():
    assert mobility_eval(PowerLaw(2), 3.0) == pytest.approx((9, 6, 2))
    assert mobility_eval(MixedPowers(((1, 3), (1, 2))), 2.0) == pytest.approx((12, 16, 14))
    assert mobility_eval(NonlinearInterp(1.0, PowerLaw(2), PowerLaw(3)), 1.0)[0] == pytest.approx(0.5)


def test_mobility_rejects_nonpositive_argument():
    with pytest.raises(ValueError):
        mobility_eval(PowerLaw(2), np.array([1.0, 0.0]))


def test_validate_mobility_examples():
    rep = validate_mobility(PowerLaw(2))
    assert (rep.n, rep.nu) == (2, 2)
    rep = validate_mobility(NonlinearInterp(1.0, PowerLaw(2), PowerLaw(3)))
    assert (rep.n, rep.nu) == (3, 2)
    with pytest.raises(AssumptionError):
        validate_mobility(PowerLaw(6))


def test_potential_examples():
    assert potential_eval(LennardJonesType(8, 1), 1.0) == pytest.approx((1, -6, 66))
    assert potential_eval(PurePower(2.5), 4.0)[0] == pytest.approx(1 / 32)
    assert abs(potential_eval(LennardJonesType(8, 1), 1e6)[0] - 1) < 1e-11


@pytest.mark.parametrize("mob,theta,ok", [(PowerLaw(2), 8, True), (PowerLaw(0), 4, False), (PowerLaw(3), 2.1, True)])
def test_validate_pair_examples(mob, theta, ok):
    assert validate_pair(mob, LennardJonesType(theta, 1.0)).passed is ok


def test_lj_positivity_constrains_c():
    pot = LennardJonesType(8, 0.3)
    rep = validate_pair(PowerLaw(2), pot)
    assert not rep.passed and rep.minimal_c_theta > 0.3


def test_derived_examples():
    g, g1, Phi, Phis = derived_coefficients(PowerLaw(2), LennardJonesType(8, 1), 1.0)
    assert (g, g1, Phi, Phis) == pytest.approx((1, 1, 66, 66))
    r = np.logspace(-1, 2, 9)
    _, _, Phi, Phis = derived_coefficients(PowerLaw(2), LennardJonesType(8, 1), r, 2.0)
    np.testing.assert_allclose(Phis - Phi, 1.0, rtol=1e-9)
    _, _, Phi, Phis = derived_coefficients(PowerLaw(3), LennardJonesType(8, 1), 1.0, 8.0)
    assert Phis - Phi == pytest.approx(9.0)


@pytest.mark.parametrize("spec", SPECS)
def test_mobility_derivatives_match_differences(spec):
    r = PROBE_GRID[::7]
    step = 1e-5 * r
    m, m1, m2 = mobility_eval(spec, r)
    mp, m1p, _ = mobility_eval(spec, r + step)
    mm, m1m, _ = mobility_eval(spec, r - step)
    assert np.all(np.abs((mp - mm) / (2 * step) - m1) <= 1e-6 * (np.abs(m1) + np.abs(m / r)))
    assert np.all(np.abs((m1p - m1m) / (2 * step) - m2) <= 1e-6 * (np.abs(m2) + np.abs(m / r**2)))


@pytest.mark.parametrize("pot", [LennardJonesType(8, 1), PurePower(3.5)])
def test_potential_derivatives_match_differences(pot):
    r = np.logspace(-2, 3, 40)
    step = 1e-5 * r
    phi, d1, d2 = potential_eval(pot, r)
    fp = potential_eval(pot, r + step)
    fm = potential_eval(pot, r - step)
    assert np.all(np.abs((fp[0] - fm[0]) / (2 * step) - d1) <= 1e-6 * (np.abs(d1) + np.abs(phi / r)))
    assert np.all(np.abs((fp[1] - fm[1]) / (2 * step) - d2) <= 1e-6 * (np.abs(d2) + np.abs(phi / r**2)))


def test_g_squared_is_m():
    r = PROBE_GRID
    for spec in SPECS:
        m = mobility_eval(spec, r)[0]
        g = derived_coefficients(spec, None, r)[0]
        assert np.all(np.abs(g * g - m) <= 4 * np.spacing(m))


def test_stratonovich_shift_nonnegative():
    r = np.logspace(-3, 3, 50)
    for spec in SPECS:
        for C in (0.0, 0.3, 5.0):
            _, _, Phi, Phis = derived_coefficients(spec, LennardJonesType(8, 1), r, C)
            assert np.all(Phis >= Phi)


def test_cutoff_examples():
    mob, pot = PowerLaw(2), LennardJonesType(8, 1)
    m, Phi, g = regularize(mob, pot, CutoffSpec(1), np.array([3.0]))
    _, _, Phi3, _ = derived_coefficients(mob, pot, 3.0)
    assert m[0] == 9 and Phi[0] == pytest.approx(Phi3) and g[0] == 3
    assert tuple(np.ravel(regularize(mob, pot, CutoffSpec(1), np.array([0.5])))) == (1.0, 0.0, 0.0)
    m, _, _ = regularize(mob, pot, CutoffSpec(4), np.array([0.375]))
    assert 0 < eta(1.5) < 1
    assert 0.375**2 < m[0] < 1


def test_cutoff_properties():
    s = np.linspace(0, 3, 3001)
    e = eta(s)
    assert eta(1.0) == 0 and eta(2.0) == 1
    assert np.all(np.diff(e) >= 0)
    r = np.linspace(-2, 3, 501)
    for j in (1, 3):
        m, _, _ = regularize(PowerLaw(2), LennardJonesType(8, 1), CutoffSpec(j), r)
        assert np.all(m > 0)
        assert np.all(m[r <= 1 / j] == 1)
        hi = r >= 2 / j
        assert np.array_equal(m[hi], r[hi] ** 2)


def test_coefficient_set_matches_pieces():
    cs = CoefficientSet(PowerLaw(2), LennardJonesType(8, 1), None, 2.0)
    u = np.array([0.5, 1.0, 2.0])
    m, Phi, g = cs.evaluate(u)
    _, _, _, Phis = derived_coefficients(PowerLaw(2), LennardJonesType(8, 1), u, 2.0)
    np.testing.assert_allclose(Phi, Phis)
    np.testing.assert_allclose(g * g, m)


def test_dict_parsers_reject_unknown_keys():
    with pytest.raises(ValueError):
        mobility_from_dict({"kind": "power", "n": 2, "extra": 1})
    with pytest.raises(ValueError):
        potential_from_dict({"kind": "lennard-jones", "theta": 8, "bogus": 0})
    assert potential_from_dict({"kind": "none"}) is None
