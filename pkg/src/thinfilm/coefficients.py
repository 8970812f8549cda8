"""Mobility and interface-potential families, derived coefficients and the cutoff regularization.

All specs are immutable and evaluate vectorized over positive arrays, returning the
value together with two analytic derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

PROBE_GRID = np.logspace(-8, 8, 400)


class AssumptionError(ValueError):
    """A coefficient violates the structural assumptions it is validated against."""


def _positive(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise ValueError("coefficients are only defined for strictly positive arguments")
    return r


# -- mobility ------------------------------------------------------------------

@dataclass(frozen=True)
class PowerLaw:
    n: float

    def _eval(self, r):
        n = self.n
        return r**n, n * r ** (n - 1), n * (n - 1) * r ** (n - 2)

    @property
    def exponents(self):
        return float(self.n), float(self.n)


@dataclass(frozen=True)
class MixedPowers:
    """``m(r) = sum_j c_j r^{n_j}``."""

    terms: tuple

    def __post_init__(self):
        terms = tuple((float(c), float(n)) for c, n in self.terms)
        if not terms:
            raise ValueError("MixedPowers needs at least one term")
        if any(c <= 0 for c, _ in terms):
            raise ValueError("MixedPowers coefficients must be positive")
        object.__setattr__(self, "terms", terms)

    def _eval(self, r):
        m = np.zeros_like(r)
        m1 = np.zeros_like(r)
        m2 = np.zeros_like(r)
        for c, n in self.terms:
            m = m + c * r**n
            m1 = m1 + c * n * r ** (n - 1)
            m2 = m2 + c * n * (n - 1) * r ** (n - 2)
        return m, m1, m2

    @property
    def exponents(self):
        ns = [n for _, n in self.terms]
        return min(ns), max(ns)


@dataclass(frozen=True)
class NonlinearInterp:
    """``m_delta = m m~ / (delta m + m~)`` for two admissible mobilities."""

    delta: float
    inner: "MobilitySpec"
    inner2: "MobilitySpec"

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("interpolation parameter delta must be positive")

    def _eval(self, r):
        a, a1, a2 = self.inner._eval(r)
        b, b1, b2 = self.inner2._eval(r)
        d = self.delta
        N, N1, N2 = a * b, a1 * b + a * b1, a2 * b + 2 * a1 * b1 + a * b2
        D, D1, D2 = d * a + b, d * a1 + b1, d * a2 + b2
        m = N / D
        m1 = (N1 * D - N * D1) / D**2
        m2 = (N2 * D - N * D2) / D**2 - 2 * D1 * (N1 * D - N * D1) / D**3
        return m, m1, m2

    @property
    def exponents(self):
        n1, nu1 = self.inner.exponents
        n2, nu2 = self.inner2.exponents
        return max(n1, n2), min(nu1, nu2)


MobilitySpec = Union[PowerLaw, MixedPowers, NonlinearInterp]


def mobility_eval(spec: MobilitySpec, r):
    """Return ``(m, m', m'')`` at ``r > 0`` (scalar or array)."""
    r = _positive(r)
    return spec._eval(r)


@dataclass
class MobilityReport:
    n: float
    nu: float
    first_derivative_const: float
    second_derivative_const: float
    slope_at_zero: float
    slope_at_infinity: float


def _log_slopes(r, m):
    lr, lm = np.log(r), np.log(m)
    return np.diff(lm) / np.diff(lr)


def validate_mobility(spec: MobilitySpec) -> MobilityReport:
    """Check the mobility assumptions on the probe grid and return ``(n, nu)`` with measured constants.

    Raises
    ------
    AssumptionError
        If ``m`` is not positive on the probe grid, the growth exponent is not in
        ``[0, 6)``, or the measured log-slopes at either end of the grid are
        incompatible with the degeneracy/growth bounds.
    """
    if isinstance(spec, PowerLaw) and not 0 <= spec.n < 6:
        raise AssumptionError(f"power-law mobility needs n in [0, 6), got n={spec.n}")
    if isinstance(spec, MixedPowers):
        ns = [n for _, n in spec.terms]
        if max(ns) < 0:
            raise AssumptionError("mixed powers need max_j n_j >= 0 so that m stays bounded below at infinity")
        if max(ns) >= 6:
            raise AssumptionError(f"mixed powers need all n_j < 6, got {max(ns)}")
    if isinstance(spec, NonlinearInterp):
        validate_mobility(spec.inner)
        validate_mobility(spec.inner2)

    n, nu = spec.exponents
    if not 0 <= nu < 6:
        raise AssumptionError(f"growth exponent must lie in [0, 6), got {nu}")

    r = PROBE_GRID
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        m, m1, m2 = spec._eval(r)
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        raise AssumptionError("mobility must be finite and positive on the probe grid")

    slopes = _log_slopes(r, m)
    s_small = float(slopes[0])
    s_large = float(slopes[-1])
    tol = 1e-2
    if s_small < n - tol or s_small > n + 2 + tol:
        raise AssumptionError(f"log-slope {s_small:.4g} near 0 is incompatible with degeneracy exponent {n}")
    if s_large > nu + tol or s_large < -tol:
        raise AssumptionError(f"log-slope {s_large:.4g} near infinity is incompatible with growth exponent {nu}")

    c1 = float(np.max(np.abs(m1) * r / m))
    c2 = float(np.max(np.abs(m2) * r**2 / m))
    return MobilityReport(float(n), float(nu), c1, c2, s_small, s_large)


# -- interface potential -------------------------------------------------------

@dataclass(frozen=True)
class LennardJonesType:
    """``phi(r) = r^-theta - r^-2 + c_theta``."""

    theta: float
    c_theta: float = 1.0

    def __post_init__(self):
        if not self.theta > 2:
            raise ValueError("Lennard-Jones type potential needs theta > 2")

    def _eval(self, r):
        t = self.theta
        phi = r**-t - r**-2 + self.c_theta
        d1 = -t * r ** (-t - 1) + 2 * r**-3
        d2 = t * (t + 1) * r ** (-t - 2) - 6 * r**-4
        return phi, d1, d2

    def minimal_c_theta(self) -> float:
        """Smallest constant keeping phi >= 0; the minimum sits at r^(theta-2) = theta/2."""
        t = self.theta
        r_star = (t / 2.0) ** (1.0 / (t - 2.0))
        return float(-(r_star**-t - r_star**-2))


@dataclass(frozen=True)
class PurePower:
    """``phi(r) = r^-theta``."""

    theta: float

    def __post_init__(self):
        if not self.theta > 2:
            raise ValueError("pure-power potential needs theta > 2")

    def _eval(self, r):
        t = self.theta
        return r**-t, -t * r ** (-t - 1), t * (t + 1) * r ** (-t - 2)

    def minimal_c_theta(self) -> float:
        return 0.0


PotentialSpec = Union[LennardJonesType, PurePower]


def potential_eval(spec: Optional[PotentialSpec], r):
    """Return ``(phi, phi', phi'')``; ``spec=None`` is the zero potential."""
    r = _positive(r)
    if spec is None:
        z = np.zeros_like(r)
        return z, z, z
    return spec._eval(r)


@dataclass
class PairReport:
    passed: bool
    theta: float
    n: Optional[float]
    theta_threshold: Optional[float]
    min_phi: float = float("nan")
    minimal_c_theta: float = float("nan")
    phi_lower_const: float = float("nan")
    phi2_upper_const: float = float("nan")
    phi2_lower_const: float = float("nan")
    c0: float = float("nan")
    messages: list = field(default_factory=list)


def validate_pair(mob: MobilitySpec, pot: PotentialSpec) -> PairReport:
    """Check ``theta > max{2, 6 - 2n}`` and measure the potential sandwich constants.  Never raises."""
    theta = float(pot.theta)
    try:
        n = validate_mobility(mob).n
    except (AssumptionError, ValueError) as exc:
        return PairReport(False, theta, None, None, messages=[f"mobility: {exc}"])

    threshold = max(2.0, 6.0 - 2.0 * n)
    rep = PairReport(theta > threshold, theta, n, threshold)
    if not rep.passed:
        rep.messages.append(f"theta={theta:g} must exceed max(2, 6-2n) = {threshold:g}")

    r = PROBE_GRID
    with np.errstate(over="ignore", under="ignore"):
        phi, _, phi2 = pot._eval(r)
        scale = r ** (-theta - 2)
    rep.min_phi = float(np.min(phi))
    rep.minimal_c_theta = pot.minimal_c_theta()
    if rep.min_phi <= 0:
        rep.passed = False
        rep.messages.append(f"phi is not positive on the probe grid (min {rep.min_phi:.3g}); "
                            f"c_theta must exceed {rep.minimal_c_theta:.6g}")
    rep.phi_lower_const = float(np.min(phi * r**theta))
    ratio = phi2 / scale
    rep.phi2_upper_const = float(np.max(ratio))
    # lower constant from the small-r behaviour, c0 absorbs the rest of the range
    rep.phi2_lower_const = 0.5 * float(ratio[0])
    rep.c0 = float(max(0.0, np.max(rep.phi2_lower_const * scale - phi2)))
    if not (rep.phi2_lower_const > 0 and np.isfinite(rep.phi2_upper_const)):
        rep.passed = False
        rep.messages.append("phi'' is not comparable to r^(-theta-2) near 0")
    return rep


# -- derived coefficients --------------------------------------------------------

def derived_coefficients(mob: MobilitySpec, pot: Optional[PotentialSpec], r, C_intensity: float = 0.0):
    """Return ``(g, g', Phi, Phi_strat)`` with ``g = sqrt(m)``, ``Phi = m phi''`` and the
    constant-intensity Stratonovich shift ``Phi_strat = Phi + (C/8) (m')^2 / m``."""
    if C_intensity < 0:
        raise ValueError("noise intensity must be nonnegative")
    m, m1, _ = mobility_eval(mob, r)
    _, _, phi2 = potential_eval(pot, r)
    g = np.sqrt(m)
    g1 = m1 / (2.0 * g)
    Phi = m * phi2
    Phi_strat = Phi + (C_intensity / 8.0) * m1**2 / m
    return g, g1, Phi, Phi_strat


@dataclass(frozen=True)
class CutoffSpec:
    j: int

    def __post_init__(self):
        if int(self.j) != self.j or self.j < 1:
            raise ValueError("cutoff index j must be a positive integer")


def _rho(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def eta(s):
    """Smooth nondecreasing step: 0 for s <= 1, 1 for s >= 2."""
    s = np.asarray(s, dtype=float)
    a = _rho(s - 1.0)
    b = _rho(2.0 - s)
    return a / (a + b)


def regularize(mob: MobilitySpec, pot: Optional[PotentialSpec], cut: CutoffSpec, r, C_intensity: float = 0.0):
    """Cut-off coefficients ``(m_j, Phi_j, g_j)`` defined for every real ``r``.

    ``Phi_j`` uses the Stratonovich-shifted Phi when ``C_intensity > 0``.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    e = eta(cut.j * r)
    m_j = np.ones_like(r)
    Phi_j = np.zeros_like(r)
    g_j = np.zeros_like(r)
    live = e > 0
    if np.any(live):
        rl = r[live]
        m, _, _ = mobility_eval(mob, rl)
        g, _, Phi, Phi_s = derived_coefficients(mob, pot, rl, C_intensity)
        el = e[live]
        m_j[live] = el * m + (1.0 - el)
        Phi_j[live] = el * (Phi_s if C_intensity > 0 else Phi)
        g_j[live] = el * g
    return m_j, Phi_j, g_j


class CoefficientSet:
    """Bundles the coefficients the solver needs: nodal ``m``, effective ``Phi`` and ``g``.

    ``C_intensity`` is the constant-intensity value entering the Stratonovich shift;
    zero gives the Ito coefficients.
    """

    def __init__(self, mob: MobilitySpec, pot: Optional[PotentialSpec],
                 cutoff: Optional[CutoffSpec] = None, C_intensity: float = 0.0):
        self.mob = mob
        self.pot = pot
        self.cutoff = cutoff
        self.C_intensity = float(C_intensity)

    def evaluate(self, u: np.ndarray):
        if self.cutoff is not None:
            return regularize(self.mob, self.pot, self.cutoff, u, self.C_intensity)
        m, m1, _ = mobility_eval(self.mob, u)
        _, _, phi2 = potential_eval(self.pot, u)
        Phi = m * phi2
        if self.C_intensity > 0:
            Phi = Phi + (self.C_intensity / 8.0) * m1**2 / m
        return m, Phi, np.sqrt(m)

    def g(self, u: np.ndarray) -> np.ndarray:
        return self.evaluate(u)[2]


# -- (de)serialization of the [mobility] / [potential] / [cutoff] tables ------------

def mobility_from_dict(d: dict) -> MobilitySpec:
    d = dict(d)
    kind = d.pop("kind", "power")
    if kind == "power":
        spec = PowerLaw(float(d.pop("n")))
    elif kind == "mixed":
        spec = MixedPowers(tuple(tuple(t) for t in d.pop("terms")))
    elif kind == "interp":
        spec = NonlinearInterp(float(d.pop("delta")), mobility_from_dict(d.pop("inner")),
                               mobility_from_dict(d.pop("inner2")))
    else:
        raise ValueError(f"unknown mobility kind {kind!r}")
    if d:
        raise ValueError(f"unknown [mobility] keys: {sorted(d)}")
    return spec


def mobility_to_dict(spec: MobilitySpec) -> dict:
    if isinstance(spec, PowerLaw):
        return {"kind": "power", "n": spec.n}
    if isinstance(spec, MixedPowers):
        return {"kind": "mixed", "terms": [list(t) for t in spec.terms]}
    return {"kind": "interp", "delta": spec.delta,
            "inner": mobility_to_dict(spec.inner), "inner2": mobility_to_dict(spec.inner2)}


def potential_from_dict(d: dict) -> Optional[PotentialSpec]:
    d = dict(d)
    kind = d.pop("kind", "lennard-jones")
    if kind == "none":
        spec = None
    elif kind == "lennard-jones":
        spec = LennardJonesType(float(d.pop("theta")), float(d.pop("c_theta", 1.0)))
    elif kind == "pure-power":
        spec = PurePower(float(d.pop("theta")))
    else:
        raise ValueError(f"unknown potential kind {kind!r}")
    if d:
        raise ValueError(f"unknown [potential] keys: {sorted(d)}")
    return spec


def potential_to_dict(spec: Optional[PotentialSpec]) -> dict:
    if spec is None:
        return {"kind": "none"}
    if isinstance(spec, LennardJonesType):
        return {"kind": "lennard-jones", "theta": spec.theta, "c_theta": spec.c_theta}
    return {"kind": "pure-power", "theta": spec.theta}


def cutoff_from_dict(d: dict) -> CutoffSpec:
    d = dict(d)
    spec = CutoffSpec(int(d.pop("j")))
    if d:
        raise ValueError(f"unknown [cutoff] keys: {sorted(d)}")
    return spec
