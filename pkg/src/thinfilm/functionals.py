"""Diagnostic functionals: mass, energy, alpha-entropies, dissipation integrals and sup bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .coefficients import (LennardJonesType, MobilitySpec, PotentialSpec, PowerLaw, mobility_eval,
                           potential_eval)
from .grid import Field, central_diff, d_face, integrate, laplacian, sobolev_norm

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, Field) else np.asarray(u, dtype=float)


def _require_positive(v):
    if np.any(~(v > 0)):
        raise ValueError("functional requires a strictly positive profile")


def mass(u) -> float:
    return integrate(u)


def energy(u, pot: Optional[PotentialSpec]) -> float:
    """``h sum [ 1/2 (forward difference)^2 + phi(u_i) ]``; ``pot=None`` keeps only the gradient part."""
    v = _values(u)
    _require_positive(v)
    h = 1.0 / v.size
    grad = d_face(v, h)
    phi = potential_eval(pot, v)[0]
    return float(h * np.sum(0.5 * grad**2 + phi))


# -- alpha-entropy -------------------------------------------------------------

def _panel_edges(r: float) -> np.ndarray:
    """Panel boundaries from 1 to r, split at the powers of two in between."""
    if r == 1.0:
        return np.array([1.0, 1.0])
    lo, hi = (r, 1.0) if r < 1 else (1.0, r)
    k_lo = math.floor(math.log2(lo)) + 1
    k_hi = math.ceil(math.log2(hi)) - 1
    inner = [2.0**k for k in range(k_lo, k_hi + 1)]
    edges = [lo] + inner + [hi]
    if r < 1:
        edges = edges[::-1]
    return np.array(edges)


def power_law_entropy(r, a: float):
    """Closed form of ``int_1^r int_1^r' s^a ds dr'`` for the three exponent regimes."""
    r = np.asarray(r, dtype=float)
    lr = np.log(r)
    if a == -2.0:
        return (r - 1.0) - lr
    if a == -1.0:
        return r * lr - r + 1.0
    return (np.expm1((a + 2.0) * lr) / (a + 2.0) - (r - 1.0)) / (a + 1.0)


@dataclass
class EntropyDensity:
    """``h_beta`` with ``h_beta'' = r^beta / m(r)`` and ``h_beta(1) = h_beta'(1) = 0``."""

    mobility: MobilitySpec
    beta: float

    def __post_init__(self):
        if not -0.5 < self.beta < 1.0:
            raise ValueError("beta must lie in (-1/2, 1)")
        self._table = None

    @property
    def has_closed_form(self) -> bool:
        return isinstance(self.mobility, PowerLaw)

    def second_derivative(self, r):
        r = np.asarray(r, dtype=float)
        return r**self.beta / mobility_eval(self.mobility, r)[0]

    def quadrature(self, r: float) -> float:
        """``int_1^r (r - s) h''(s) ds`` by 16-point Gauss-Legendre on dyadic panels."""
        edges = _panel_edges(float(r))
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            s = mid + half * _GL_NODES
            total += half * float(np.dot(_GL_WEIGHTS, (r - s) * self.second_derivative(s)))
        return total

    def closed_form(self, r):
        return power_law_entropy(r, self.beta - self.mobility.n)

    def __call__(self, r, method: str = "auto"):
        r = np.asarray(r, dtype=float)
        if np.any(~(r > 0)):
            raise ValueError("entropy density is defined for r > 0 only")
        if method == "auto":
            method = "closed" if self.has_closed_form else "quadrature"
        if method == "closed":
            return self.closed_form(r)
        if method == "table":
            return self.table()(np.log(r))
        out = np.array([self.quadrature(x) for x in r.ravel()]).reshape(r.shape)
        return out if out.ndim else float(out)

    def table(self, lo: float = 1e-4, hi: float = 1e4, size: int = 2001) -> PchipInterpolator:
        """Monotone interpolant of ``h_beta`` in ``log r``, built once on first use."""
        if self._table is None:
            r = np.logspace(np.log10(lo), np.log10(hi), size)
            self._table = PchipInterpolator(np.log(r), self(r, method="quadrature"))
        return self._table


def entropy_density(ed: EntropyDensity, r, method: str = "auto"):
    return ed(r, method=method)


def alpha_entropy(u, ed: EntropyDensity, method: str = "auto") -> float:
    v = _values(u)
    _require_positive(v)
    return float(np.mean(ed(v, method=method)))


# -- dissipation integrands ------------------------------------------------------

def gamma_range(beta: float) -> tuple[float, float]:
    """Admissible interval for gamma, where the coefficient of ``int u^{beta-2} u_x^4`` stays >= 0."""
    if not -0.5 < beta < 1.0:
        raise ValueError("beta must lie in (-1/2, 1)")
    root = math.sqrt(max((1.0 - beta) * (1.0 + 2.0 * beta), 0.0))
    return (beta + 2.0 - root) / 3.0, (beta + 2.0 + root) / 3.0


def entropy_quartic_coefficient(beta: float, gamma: float) -> float:
    """``c(beta, gamma)`` in
    ``int u^b u_x u_xxx = -gamma^-2 int u^{b+2-2g} (u^g)_xx^2 - c int u^{b-2} u_x^4``.

    Integrating by parts gives ``c = -[(g-1)^2 - 2(g-1)(b-1)/3 + b(b-1)/3]``.
    """
    y = gamma - 1.0
    return -(y * y - 2.0 * y * (beta - 1.0) / 3.0 + beta * (beta - 1.0) / 3.0)


def dissipations(u, mob: MobilitySpec, pot: Optional[PotentialSpec], beta: float, gamma: float,
                 theta: Optional[float] = None):
    """``(D_energy, D1, D2, D3)`` with centered differences.

    ``theta`` defaults to the potential's exponent; it only enters ``D1``.
    """
    v = _values(u)
    _require_positive(v)
    lo, hi = gamma_range(beta)
    if not lo - 1e-12 <= gamma <= hi + 1e-12:
        raise ValueError(f"gamma={gamma} outside the admissible interval [{lo:.6g}, {hi:.6g}]")
    if theta is None:
        theta = pot.theta if pot is not None else 0.0
    h = 1.0 / v.size
    m = mobility_eval(mob, v)[0]
    w = laplacian(v, h) - potential_eval(pot, v)[1]
    ux = central_diff(v, h)
    D_energy = integrate(m * central_diff(w, h) ** 2)
    D1 = integrate(v ** (beta - theta - 2.0) * ux**2)
    D2 = integrate(v ** (beta - 2.0 * gamma + 2.0) * laplacian(v**gamma, h) ** 2)
    D3 = integrate(v ** (beta - 2.0) * ux**4)
    return D_energy, D1, D2, D3


# -- min/max inequalities ------------------------------------------------------------

@dataclass
class SupBoundCheck:
    lhs: float
    rhs: float
    passed: bool


def check_sup_bound_explicit(f, beta: float, theta: float, rtol: float = 1e-8) -> SupBoundCheck:
    """``sup f^{b-t} <= ((b-t)^2/2) int f^{b-t-2} f_x^2 + 2 (int f)^{b-t}`` with forward differences."""
    v = _values(f)
    _require_positive(v)
    if not -0.5 < beta < 1.0:
        raise ValueError("beta must lie in (-1/2, 1)")
    if not theta > 2:
        raise ValueError("theta must exceed 2")
    h = 1.0 / v.size
    e = beta - theta
    lhs = float(np.max(v**e))
    fx = d_face(v, h)
    rhs = 0.5 * e * e * integrate(v ** (e - 2.0) * fx**2) + 2.0 * integrate(v) ** e
    return SupBoundCheck(lhs, float(rhs), lhs <= rhs * (1.0 + rtol))


@dataclass
class SupBoundRatios:
    quartic: float
    energy_min: float
    energy_max: float


def sup_bound_ratios(f, beta: float, theta: float, pot: Optional[PotentialSpec] = None) -> SupBoundRatios:
    """Left side over right side (constant dropped) for the three implicit-constant bounds.

    ``pot`` defaults to ``LennardJonesType(theta, 1)``.
    """
    v = _values(f)
    _require_positive(v)
    if pot is None:
        pot = LennardJonesType(theta, 1.0)
    h = 1.0 / v.size
    M = integrate(v)
    fx = central_diff(v, h)
    E = energy(v, pot)
    quartic = np.max(v ** (beta + 5.0)) / (integrate(v ** (beta - 2.0) * fx**4) * M**3 + M ** (beta + 5.0))
    e_min = np.max(v ** ((2.0 - theta) / 2.0)) / (E + M ** ((2.0 - theta) / 2.0))
    e_max = np.max(v**3) / (E * M + M**3)
    return SupBoundRatios(float(quartic), float(e_min), float(e_max))


# -- admissible parameters ---------------------------------------------------------

@dataclass
class AdmissibilityReport:
    weight_condition: bool
    positivity_condition: bool
    trace_condition: bool
    range_condition: bool
    trace_smoothness: float

    @property
    def admissible(self) -> bool:
        return self.weight_condition and self.positivity_condition and self.trace_condition and self.range_condition


def check_admissible(p: float, kappa: float, s: float, q: float, d: int) -> AdmissibilityReport:
    """Evaluate the parameter conditions for ``(p, kappa, s, q, d)``; reports only."""
    weight = (p > 2 and 0 <= kappa < p / 2 - 1) or (q == 2 and p == 2 and kappa == 0)
    trace = s + 2.0 - 4.0 * (1.0 + kappa) / p
    ranges = s > -0.5 and p >= 2 and q >= 2 and kappa >= 0
    return AdmissibilityReport(bool(weight), bool(trace - d / q > 0), bool(trace > 1.0 - s), bool(ranges), trace)


# -- diagnostics row -----------------------------------------------------------------

CSV_HEADER = "t,mass,min_u,max_u,energy,H_beta,D_energy,D1,D2,D3,h1_norm,dt"


@dataclass
class DiagnosticsRow:
    t: float
    mass: float
    min_u: float
    max_u: float
    energy: float
    H_beta: float
    D_energy: float
    D1: float
    D2: float
    D3: float
    h1_norm: float
    dt: float

    def csv(self) -> str:
        return ",".join(repr(float(getattr(self, f.name))) for f in fields(self))


def diagnostics_row(t: float, u, mob, pot, ed: EntropyDensity, gamma: float, dt: float) -> DiagnosticsRow:
    v = _values(u)
    if np.all(v > 0):
        D = dissipations(v, mob, pot, ed.beta, gamma)
        E = energy(v, pot)
        H = alpha_entropy(v, ed)
    else:
        D = (math.nan,) * 4
        E = H = math.nan
    return DiagnosticsRow(t, mass(v), float(v.min()), float(v.max()), E, H, *D, sobolev_norm(v, 1.0), dt)


def write_diagnostics_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fh.write(r.csv() + "\n")


# -- random positive corpus --------------------------------------------------------

def random_positive_coefficients(rng, n_modes: int = 8, decay: float = 1.5, log_std: float = 0.6):
    """Fourier data of a band-limited Gaussian field (for ``exp`` of it) and a random mean level."""
    k = np.arange(1, n_modes + 1)
    amp = k ** (-decay)
    coef = amp * (rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes))
    coef *= log_std / np.sqrt(np.sum(np.abs(coef) ** 2) * 2.0 + 1e-300)
    level = rng.uniform(-0.5, 0.5)
    return level, coef


def sample_positive_field(level: float, coef: np.ndarray, n: int) -> np.ndarray:
    x = np.arange(n) / n
    k = np.arange(1, coef.size + 1)
    g = level + 2.0 * np.real(coef @ np.exp(2j * np.pi * np.outer(k, x)))
    return np.exp(g)


def random_positive_corpus(size: int, n: int, seed: int = 0, n_modes: int = 8):
    """``size`` fields ``exp(G)`` with G a random trigonometric polynomial, sampled on n points."""
    rng = np.random.default_rng(seed)
    return [sample_positive_field(*random_positive_coefficients(rng, n_modes), n) for _ in range(size)]
