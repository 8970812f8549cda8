"""Bench for ``u_t + a(t) u_xxxx = f`` on the torus with piecewise-constant coefficients.

Each Fourier mode obeys ``u_k' = -a(t) mu_k u_k + f_k`` with ``mu_k = (2 pi k)^4``, which is
integrated exactly on every piece.  Fields are ``u(t, x) = Re sum_k u_k(t) exp(2 pi i k x)``
for ``k = 1..K``, so a single mode of unit amplitude has L^2 norm ``2^-1/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import lq_norm

TWO_PI = 2.0 * np.pi


def mode_rates(K: int) -> np.ndarray:
    return (TWO_PI * np.arange(1, K + 1)) ** 4


def trial_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Counter-based generator for (seed, stream, index); independent of evaluation order."""
    seed = int(seed) & ((1 << 128) - 1)
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, seed >> 64], dtype=np.uint64)
    counter = np.array([1, int(stream), int(index), 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@dataclass(frozen=True)
class CoefficientPath:
    switch_times: tuple
    values: tuple
    lam: float

    def __post_init__(self):
        s = np.asarray(self.switch_times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if self.lam < 1:
            raise ValueError("lambda must be >= 1")
        if s.size == 0 or s[0] != 0 or np.any(np.diff(s) <= 0):
            raise ValueError("switch times must start at 0 and increase strictly")
        if v.size != s.size:
            raise ValueError("need one value per switch time")
        if np.any(v < 1 / self.lam * (1 - 1e-12)) or np.any(v > self.lam * (1 + 1e-12)):
            raise ValueError("coefficient values must lie in [1/lambda, lambda]")

    @classmethod
    def equal_pieces(cls, T: float, values, lam: float) -> "CoefficientPath":
        values = tuple(float(v) for v in values)
        return cls(tuple(T * i / len(values) for i in range(len(values))), values, lam)

    @classmethod
    def random(cls, T: float, pieces: int, lam: float, rng) -> "CoefficientPath":
        """Values ``1/lam + U (lam - 1/lam)`` with U uniform on [0, 1]."""
        u = rng.uniform(size=pieces)
        return cls.equal_pieces(T, 1 / lam + u * (lam - 1 / lam), lam)

    def __call__(self, t):
        idx = np.searchsorted(np.asarray(self.switch_times), t, side="right") - 1
        return np.asarray(self.values)[np.clip(idx, 0, len(self.values) - 1)]

    def integral(self, t):
        """``A(t) = int_0^t a``."""
        s = np.asarray(self.switch_times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        A_knots = np.concatenate([[0.0], np.cumsum(np.diff(s) * v[:-1])])
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(s, t, side="right") - 1, 0, s.size - 1)
        return A_knots[idx] + v[idx] * (t - s[idx])


@dataclass(frozen=True)
class ForcingSpec:
    """Amplitudes ``f_k`` (k = 1..K) constant on each piece of ``switch_times``; shape (pieces, K)."""

    switch_times: tuple
    amplitudes: np.ndarray

    @property
    def K_modes(self) -> int:
        return self.amplitudes.shape[1]

    @classmethod
    def random(cls, T: float, pieces: int, K: int, rng, decay: float = 1.0, scale: float = 1.0):
        k = np.arange(1, K + 1)
        amp = (rng.standard_normal((pieces, K)) + 1j * rng.standard_normal((pieces, K))) * k**-decay
        return cls(tuple(T * i / pieces for i in range(pieces)), scale * amp)

    def scaled(self, c: float) -> "ForcingSpec":
        return ForcingSpec(self.switch_times, c * self.amplitudes)


@dataclass(frozen=True)
class WeightSpec:
    kappa: float
    p: float
    q: float = 2.0

    def __post_init__(self):
        if not self.p > 2:
            raise ValueError("p must exceed 2")
        if not self.q >= 2:
            raise ValueError("q must be >= 2")
        if not 0 <= self.kappa < self.p / 2 - 1:
            raise ValueError(f"kappa={self.kappa} outside [0, p/2 - 1) = [0, {self.p / 2 - 1:g})")

    def __call__(self, t):
        return np.asarray(t, dtype=float) ** self.kappa


@dataclass
class ModeTrajectory:
    """Mode values at cell midpoints of a uniform time grid (plus nodal values)."""

    t_nodes: np.ndarray
    u_nodes: np.ndarray
    u_mid: np.ndarray
    a_mid: np.ndarray
    f_mid: np.ndarray

    @property
    def t_mid(self) -> np.ndarray:
        return 0.5 * (self.t_nodes[1:] + self.t_nodes[:-1])

    @property
    def K(self) -> int:
        return self.u_mid.shape[1]

    def component(self, name: str) -> np.ndarray:
        mu = mode_rates(self.K)
        if name == "u":
            return self.u_mid
        if name == "f":
            return self.f_mid
        if name == "bilap_u":
            return mu * self.u_mid
        if name == "a_bilap_u":
            return self.a_mid[:, None] * mu * self.u_mid
        if name == "u_t":
            return self.f_mid - self.a_mid[:, None] * mu * self.u_mid
        raise ValueError(f"unknown component {name!r}")


def _propagate(u0, lam_mu, f, s):
    """Exact solution of ``u' = -lam_mu u + f`` after time(s) ``s``; broadcasting over modes."""
    decay = np.exp(-lam_mu * s)
    return decay * u0 - f * np.expm1(-lam_mu * s) / lam_mu


def solve_exact(a: CoefficientPath, f: ForcingSpec, T: float, K_modes: int, n_t: int,
                grading: float = 1.0) -> ModeTrajectory:
    """Exact mode trajectories with ``u(0) = 0`` on ``n_t`` cells of [0, T].

    With ``grading = 1`` the cells are equal.  A larger value maps the cells of each
    piece through ``s -> s^grading`` so that they cluster at the switch, where the
    stiff modes relax on the scale ``1 / (a mu_k)``.
    """
    s = np.asarray(a.switch_times, dtype=float)
    if not np.allclose(s, f.switch_times, rtol=0, atol=1e-14 * T):
        raise ValueError("coefficient and forcing switch grids differ")
    if K_modes > f.K_modes:
        raise ValueError("forcing has fewer modes than requested")
    pos = s * n_t / T
    if np.any(np.abs(pos - np.round(pos)) > 1e-9):
        raise ValueError("every switch time must be a node of the sample grid")
    mu = mode_rates(K_modes)
    if not grading >= 1:
        raise ValueError("grading must be >= 1")
    t_nodes = T * np.arange(n_t + 1) / n_t
    bounds = np.append(np.round(pos).astype(int), n_t)
    if grading != 1:
        ends = np.append(s, T)
        for p in range(len(s)):
            i0, i1 = bounds[p], bounds[p + 1]
            frac = np.arange(i1 - i0) / max(i1 - i0, 1)
            t_nodes[i0:i1] = ends[p] + (ends[p + 1] - ends[p]) * frac**grading
    u_nodes = np.zeros((n_t + 1, K_modes), dtype=complex)
    u_mid = np.zeros((n_t, K_modes), dtype=complex)
    a_mid = np.empty(n_t)
    f_mid = np.empty((n_t, K_modes), dtype=complex)
    u = np.zeros(K_modes, dtype=complex)
    for p in range(len(s)):
        i0, i1 = bounds[p], bounds[p + 1]
        if i1 <= i0:
            continue
        av, fv = a.values[p], f.amplitudes[p, :K_modes]
        lam_mu = av * mu
        tau = (t_nodes[i0:i1 + 1] - t_nodes[i0])[:, None]
        u_nodes[i0:i1 + 1] = _propagate(u, lam_mu, fv, tau)
        u_mid[i0:i1] = _propagate(u, lam_mu, fv, 0.5 * (tau[1:] + tau[:-1]))
        a_mid[i0:i1] = av
        f_mid[i0:i1] = fv
        u = u_nodes[i1].copy()
    return ModeTrajectory(t_nodes, u_nodes, u_mid, a_mid, f_mid)


def reconstruct(modes: np.ndarray, n_x: Optional[int] = None) -> np.ndarray:
    """Grid values of ``Re sum_k c_k exp(2 pi i k x)``; rows of ``modes`` are time samples."""
    modes = np.atleast_2d(modes)
    K = modes.shape[1]
    if n_x is None:
        n_x = max(64, 1 << (4 * K - 1).bit_length())
    spec = np.zeros((modes.shape[0], n_x // 2 + 1), dtype=complex)
    spec[:, 1:K + 1] = 0.5 * n_x * modes
    return np.fft.irfft(spec, n_x, axis=1)


def weighted_norm(traj: ModeTrajectory, w, component: str, q: Optional[float] = None,
                  p: Optional[float] = None) -> float:
    """``(int_0^T |component|_{L^q}^p t^kappa dt)^(1/p)`` by the midpoint rule.

    ``w`` is a WeightSpec or a ``(kappa, p, q)`` triple (the latter skips the range check).
    """
    kappa, p_w, q_w = (w.kappa, w.p, w.q) if isinstance(w, WeightSpec) else w
    p = p_w if p is None else p
    q = q_w if q is None else q
    values = reconstruct(traj.component(component))
    norms = np.array([lq_norm(row, q) for row in values])
    dt = np.diff(traj.t_nodes)
    return float(np.sum(dt * norms**p * traj.t_mid**kappa) ** (1.0 / p))


def mr_ratio(traj: ModeTrajectory, w: WeightSpec, bilap: str = "bilap_u") -> float:
    return (weighted_norm(traj, w, "u_t") + weighted_norm(traj, w, bilap)) / weighted_norm(traj, w, "f")


def mr_ratio_experiment(lam: float, trials: int, w: WeightSpec, T: float = 1.0, K_modes: int = 32,
                        pieces: int = 16, seed: int = 0, n_t: int = 1024, forcing_scale: float = 1.0,
                        forcing_decay: float = 1.0, grading: float = 3.0) -> dict:
    """Ratio ``R = (|u_t| + |u_xxxx|) / |f|`` in the weighted norm over random coefficient paths.

    The forcing is drawn once per experiment, so the spread across trials isolates the
    dependence on the coefficient path.  ``R`` is recomputed on the doubled time grid to
    report the self-convergence of the measurement.
    """
    if trials < 1 or pieces < 1:
        raise ValueError("trials and pieces must be >= 1")
    if n_t % pieces:
        raise ValueError("n_t must be a multiple of pieces")
    forcing = ForcingSpec.random(T, pieces, K_modes, trial_rng(seed, 0, 0), forcing_decay, forcing_scale)
    R, R2 = [], []
    for i in range(trials):
        path = CoefficientPath.random(T, pieces, lam, trial_rng(seed, 1, i))
        R.append(mr_ratio(solve_exact(path, forcing, T, K_modes, n_t, grading), w))
        R2.append(mr_ratio(solve_exact(path, forcing, T, K_modes, 2 * n_t, grading), w))
    R, R2 = np.array(R), np.array(R2)
    spread, spread2 = R.max() / R.min(), R2.max() / R2.min()
    return {
        "lambda": lam, "trials": trials, "pieces": pieces, "T": T, "K_modes": K_modes, "n_t": n_t,
        "grading": grading,
        "p": w.p, "q": w.q, "kappa": w.kappa,
        "R": R.tolist(), "max": float(R.max()), "min": float(R.min()), "mean": float(R.mean()),
        "spread": float(spread), "spread_doubled": float(spread2),
        "spread_change": float(abs(spread2 - spread) / spread),
        "max_R_change": float(np.max(np.abs(R2 - R) / R)),
    }


def energy_balance(a: CoefficientPath, f: ForcingSpec, T: float, K_modes: int) -> tuple[float, float]:
    """``(1/2 |u(T)|^2 + int a |u_xx|^2, int <f, u>)`` from exact per-piece integrals."""
    mu = mode_rates(K_modes)
    s = np.append(np.asarray(a.switch_times, dtype=float), T)
    u = np.zeros(K_modes, dtype=complex)
    diss = 0.0
    work = 0.0
    for p in range(len(a.values)):
        tau = s[p + 1] - s[p]
        lm = a.values[p] * mu
        fv = f.amplitudes[p, :K_modes]
        b = fv / lm
        c = u - b
        e1 = -np.expm1(-lm * tau) / lm
        e2 = -np.expm1(-2 * lm * tau) / (2 * lm)
        int_sq = np.abs(c) ** 2 * e2 + 2 * np.real(c * np.conj(b)) * e1 + np.abs(b) ** 2 * tau
        int_fu = np.real(np.conj(fv) * c) * e1 + np.real(np.conj(fv) * b) * tau
        # |Re sum c_k e_k|_{L^2}^2 = 1/2 sum |c_k|^2
        diss += 0.5 * np.sum(lm * int_sq)
        work += 0.5 * np.sum(int_fu)
        u = _propagate(u, lm, fv, tau)
    return 0.25 * float(np.sum(np.abs(u) ** 2)) + diss, work


# -- Muckenhoupt constant of t^kappa ----------------------------------------------

def _power_mean(a: float, b: float, s: float) -> float:
    if abs(s + 1) < 1e-14:
        return math.log(b / a) / (b - a)
    return (b ** (s + 1) - a ** (s + 1)) / ((s + 1) * (b - a))


def muckenhoupt_constant(kappa: float, P: float, levels: int) -> float:
    """``sup_I (avg_I w)(avg_I w^{1-P'})^{P-1}`` for ``w = t^kappa`` over the intervals
    ``[2^-i, 2^-j]``, ``0 <= j < i <= levels``.  For the class of ``L^{p}`` regularity use ``P = p/2``.
    """
    if not P > 1:
        raise ValueError("P must exceed 1")
    s_dual = -kappa / (P - 1)
    best = 0.0
    for i in range(1, levels + 1):
        for j in range(i):
            a, b = 2.0**-i, 2.0**-j
            best = max(best, _power_mean(a, b, kappa) * _power_mean(a, b, s_dual) ** (P - 1))
    return best


# -- Caccioppoli ratio ----------------------------------------------------------------

_GL32 = np.polynomial.legendre.leggauss(32)


@dataclass(frozen=True)
class HomogeneousSolution:
    """``u(t, x) = Re sum_k c_k exp(-mu_k A(t)) exp(2 pi i k x) + c_0`` for ``f = 0``."""

    coeffs: np.ndarray
    path: CoefficientPath
    mean: float = 0.0
    T: float = math.inf

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        K = self.coeffs.size
        mu = mode_rates(K)
        k = np.arange(1, K + 1)
        A = self.path.integral(t)
        amp = self.coeffs * np.exp(-np.multiply.outer(A, mu))
        phase = np.exp(1j * TWO_PI * np.multiply.outer(x, k))
        return self.mean + np.real(amp @ phase.T)


def cube_ratio(u: HomogeneousSolution, t0: float, x0: float, r: float) -> float:
    """``sup_Q |u| / (mean_{2Q} u^2)^{1/2}`` with ``Q = (t0-r, t0+r) x [x0-r^(1/4), x0+r^(1/4)]``.

    The sup is taken over a closed 33 x 33 grid of Q; the mean over ``2Q = Q_{2r}`` uses
    32 x 32 Gauss-Legendre nodes.
    """
    if t0 - 2 * r < r:
        raise ValueError("cube 2Q must stay at least r away from t = 0")
    rho, rho2 = r**0.25, (2 * r) ** 0.25
    if 2 * rho2 >= 1:
        raise ValueError("cube 2Q does not fit in the torus")
    if t0 + 2 * r > u.T * (1 + 1e-12):
        raise ValueError("cube 2Q extends past the final time")
    ts = np.linspace(t0 - r, t0 + r, 33)
    xs = np.linspace(x0 - rho, x0 + rho, 33)
    sup = np.max(np.abs(u(ts, xs)))
    nodes, weights = _GL32
    tq = t0 + 2 * r * nodes
    xq = x0 + rho2 * nodes
    wq = np.outer(weights, weights) / 4.0
    mean_sq = float(np.sum(wq * u(tq, xq) ** 2))
    return float(sup / math.sqrt(mean_sq))


def caccioppoli_experiment(lam: float, trials: int, cube_scales, seed: int = 0, K_modes: int = 64,
                           pieces: int = 16, t_factor: float = 4.0) -> dict:
    """Sup/RMS ratios on parabolic cubes for ``f = 0`` with rough data (white in k = 0..K).

    Cube centres sit at ``t0 = t_factor * r`` and a random ``x0``; coefficient paths are
    piecewise constant on ``pieces`` equal subintervals of ``[0, (t_factor + 2) max r]``.
    """
    scales = [float(r) for r in cube_scales]
    if t_factor < 3:
        raise ValueError("t_factor must be >= 3 so that 2Q stays r away from t = 0")
    T = (t_factor + 2) * max(scales)
    per_scale = {r: [] for r in scales}
    for i in range(trials):
        rng = trial_rng(seed, 2, i)
        path = CoefficientPath.random(T, pieces, lam, rng)
        data = (rng.standard_normal(K_modes) + 1j * rng.standard_normal(K_modes)) / math.sqrt(2)
        u = HomogeneousSolution(data, path, rng.standard_normal(), T)
        for r in scales:
            per_scale[r].append(cube_ratio(u, t_factor * r, rng.uniform(), r))
    maxima = [max(v) if v else math.nan for v in per_scale.values()]
    return {
        "lambda": lam, "trials": trials, "scales": scales, "K_modes": K_modes, "pieces": pieces,
        "t_factor": t_factor,
        "ratios": {repr(r): v for r, v in per_scale.items()},
        "max_ratio": dict(zip(map(repr, scales), maxima)),
        "scale_spread": float(max(maxima) / min(maxima)) if trials else math.nan,
    }
