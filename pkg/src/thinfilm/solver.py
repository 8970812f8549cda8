"""Semi-implicit Euler-Maruyama stepping for the stochastic thin-film equation on the torus.

One step solves ``(I + dt L_a) u^{m+1} = u^m + dt div(Phi_eff(u^m) u^m_x) + noise`` with the
fourth-order coefficient ``a`` frozen at ``u^m``.  Steps that lose too much positivity (or
exceed the H^1 cap) are retried on halves obtained from the Brownian bridge, so the driving
path never depends on the adaptivity history.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .coefficients import (CoefficientSet, CutoffSpec, LennardJonesType, MobilitySpec, PotentialSpec,
                           PowerLaw)
from .functionals import DiagnosticsRow, EntropyDensity, diagnostics_row, gamma_range
from .grid import Field, TorusGrid, d_face, d_flux, face_average, read_snapshot, sobolev_norm
from .linsolve import implicit_solve
from .noise import BrownianPath, NoiseBasis, conservative_noise, intensity_profile

SCHEMES = ("ito", "stratonovich")
RECOVERY_STREAK = 10


class ConfigError(ValueError):
    pass


class BlowUp(Exception):
    """Step size fell below ``dt_min``: carries the monitored pair (min u, H^1 norm)."""

    def __init__(self, t: float, min_u: float, h1_norm: float, reason: str):
        super().__init__(f"blow-up at t={t:.6g}: {reason} (min u={min_u:.3g}, |u|_H1={h1_norm:.3g})")
        self.t = t
        self.min_u = min_u
        self.h1_norm = h1_norm
        self.reason = reason


@dataclass(frozen=True)
class InitialDatum:
    """``mean + amplitude * sin|cos(2 pi mode x)``, or a snapshot file when ``file`` is set."""

    mean: float = 1.0
    amplitude: float = 0.1
    mode: int = 1
    kind: str = "sin"
    file: Optional[str] = None

    def build(self, grid: TorusGrid) -> Field:
        if self.file is not None:
            f = read_snapshot(self.file)
            if f.grid.n != grid.n:
                raise ConfigError(f"initial snapshot has n={f.grid.n}, config has n={grid.n}")
            return f
        trig = {"sin": np.sin, "cos": np.cos}[self.kind]
        return grid.sample(lambda x: self.mean + self.amplitude * trig(2 * np.pi * self.mode * x))


@dataclass(frozen=True)
class SimConfig:
    n: int = 128
    dt0: float = 1e-4
    dt_min: float = 1e-12
    T: float = 0.05
    scheme: str = "ito"
    mobility: MobilitySpec = PowerLaw(2.0)
    potential: Optional[PotentialSpec] = LennardJonesType(8.0, 1.0)
    noise: NoiseBasis = NoiseBasis()
    cutoff: Optional[CutoffSpec] = None
    pos_floor: float = 1e-7
    drop_ratio: float = 0.5
    h1_max: float = 1e6
    output_stride: int = 10
    seed: int = 0
    paths: int = 1
    beta_diag: float = 0.0
    gamma_diag: float = 1.0
    u0: InitialDatum = InitialDatum()
    stability_cap: bool = True
    # extra intensity added to Phi on the Ito path (lets Ito reproduce the Stratonovich drift)
    ito_shift: float = 0.0

    def validate(self, intensity: bool = True) -> "SimConfig":
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.T >= 0:
            raise ConfigError("T must be nonnegative")
        if not 0 < self.dt_min < self.dt0:
            raise ConfigError("need 0 < dt_min < dt0")
        if not self.pos_floor > 0:
            raise ConfigError("pos_floor must be positive")
        if not 0 < self.drop_ratio < 1:
            raise ConfigError("drop_ratio must lie in (0, 1)")
        if self.output_stride < 1 or self.paths < 0:
            raise ConfigError("output_stride must be >= 1 and paths >= 0")
        if self.ito_shift < 0:
            raise ConfigError("ito_shift must be nonnegative")
        lo, hi = gamma_range(self.beta_diag)
        if not lo <= self.gamma_diag <= hi:
            raise ConfigError(f"gamma_diag={self.gamma_diag} outside [{lo:.6g}, {hi:.6g}]")
        TorusGrid(self.n)
        if intensity and self.scheme == "stratonovich":
            _, dev = intensity_profile(self.noise, TorusGrid(self.n))
            if dev > 1e-10:
                raise ConfigError(f"Stratonovich scheme needs constant noise intensity (deviation {dev:.3g})")
        return self

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.n)

    def intensity_shift(self) -> float:
        """Constant added to the Stratonovich shift of Phi."""
        if self.scheme == "stratonovich":
            return intensity_profile(self.noise, self.grid)[0]
        return self.ito_shift

    def coefficients(self, shifted: bool = True) -> CoefficientSet:
        return CoefficientSet(self.mobility, self.potential, self.cutoff,
                              self.intensity_shift() if shifted else 0.0)


def stability_cap(u: np.ndarray, coeffs: CoefficientSet) -> float:
    """Largest step with a factor-2 margin for the explicit second-order term.

    A Fourier mode of the frozen linearization is amplified by
    ``(1 - dt Phi k^2) / (1 + dt m k^4)``, which stays in [-1, 1] for ``dt <= 8 m / Phi^2``.
    """
    m, Phi, _ = coeffs.evaluate(u)
    Phi2 = Phi**2
    mask = Phi2 > 0
    if not np.any(mask):
        return math.inf
    return float(np.min(4.0 * m[mask] / Phi2[mask]))


def base_step(cfg: SimConfig, u0: np.ndarray) -> tuple[float, int]:
    """``(dt_base, steps)`` with ``dt_base * steps = T`` and ``dt_base <= min(dt0, cap)``."""
    dt = cfg.dt0
    if cfg.stability_cap:
        dt = min(dt, stability_cap(u0, cfg.coefficients()))
    if cfg.T == 0:
        return dt, 0
    steps = max(1, math.ceil(cfg.T / dt - 1e-9))
    return cfg.T / steps, steps


def drift_split(u, cfg: SimConfig, coeffs: Optional[CoefficientSet] = None):
    """Face coefficients ``a`` and the explicit drift ``div(Phi_eff u_x)`` in flux form."""
    v = np.asarray(getattr(u, "values", u), dtype=float)
    if cfg.cutoff is None and not np.all(v > cfg.pos_floor):
        raise ValueError("drift_split needs u > pos_floor unless a cutoff is active")
    if coeffs is None:
        coeffs = cfg.coefficients()
    h = 1.0 / v.size
    m, Phi, g = coeffs.evaluate(v)
    return face_average(m), d_flux(face_average(Phi) * d_face(v, h), h)


@dataclass
class StepState:
    u: np.ndarray
    step: int = 0
    level: int = 0
    j: int = 0
    streak: int = 0


@dataclass
class StepOutcome:
    accepted: bool
    u_next: np.ndarray
    dt_used: float
    rejections: int


@dataclass
class RunResult:
    status: str
    diagnostics: list
    final_field: Field
    path: int = 0
    blowup: Optional[dict] = None
    steps: int = 0
    rejections: dict = field(default_factory=dict)
    max_mass_drift: float = 0.0
    min_u: float = math.inf

    @property
    def completed(self) -> bool:
        return self.status == "Completed"

    def summary(self) -> dict:
        out = {"path": self.path, "status": self.status, "steps": self.steps,
               "rejections": dict(sorted(self.rejections.items())),
               "max_mass_drift": self.max_mass_drift, "min_u": self.min_u}
        if self.blowup is not None:
            out["blowup"] = self.blowup
        return out


class Stepper:
    """Advance one trajectory on the dyadic time grid of a fixed Brownian path.

    ``base_level`` fixes the coarsest level used (``dt_base / 2**base_level``), which is
    how coupled runs at different resolutions share one path.  ``method`` is ``"em"`` or
    ``"heun"`` (the latter is a Stratonovich reference: predictor-corrector in the noise
    with the mobility frozen at the midpoint).
    """

    def __init__(self, cfg: SimConfig, u0: np.ndarray, path: int = 0, base_level: int = 0,
                 method: str = "em", dt_base: Optional[float] = None):
        if method not in ("em", "heun"):
            raise ValueError("method must be 'em' or 'heun'")
        self.cfg = cfg
        self.h = 1.0 / cfg.n
        self.method = method
        self.coeffs = cfg.coefficients(shifted=(method == "em"))
        self.psi = cfg.noise.evaluate(cfg.grid.x) if len(cfg.noise) else np.zeros((0, cfg.n))
        if dt_base is None:
            dt_base, _ = base_step(cfg, u0)
        self.dt_base = dt_base
        self.base_level = base_level
        self.bm = BrownianPath(cfg.seed, path, dt_base, len(cfg.noise))
        self.rejections = {}

    def time(self, st: StepState) -> float:
        return (st.step + st.j / 2**st.level) * self.dt_base

    def _parts(self, u, coeffs):
        m, Phi, g = coeffs.evaluate(u)
        F = d_flux(face_average(Phi) * d_face(u, self.h), self.h)
        return face_average(m), F, g

    def propose(self, u: np.ndarray, dt: float, dW: np.ndarray) -> np.ndarray:
        a, F, g = self._parts(u, self.coeffs)
        G = conservative_noise(self.psi, g, dW, self.h)
        v = implicit_solve(a, u + dt * F + G, dt, self.h)
        if self.method == "em":
            return v
        if self.cfg.cutoff is None and not np.all(v > 0):
            return v
        a1, F1, g1 = self._parts(v, self.coeffs)
        G1 = conservative_noise(self.psi, g1, dW, self.h)
        a_mid = face_average(self.coeffs.evaluate(0.5 * (u + v))[0])
        return implicit_solve(a_mid, u + 0.5 * dt * (F + F1) + 0.5 * (G + G1), dt, self.h)

    def check(self, u: np.ndarray, v: np.ndarray) -> Optional[str]:
        """Rejection reason, or None when ``v`` is acceptable."""
        if not np.all(np.isfinite(v)):
            return "nonfinite"
        vmin = v.min()
        if vmin <= self.cfg.pos_floor or vmin < self.cfg.drop_ratio * u.min():
            return "positivity"
        if sobolev_norm(v, 1.0) > self.cfg.h1_max:
            return "h1"
        return None

    def step(self, st: StepState) -> StepOutcome:
        """Advance ``st`` by one accepted sub-step, refining on rejection."""
        rejected = 0
        last = None
        while True:
            dt = self.dt_base / 2**st.level
            if dt < self.cfg.dt_min:
                reason = "dt below dt_min after " + (last or "rejection")
                raise BlowUp(self.time(st), float(st.u.min()), sobolev_norm(st.u, 1.0), reason)
            dW = self.bm.increment(st.step, st.level, st.j)
            v = self.propose(st.u, dt, dW)
            last = self.check(st.u, v)
            if last is None:
                break
            rejected += 1
            self.rejections[last] = self.rejections.get(last, 0) + 1
            st.level += 1
            st.j *= 2
            st.streak = 0
        st.u = v
        st.j += 1
        st.streak += 1
        if st.j == 2**st.level:
            st.step += 1
            st.j = 0
        if st.streak >= RECOVERY_STREAK and st.level > self.base_level and st.j % 2 == 0:
            st.level -= 1
            st.j //= 2
            st.streak = 0
        return StepOutcome(True, v, dt, rejected)


def initial_field(cfg: SimConfig) -> Field:
    return cfg.u0.build(cfg.grid)


def run(cfg: SimConfig, path: int = 0, base_level: int = 0, method: str = "em",
        diagnostics: bool = True, dt_base: Optional[float] = None) -> RunResult:
    """One trajectory for ``(cfg.seed, path)``; a blow-up is returned as a status."""
    cfg.validate()
    grid = cfg.grid
    u0 = initial_field(cfg).values.copy()
    stepper = Stepper(cfg, u0, path, base_level, method, dt_base)
    _, steps = base_step(cfg, u0)
    if dt_base is not None:
        steps = round(cfg.T / dt_base) if cfg.T > 0 else 0
    ed = EntropyDensity(cfg.mobility, cfg.beta_diag)

    def row(t, u, dt):
        return diagnostics_row(t, u, cfg.mobility, cfg.potential, ed, cfg.gamma_diag, dt)

    st = StepState(u0, level=base_level)
    rows = [row(0.0, u0, 0.0)] if diagnostics else []
    mass0 = float(np.mean(u0))
    drift = 0.0
    min_u = float(u0.min())
    accepted = 0
    status, blow = "Completed", None
    while st.step < steps:
        try:
            out = stepper.step(st)
        except BlowUp as exc:
            status = "BlowUp"
            blow = {"t": exc.t, "reason": exc.reason, "min_u": exc.min_u, "h1_norm": exc.h1_norm}
            break
        accepted += 1
        drift = max(drift, abs(float(np.mean(st.u)) - mass0))
        min_u = min(min_u, float(st.u.min()))
        if diagnostics and (accepted % cfg.output_stride == 0 or st.step == steps):
            rows.append(row(stepper.time(st), st.u, out.dt_used))
    if diagnostics and status == "BlowUp":
        rows.append(row(stepper.time(st), st.u, math.nan))
    return RunResult(status, rows, Field(grid, st.u), path, blow, accepted,
                     dict(stepper.rejections), drift, min_u)


def _run_path(args):
    cfg, path = args
    return run(cfg, path)


def run_ensemble(cfg: SimConfig, threads: int = 1, paths=None) -> list:
    """Trajectories for every path index, in path order regardless of ``threads``."""
    indices = list(range(cfg.paths)) if paths is None else list(paths)
    jobs = [(cfg, p) for p in indices]
    return parallel_map(_run_path, jobs, threads)


def parallel_map(func, jobs, threads: int = 1) -> list:
    if threads <= 1 or len(jobs) <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, jobs))


# -- coupled refinement studies ---------------------------------------------------

def l2_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def fit_order(dts, errors) -> float:
    """Least-squares slope of ``log error`` against ``log dt``."""
    dts = np.asarray(dts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if dts.size < 2 or np.any(~(errors > 0)):
        return math.nan
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])


def _coupled_path(args):
    cfg, path, levels = args
    u0 = initial_field(cfg).values
    dt_base, _ = base_step(cfg, u0)
    finals = []
    for lev in range(levels + 1):
        res = run(cfg, path, base_level=lev, diagnostics=False, dt_base=dt_base)
        if not res.completed:
            return None
        finals.append(res.final_field.values)
    return [l2_distance(finals[i], finals[i + 1]) for i in range(levels)]


def coupled_pair_run(cfg: SimConfig, levels: int, paths: Optional[int] = None, threads: int = 1) -> dict:
    """Same Brownian path at ``dt, dt/2, ..., dt/2**levels``; mean L^2 gaps between neighbours."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    cfg.validate()
    paths = cfg.paths if paths is None else paths
    u0 = initial_field(cfg).values
    dt_base, _ = base_step(cfg, u0)
    results = parallel_map(_coupled_path, [(cfg, p, levels) for p in range(paths)], threads)
    kept = [r for r in results if r is not None]
    dts = [dt_base / 2**lev for lev in range(levels)]
    errors = np.mean(kept, axis=0).tolist() if kept else [math.nan] * levels
    return {"levels": levels, "paths": paths, "excluded": paths - len(kept), "dt": dts,
            "errors": errors, "order": fit_order(dts, errors)}


def _heun_gap_path(args):
    cfg, path, levels, ref_level = args
    u0 = initial_field(cfg).values
    dt_base, _ = base_step(cfg, u0)
    ref = run(cfg, path, base_level=ref_level, method="heun", diagnostics=False, dt_base=dt_base)
    if not ref.completed:
        return None
    gaps = []
    for lev in range(levels):
        res = run(cfg, path, base_level=lev, diagnostics=False, dt_base=dt_base)
        if not res.completed:
            return None
        gaps.append(l2_distance(res.final_field.values, ref.final_field.values))
    return gaps


def heun_gap_study(cfg: SimConfig, levels: int, paths: Optional[int] = None, threads: int = 1,
                   ref_offset: int = 1) -> dict:
    """Strong gap between the EM Stratonovich scheme at ``levels`` dyadic steps and a Heun
    reference on the same path at ``dt / 2**(levels - 1 + ref_offset)``."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    cfg.validate()
    paths = cfg.paths if paths is None else paths
    ref_level = levels - 1 + ref_offset
    u0 = initial_field(cfg).values
    dt_base, _ = base_step(cfg, u0)
    results = parallel_map(_heun_gap_path, [(cfg, p, levels, ref_level) for p in range(paths)], threads)
    kept = [r for r in results if r is not None]
    dts = [dt_base / 2**lev for lev in range(levels)]
    gaps = np.mean(kept, axis=0).tolist() if kept else [math.nan] * levels
    return {"levels": levels, "paths": paths, "excluded": paths - len(kept), "dt": dts,
            "reference_dt": dt_base / 2**ref_level, "gaps": gaps, "order": fit_order(dts, gaps)}


def ito_shift_equivalence(cfg: SimConfig, path: int = 0) -> tuple[bool, RunResult, RunResult]:
    """Run the Stratonovich scheme and Ito with the same shift on one path; compare bitwise."""
    strat = replace(cfg, scheme="stratonovich", ito_shift=0.0)
    ito = replace(cfg, scheme="ito", ito_shift=strat.intensity_shift())
    a = run(strat, path)
    b = run(ito, path)
    same = (a.status == b.status and np.array_equal(a.final_field.values, b.final_field.values)
            and [r.csv() for r in a.diagnostics] == [r.csv() for r in b.diagnostics])
    return same, a, b


def spatial_convergence(cfg: SimConfig, grids, dt: float) -> dict:
    """Deterministic runs on nested grids at a common step; errors by subsampling to the coarse grid."""
    finals = []
    for n in grids:
        c = replace(cfg, n=n, noise=NoiseBasis(), dt0=dt, stability_cap=False)
        res = run(c, diagnostics=False)
        if not res.completed:
            raise RuntimeError(f"spatial study blew up on n={n}")
        finals.append(res.final_field.values)
    errors = [l2_distance(finals[i], finals[i + 1][:: grids[i + 1] // grids[i]]) for i in range(len(grids) - 1)]
    hs = [1.0 / n for n in grids[:-1]]
    return {"grids": list(grids), "dt": dt, "errors": errors, "order": fit_order(hs, errors)}
