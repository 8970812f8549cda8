"""Truncated trigonometric noise: basis construction, regularity sums and conservative increments.

Random numbers are counter-based: the normals for a given (seed, path, step, level,
index) are drawn from a Philox stream whose counter is that tuple, so every increment
is a pure function of its key and independent of scheduling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, TorusGrid, d_flux, face_average

TWO_PI = 2.0 * np.pi
RNG_SCHEME = "philox4x64:key=seed,counter=(0,path,step,level<<40|index);brownian-bridge-dyadic"


@dataclass(frozen=True)
class NoiseMode:
    k: int
    sigma: float
    parity: str  # "cos" or "sin"


@dataclass(frozen=True)
class NoiseBasis:
    """Modes ``psi = c * sigma_k * sqrt(2) * cos|sin(2 pi k x)``."""

    modes: tuple = ()
    c: float = 1.0
    K: int = 0
    decay: float = float("nan")

    def __len__(self):
        return len(self.modes)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([self.c * m.sigma * np.sqrt(2.0) for m in self.modes])

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Mode values, shape ``(len(modes), len(x))``."""
        out = np.empty((len(self.modes), len(x)))
        for i, m in enumerate(self.modes):
            trig = np.cos if m.parity == "cos" else np.sin
            out[i] = self.c * m.sigma * np.sqrt(2.0) * trig(TWO_PI * m.k * x)
        return out

    def drop(self, k: int, parity: str) -> "NoiseBasis":
        keep = tuple(m for m in self.modes if not (m.k == k and m.parity == parity))
        return NoiseBasis(keep, self.c, self.K, self.decay)

    @property
    def parity_complete(self) -> bool:
        pairs = {}
        for m in self.modes:
            pairs.setdefault(m.k, {})[m.parity] = m.sigma
        return all(set(p) == {"cos", "sin"} and p["cos"] == p["sin"] for p in pairs.values())


def build_trig_basis(K: int, decay: float, c: float) -> NoiseBasis:
    """Cos/sin pairs for k = 1..K with ``sigma_k = k^-decay``.

    ``decay > 5/2`` is required so that ``sum_k sigma_k^2 k^4`` (the squared
    W^{2,inf} norms) stays finite as K grows.
    """
    if K < 0 or int(K) != K:
        raise ValueError("K must be a nonnegative integer")
    if not decay > 2.5:
        raise ValueError(f"decay={decay} violates the W^{{2,inf}} summability requirement "
                         "sum_k ||psi_k||^2_{W^{2,inf}} < inf, which needs decay > 5/2")
    if not c > 0:
        raise ValueError("amplitude scale c must be positive")
    modes = []
    for k in range(1, int(K) + 1):
        s = float(k) ** (-decay)
        modes.append(NoiseMode(k, s, "cos"))
        modes.append(NoiseMode(k, s, "sin"))
    return NoiseBasis(tuple(modes), float(c), int(K), float(decay))


def intensity_profile(basis: NoiseBasis, grid: TorusGrid) -> tuple[float, float]:
    """Mean and max deviation of ``sum_k psi_k(x)^2`` over the grid."""
    if len(basis) == 0:
        return 0.0, 0.0
    total = np.sum(basis.evaluate(grid.x) ** 2, axis=0)
    C = float(np.mean(total))
    return C, float(np.max(np.abs(total - C)))


def regularity_sums(basis: NoiseBasis) -> tuple[float, float]:
    """``(sum ||psi||^2_{W^{2,inf}}, sum ||psi||^2_{H^2})`` over every mode, in closed form.

    The W^{2,inf} norm is ``sup|f| + sup|f'| + sup|f''|``; for a pure harmonic of
    amplitude A and frequency k that is ``A (1 + 2 pi k + (2 pi k)^2)``.
    """
    s_w = 0.0
    s_h = 0.0
    for m in basis.modes:
        A = basis.c * m.sigma * np.sqrt(2.0)
        w = TWO_PI * m.k
        s_w += A**2 * (1.0 + w + w**2) ** 2
        s_h += A**2 * 0.5 * (1.0 + w**2) ** 2
    return float(s_w), float(s_h)


# -- random numbers ---------------------------------------------------------------

def keyed_normals(seed: int, path: int, step: int, level: int, index: int, size: int) -> np.ndarray:
    """Standard normals that depend only on the key tuple."""
    seed = int(seed) & ((1 << 128) - 1)
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, seed >> 64], dtype=np.uint64)
    counter = np.array([0, int(path), int(step), (int(level) << 40) | int(index)], dtype=np.uint64)
    bg = np.random.Philox(key=key, counter=counter)
    return np.random.Generator(bg).standard_normal(size)


class BrownianPath:
    """Dyadic Brownian path for ``n_modes`` independent drivers on base steps of length ``dt_base``.

    ``increment(step, level, j)`` is the increment over the j-th of ``2**level`` equal
    sub-intervals of base step ``step``.  Children are obtained from their parent
    by the Brownian bridge, so the two halves always sum to the parent.
    """

    def __init__(self, seed: int, path: int, dt_base: float, n_modes: int):
        self.seed = int(seed)
        self.path = int(path)
        self.dt_base = float(dt_base)
        self.n_modes = int(n_modes)
        self._cache = {}
        self._cache_step = None

    def increment(self, step: int, level: int = 0, j: int = 0) -> np.ndarray:
        if self.n_modes == 0:
            return np.zeros(0)
        if step != self._cache_step:
            self._cache = {}
            self._cache_step = step
        key = (level, j)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if level == 0:
            val = np.sqrt(self.dt_base) * keyed_normals(self.seed, self.path, step, 0, 0, self.n_modes)
        else:
            parent = self.increment(step, level - 1, j // 2)
            tau = self.dt_base / 2 ** (level - 1)
            z = keyed_normals(self.seed, self.path, step, level, j // 2, self.n_modes)
            half = 0.5 * parent
            spread = 0.5 * np.sqrt(tau) * z
            # second child as parent minus first child keeps the pair summing to the parent
            first = half + spread
            val = first if j % 2 == 0 else parent - first
        self._cache[key] = val
        return val


@dataclass
class NoiseIncrement:
    xi: np.ndarray
    dt: float
    field: Field


def conservative_noise(psi: np.ndarray, g_u: np.ndarray, dW: np.ndarray, h: float) -> np.ndarray:
    """``sum_k dW_k * D_flux(avg(g psi_k))`` computed as one flux divergence."""
    if dW.size == 0:
        return np.zeros_like(g_u)
    return d_flux(face_average(g_u * (dW @ psi)), h)


def sample_increment(basis: NoiseBasis, u: Field, g_eval, dt: float, rng) -> NoiseIncrement:
    """Euler-Maruyama noise increment in conservative flux form.

    ``g_eval`` maps nodal heights to ``g(u)``; ``rng`` is a numpy Generator.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    xi = rng.standard_normal(len(basis))
    if len(basis) == 0 or dt == 0:
        return NoiseIncrement(xi, dt, Field(u.grid, np.zeros(u.grid.n)))
    g_u = np.asarray(g_eval(u.values), dtype=float)
    psi = basis.evaluate(u.grid.x)
    values = conservative_noise(psi, g_u, np.sqrt(dt) * xi, u.grid.h)
    return NoiseIncrement(xi, dt, Field(u.grid, values))


# -- (de)serialization of [noise] ------------------------------------------------

def noise_from_dict(d: dict) -> tuple[NoiseBasis, int | None]:
    d = dict(d)
    K = int(d.pop("K", 0))
    decay = float(d.pop("decay", 3.0))
    c = float(d.pop("c", 0.5))
    seed = d.pop("seed", None)
    drop = [(int(k), str(par)) for k, par in d.pop("drop", [])]
    if d:
        raise ValueError(f"unknown [noise] keys: {sorted(d)}")
    basis = build_trig_basis(K, decay, c) if K > 0 else NoiseBasis((), c, 0, decay)
    for k, par in drop:
        if par not in ("cos", "sin"):
            raise ValueError(f"drop parity must be 'cos' or 'sin', got {par!r}")
        basis = basis.drop(k, par)
    return basis, (int(seed) if seed is not None else None)


def noise_to_dict(basis: NoiseBasis, seed: int | None = None) -> dict:
    present = {(m.k, m.parity) for m in basis.modes}
    dropped = [[k, par] for k in range(1, basis.K + 1) for par in ("cos", "sin") if (k, par) not in present]
    d = {"K": basis.K, "decay": basis.decay, "c": basis.c, "drop": dropped}
    if seed is not None:
        d["seed"] = seed
    return d
