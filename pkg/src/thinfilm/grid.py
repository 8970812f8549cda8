"""Uniform periodic grid on the unit torus with finite-difference and Fourier operators.

Finite differences are written in flux form so that every discrete divergence
telescopes to zero under :func:`integrate`.  Fourier coefficients are unitary
(forward transform divided by ``n``), so Parseval holds without extra factors.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TorusGrid:
    """``n`` equispaced points ``x_i = i/n`` on the torus of length 1."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    @property
    def wavenumbers(self) -> np.ndarray:
        """Integer frequencies of the real FFT, ``0..n/2``."""
        return np.arange(self.n // 2 + 1)

    def field(self, values) -> "Field":
        return Field(self, values)

    def sample(self, func) -> "Field":
        return Field(self, func(self.x))


class Field:
    """Point samples of a real periodic function; values are read-only."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: TorusGrid, values):
        arr = np.array(values, dtype=float)
        if arr.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} values, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        arr.flags.writeable = False
        self.grid = grid
        self.values = arr

    def __repr__(self):
        return f"Field(n={self.grid.n}, min={self.values.min():.6g}, max={self.values.max():.6g})"

    def __len__(self):
        return self.grid.n

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)


# -- array-level kernels (used directly by the solver) ---------------------

def d_face(v: np.ndarray, h: float) -> np.ndarray:
    """Forward difference onto faces: entry i lives at x_{i+1/2}."""
    return (np.roll(v, -1) - v) / h


def d_flux(F: np.ndarray, h: float) -> np.ndarray:
    """Divergence of a face array back onto nodes: (F_{i+1/2} - F_{i-1/2}) / h."""
    return (F - np.roll(F, 1)) / h


def face_average(v: np.ndarray) -> np.ndarray:
    return 0.5 * (v + np.roll(v, -1))


def laplacian(v: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(v, -1) - 2.0 * v + np.roll(v, 1)) / (h * h)


def central_diff(v: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(v, -1) - np.roll(v, 1)) / (2.0 * h)


def fd_diff_array(v: np.ndarray, h: float, order: int) -> np.ndarray:
    if order == 1:
        return central_diff(v, h)
    if order == 2:
        return laplacian(v, h)
    if order == 4:
        return laplacian(laplacian(v, h), h)
    raise ValueError(f"unsupported finite-difference order {order!r}; use 1, 2 or 4")


def spectral_diff_array(v: np.ndarray, order: int) -> np.ndarray:
    n = v.shape[-1]
    k = np.arange(n // 2 + 1)
    symbol = (1j * TWO_PI * k) ** order
    if order % 2:
        symbol[-1] = 0.0
    return np.fft.irfft(np.fft.rfft(v) * symbol, n)


def unitary_coefficients(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full two-sided coefficients f_k = (1/n) sum_j f_j e^{-2 pi i k x_j}, k = -n/2..n/2-1."""
    n = v.shape[-1]
    c = np.fft.fft(v) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    return k, c


# -- Field-level operations ------------------------------------------------

def fd_diff(f: Field, order: int) -> Field:
    """Centered periodic difference of order 1, 2 or 4 (order 4 is the second difference twice)."""
    return Field(f.grid, fd_diff_array(f.values, f.grid.h, order))


def spectral_diff(f: Field, order: int) -> Field:
    if order < 1 or int(order) != order:
        raise ValueError("spectral derivative order must be a positive integer")
    return Field(f.grid, spectral_diff_array(f.values, int(order)))


def integrate(f) -> float:
    """Periodic trapezoid rule ``h * sum(f)``; accepts a Field or a raw array."""
    if isinstance(f, Field):
        return float(f.grid.h * np.sum(f.values))
    v = np.asarray(f, dtype=float)
    return float(np.sum(v) / v.shape[-1])


def sobolev_norm(f, s: float) -> float:
    """Spectral H^s norm with weight (1 + (2 pi k)^2)^s on unitary coefficients."""
    if not -4.0 <= s <= 4.0:
        raise ValueError("Sobolev index must lie in [-4, 4]")
    v = f.values if isinstance(f, Field) else np.asarray(f, dtype=float)
    k, c = unitary_coefficients(v)
    weight = (1.0 + (TWO_PI * k) ** 2) ** s
    return float(np.sqrt(np.sum(weight * np.abs(c) ** 2)))


def lq_norm(f, q: float) -> float:
    v = f.values if isinstance(f, Field) else np.asarray(f, dtype=float)
    if q == np.inf:
        return float(np.max(np.abs(v)))
    if q < 1:
        raise ValueError("q must be >= 1 or inf")
    return float(np.mean(np.abs(v) ** q) ** (1.0 / q))


def spectral_resample(f: Field, n_new: int) -> Field:
    """Trigonometric interpolation onto a grid of ``n_new`` points (truncating if coarser)."""
    n = f.grid.n
    c = np.fft.rfft(f.values) / n
    m = n_new // 2 + 1
    out = np.zeros(m, dtype=complex)
    keep = min(m, c.size)
    out[:keep] = c[:keep]
    # split the old Nyquist mode when refining so the interpolant stays real and symmetric
    if n_new > n:
        out[n // 2] *= 0.5
    if n_new < n:
        out[-1] = 2.0 * out[-1].real
    return Field(TorusGrid(n_new), np.fft.irfft(out * n_new, n_new))


# -- snapshot file ------------------------------------------------------------

def write_snapshot(f: Field, path) -> None:
    lines = [f"# n={f.grid.n} h={f.grid.h!r}"]
    lines.extend(f"{v:.17g}" for v in f.values)
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> Field:
    text = Path(path).read_text().splitlines()
    header = text[0]
    if not header.startswith("#"):
        raise ValueError(f"{path}: missing '# n=<n> h=<h>' header")
    meta = dict(tok.split("=", 1) for tok in header[1:].split())
    n = int(meta["n"])
    values = [float(line) for line in text[1:] if line.strip()]
    return Field(TorusGrid(n), values)
