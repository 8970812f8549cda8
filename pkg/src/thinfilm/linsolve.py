"""Backward-Euler resolvent of the frozen-coefficient operator ``v -> D_flux(a D_face(lap v))``.

The periodic system ``(I + dt L_a) v = rhs`` is cyclic pentadiagonal.  It is split as
``B + U V^T`` with ``B`` banded and a rank-2 corner correction, factored with LAPACK
``gbtrf`` and solved through the Woodbury identity.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from .grid import d_face, d_flux, laplacian


class SingularSystemError(np.linalg.LinAlgError):
    pass


def apply_operator(a_faces: np.ndarray, v: np.ndarray, h: float) -> np.ndarray:
    """``L_a v`` in flux form; ``a_faces[i]`` sits at ``x_{i+1/2}``."""
    return d_flux(a_faces * d_face(laplacian(v, h), h), h)


def stencil_diagonals(a_faces: np.ndarray, h: float):
    """Five diagonals (offsets -2..2, indexed by row) of ``L_a`` times ``h^4``."""
    ap = a_faces
    am = np.roll(a_faces, 1)
    return am, -ap - 3 * am, 3 * ap + 3 * am, -3 * ap - am, ap


def implicit_solve(a_faces, rhs, dt: float, h: float | None = None, tol: float = 1e-10) -> np.ndarray:
    """Solve ``(I + dt L_a) v = rhs`` on the periodic grid.

    Parameters
    ----------
    a_faces : array, shape (n,)
        Positive face coefficients.
    rhs : array or Field
    dt : float
        Positive step (``dt = 0`` returns ``rhs``).
    h : float, optional
        Grid spacing, default ``1/n``.

    One step of iterative refinement is applied when the residual exceeds
    ``0.01 * tol * max|rhs|``, and the mean of ``rhs`` is restored exactly.
    """
    rhs = np.asarray(getattr(rhs, "values", rhs), dtype=float)
    a_faces = np.asarray(a_faces, dtype=float)
    n = rhs.shape[0]
    if h is None:
        h = 1.0 / n
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if np.any(~(a_faces > 0)):
        raise ValueError("face coefficients must be positive")
    if dt == 0:
        return rhs.copy()

    c = dt / h**4
    dm2, dm1, d0, dp1, dp2 = (c * d for d in stencil_diagonals(a_faces, h))
    d0 = d0 + 1.0

    # corner blocks of the cyclic matrix
    C_tr = np.array([[dm2[0], dm1[0]], [0.0, dm2[1]]])
    C_bl = np.array([[dp2[n - 2], 0.0], [dp1[n - 1], dp2[n - 1]]])
    G = -np.diag([d0[0], d0[1]])
    Ginv_Ctr = np.linalg.solve(G, C_tr)
    corr = C_bl @ Ginv_Ctr

    kl = ku = 2
    ab = np.zeros((2 * kl + ku + 1, n))
    row = kl + ku  # main diagonal row in gbtrf storage
    ab[row, :] = d0
    ab[row - 1, 1:] = dp1[:-1]
    ab[row - 2, 2:] = dp2[:-2]
    ab[row + 1, :-1] = dm1[1:]
    ab[row + 2, :-2] = dm2[2:]
    ab[row, 0] -= G[0, 0]
    ab[row, 1] -= G[1, 1]
    # bottom-right 2x2 block of B: (n-2,n-2) (n-2,n-1) (n-1,n-2) (n-1,n-1)
    ab[row, n - 2] -= corr[0, 0]
    ab[row - 1, n - 1] -= corr[0, 1]
    ab[row + 1, n - 2] -= corr[1, 0]
    ab[row, n - 1] -= corr[1, 1]

    lu, piv, info = lapack.dgbtrf(ab, kl, ku)
    if info != 0:
        raise SingularSystemError(f"banded factorization failed (info={info})")

    U = np.zeros((n, 2))
    U[0:2, :] = G
    U[n - 2:, :] = C_bl

    def solve_B(b):
        x, info = lapack.dgbtrs(lu, kl, ku, b, piv)
        if info != 0:
            raise SingularSystemError(f"banded solve failed (info={info})")
        return x

    Z = solve_B(U)

    def VT(x):
        return x[0:2] + Ginv_Ctr @ x[n - 2:]

    cap = np.eye(2) + VT(Z)
    try:
        cap_inv = np.linalg.inv(cap)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("Woodbury capacitance matrix is singular") from exc

    def solve(b):
        y = solve_B(b)
        return y - Z @ (cap_inv @ VT(y))

    v = solve(rhs)
    scale = max(np.max(np.abs(rhs)), np.finfo(float).tiny)
    res = rhs - (v + dt * apply_operator(a_faces, v, h))
    if np.max(np.abs(res)) > 0.01 * tol * scale:
        v = v + solve(res)
    # constants are in the kernel of L_a, so the exact solution has the mean of rhs;
    # restoring it removes the round-off bias that would otherwise accumulate over many steps
    return v + (np.mean(rhs) - np.mean(v))


def residual(a_faces, v, rhs, dt: float, h: float | None = None) -> float:
    """``max |(I + dt L_a) v - rhs|``."""
    v = np.asarray(v, dtype=float)
    if h is None:
        h = 1.0 / v.shape[0]
    return float(np.max(np.abs(v + dt * apply_operator(np.asarray(a_faces), v, h) - np.asarray(rhs))))
