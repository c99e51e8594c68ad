"""Incompressible Darcy flow by cell-centered finite volumes.

Pressure is split as ``p = -G x + q`` with ``q`` periodic in x and no-flux
walls in y. The problem is linear in ``G``, so one solve with ``G = 1``
followed by rescaling fixes the mean streamwise velocity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .grf import Grid2D

__all__ = ["VelocityField", "solve_darcy"]


@dataclass
class VelocityField:
    """Face-normal velocities.

    ``u[i, j]`` lives on the face between cells ``i-1`` and ``i`` (periodic);
    ``v[i, j]`` on the face below cell ``(i, j)``, with ``v[:, n_y]`` the top
    wall. Wall values are zero.
    """

    u: np.ndarray
    v: np.ndarray
    grid: Grid2D
    gradient: float

    @property
    def divergence(self) -> np.ndarray:
        g = self.grid
        return (np.roll(self.u, -1, axis=0) - self.u) / g.dx + (self.v[:, 1:] - self.v[:, :-1]) / g.dy

    @property
    def u_center(self) -> np.ndarray:
        return 0.5 * (self.u + np.roll(self.u, -1, axis=0))

    @property
    def v_center(self) -> np.ndarray:
        return 0.5 * (self.v[:, 1:] + self.v[:, :-1])

    @property
    def mean_u(self) -> float:
        return float(self.u.mean())

    def relative_divergence(self) -> float:
        scale = max(np.abs(self.u).max() / self.grid.dx, 1e-300)
        return float(np.abs(self.divergence).max() / scale)


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


def solve_darcy(kappa, u_mean: float = 1.0, grid: Grid2D | None = None) -> VelocityField:
    kappa = np.asarray(kappa, dtype=float)
    if grid is None:
        grid = Grid2D(kappa.shape[0], kappa.shape[1])
    nx, ny = grid.n_x, grid.n_y
    if kappa.shape != (nx, ny):
        raise ValueError(f"kappa shape {kappa.shape} does not match grid ({nx}, {ny})")
    if np.any(kappa <= 0) or not np.all(np.isfinite(kappa)):
        raise ValueError("permeability must be positive and finite")
    dx, dy = grid.dx, grid.dy

    # x-face i sits between cells i-1 and i; y-face j between rows j-1 and j
    kx = _harmonic(np.roll(kappa, 1, axis=0), kappa)
    ky = _harmonic(kappa[:, :-1], kappa[:, 1:])
    tx = kx * dy / dx
    ty = ky * dx / dy

    idx = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, vals = [], [], []

    def couple(a, b, t):
        rows.extend([a, a, b, b])
        cols.extend([a, b, b, a])
        vals.extend([t, -t, t, -t])

    couple(np.roll(idx, 1, axis=0).ravel(), idx.ravel(), tx.ravel())
    couple(idx[:, :-1].ravel(), idx[:, 1:].ravel(), ty.ravel())
    A = sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nx * ny,) * 2
    )
    # flux of the unit linear ramp -x through x-faces: tx * dx entering each cell
    ramp = tx * dx
    rhs = (ramp - np.roll(ramp, -1, axis=0)).ravel()

    # pin q at one cell; the periodic/no-flux operator has a constant null space
    A = A.tolil()
    A[0, :] = 0.0
    A[0, 0] = 1.0
    rhs[0] = 0.0
    q = splu(A.tocsc()).solve(rhs).reshape(nx, ny)

    dq_x = q - np.roll(q, 1, axis=0)
    u = -kx * (dq_x / dx - 1.0)
    v = np.zeros((nx, ny + 1))
    v[:, 1:-1] = -ky * (q[:, 1:] - q[:, :-1]) / dy

    G = u_mean / u.mean()
    return VelocityField(G * u, G * v, grid, G)
