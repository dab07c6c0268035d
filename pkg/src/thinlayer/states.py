"""Fluid state containers and the extrusion/column-average pair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import LayerGrid


@dataclass
class FluidState3:
    """Density rho (nx,ny,nz) and velocity u (3,nx,ny,nz) on the slab."""

    rho: np.ndarray
    u: np.ndarray

    def validate(self, grid: LayerGrid):
        if self.rho.shape != (grid.nx, grid.ny, grid.nz):
            raise ValueError("rho shape mismatch")
        if self.u.shape != (3, grid.nx, grid.ny, grid.nz):
            raise ValueError("u shape mismatch")
        if np.any(self.rho[grid.mask, :] < 0):
            raise ValueError("negative density")

    def copy(self) -> "FluidState3":
        return FluidState3(self.rho.copy(), self.u.copy())

    @property
    def momentum(self) -> np.ndarray:
        return self.rho[None, ...] * self.u


@dataclass
class FluidState2:
    """Target-system state: density r (nx,ny), velocity w (2,nx,ny)."""

    r: np.ndarray
    w: np.ndarray

    def validate(self, grid: LayerGrid):
        if self.r.shape != (grid.nx, grid.ny):
            raise ValueError("r shape mismatch")
        if self.w.shape != (2, grid.nx, grid.ny):
            raise ValueError("w shape mismatch")
        if np.any(self.r[grid.mask] < 0):
            raise ValueError("negative density")

    def copy(self) -> "FluidState2":
        return FluidState2(self.r.copy(), self.w.copy())


def extrude_2d_to_3d(state2: FluidState2, grid: LayerGrid) -> FluidState3:
    """Constant-in-x3 extension of a flat state; vertical velocity zero.

    Exact inverse of column_average on its range.
    """
    nz = grid.nz
    rho = np.repeat(state2.r[:, :, None], nz, axis=2)
    u = np.zeros((3, grid.nx, grid.ny, nz))
    u[0] = state2.w[0][:, :, None]
    u[1] = state2.w[1][:, :, None]
    return FluidState3(rho, u)


def column_average(state3: FluidState3) -> FluidState2:
    """Vertical mean of density and of momentum (velocity = mean m / mean rho)."""
    r = state3.rho.mean(axis=2)
    m = (state3.rho[None, ...] * state3.u).mean(axis=3)
    w = np.where(r[None, ...] > 0, m[:2] / np.maximum(r[None, ...], 1e-300), 0.0)
    return FluidState2(r, w)
