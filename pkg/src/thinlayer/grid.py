"""Rescaled thin-layer grid.

The computational domain is the unit-thickness slab Omega = omega x (0, 1),
where omega is a horizontal region centered at the origin (a rectangle by
default, optionally a disk or annulus selected by a cell mask).  The physical
layer has thickness eps; all vertical derivatives therefore carry a 1/eps and
the vertical coordinate stored here is the rescaled x3 in (0, 1).

Cells are uniform hx * hy * hz with hz = 1/nz always.  A boolean column mask
selects the active part of omega; masked-out columns take no part in any
update or reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

LATERAL, TOP, BOTTOM, INTERIOR = "lateral", "top", "bottom", "interior"


@dataclass
class LayerGrid:
    """Uniform cell-centered grid on omega x (0,1) with aspect ratio eps.

    Parameters
    ----------
    nx, ny, nz : int
        Cell counts. nz >= 2 so vertical differences exist.
    eps : float
        Layer aspect ratio in (0, 1]; scales every vertical derivative.
    lx, ly : float
        Horizontal extents of the bounding rectangle, centered at 0.
    shape : str
        "rect" (default), "disk", or "annulus"; anything but "rect"
        carves the mask out of the bounding rectangle.
    """

    nx: int
    ny: int
    nz: int
    eps: float
    lx: float = 1.0
    ly: float = 1.0
    shape: str = "rect"
    r_outer: float = 0.48
    r_inner: float = 0.2
    mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2 or self.nz < 2:
            raise ValueError("grid needs at least 2 cells per axis")
        if not (0.0 < self.eps <= 1.0):
            raise ValueError(f"eps must lie in (0,1], got {self.eps}")
        self.hx = self.lx / self.nx
        self.hy = self.ly / self.ny
        self.hz = 1.0 / self.nz
        self.xc = (np.arange(self.nx) + 0.5) * self.hx - 0.5 * self.lx
        self.yc = (np.arange(self.ny) + 0.5) * self.hy - 0.5 * self.ly
        self.zc = (np.arange(self.nz) + 0.5) * self.hz
        xx, yy = np.meshgrid(self.xc, self.yc, indexing="ij")
        if self.shape == "rect":
            self.mask = np.ones((self.nx, self.ny), dtype=bool)
        elif self.shape == "disk":
            self.mask = xx**2 + yy**2 < self.r_outer**2
        elif self.shape == "annulus":
            rr = np.sqrt(xx**2 + yy**2)
            self.mask = (rr > self.r_inner) & (rr < self.r_outer)
        else:
            raise ValueError(f"unknown shape {self.shape!r}")
        if not self.mask.any():
            raise ValueError("mask selects no cells")
        n_comp = ndimage.label(self.mask)[1]
        if n_comp != 1:
            raise ValueError(f"mask must be connected, found {n_comp} components")

    # -- geometry helpers -------------------------------------------------

    @property
    def cell_volume(self) -> float:
        # volume element of the rescaled slab (the eps of the physical layer
        # is carried by the operators, not the measure)
        return self.hx * self.hy * self.hz

    @property
    def n_active(self) -> int:
        return int(self.mask.sum()) * self.nz

    def cell_centers_3d(self):
        """Arrays (X, Y, Z) of shape (nx, ny, nz) with rescaled x3."""
        return np.meshgrid(self.xc, self.yc, self.zc, indexing="ij")

    def integrate(self, f: np.ndarray) -> float:
        """Mask-aware integral of a cell field over Omega (or omega if 2D)."""
        if f.ndim == 2:
            return float(f[self.mask].sum() * self.hx * self.hy)
        return float(f[self.mask, :].sum() * self.cell_volume)

    def sup(self, f: np.ndarray) -> float:
        if f.ndim == 2:
            return float(np.abs(f[self.mask]).max())
        return float(np.abs(f[self.mask, :]).max())

    def with_eps(self, eps: float) -> "LayerGrid":
        return LayerGrid(self.nx, self.ny, self.nz, eps, self.lx, self.ly,
                         self.shape, self.r_outer, self.r_inner)

    # -- boundary classification ------------------------------------------

    def face_classification(self):
        """Classify every face of every active cell.

        Returns a dict axis -> (is_boundary_low, is_boundary_high) of boolean
        (nx, ny) column arrays for the lateral axes, plus the implied top and
        bottom z-faces.  A lateral face is one between an active cell and
        either a masked-out neighbor or the rectangle edge.  Used by tests and
        by the boundary-flux monitors; the steppers use the padded-ring
        machinery below.
        """
        m = self.mask
        lo_x = m.copy()
        lo_x[1:, :] &= ~m[:-1, :]
        hi_x = m.copy()
        hi_x[:-1, :] &= ~m[1:, :]
        lo_y = m.copy()
        lo_y[:, 1:] &= ~m[:, :-1]
        hi_y = m.copy()
        hi_y[:, :-1] &= ~m[:, 1:]
        return {"x": (lo_x, hi_x), "y": (lo_y, hi_y)}

    def count_faces(self):
        """Face counts by class; interior faces counted once."""
        m = self.mask
        cls = self.face_classification()
        lateral = sum(int(a.sum()) + int(b.sum()) for a, b in cls.values()) * self.nz
        top = bottom = int(m.sum())
        interior_x = int((m[1:, :] & m[:-1, :]).sum()) * self.nz
        interior_y = int((m[:, 1:] & m[:, :-1]).sum()) * self.nz
        interior_z = int(m.sum()) * (self.nz - 1)
        return {LATERAL: lateral, TOP: top, BOTTOM: bottom,
                INTERIOR: interior_x + interior_y + interior_z}


def pad_columns(f: np.ndarray) -> np.ndarray:
    """Return a copy of f padded by one ghost layer on every axis."""
    return np.pad(f, [(1, 1)] * f.ndim, mode="constant")


def padded_mask(grid: LayerGrid) -> np.ndarray:
    m = np.zeros((grid.nx + 2, grid.ny + 2), dtype=bool)
    m[1:-1, 1:-1] = grid.mask
    return m


def lateral_ghost_pairs(grid: LayerGrid):
    """Index pairs (ghost, donor) for the lateral boundary ring.

    In padded column coordinates (nx+2, ny+2): for every inactive padded cell
    adjacent (4-neighborhood) to an active cell, pair it with that active
    neighbor.  A ghost with several active neighbors appears once per
    neighbor *axis* it is consulted from, so the pairs are returned per axis
    and direction to keep the donor unambiguous for one-dimensional sweeps.

    Returns dict: (axis, side) -> (ghost_idx, donor_idx), each a tuple of
    integer arrays in padded coordinates.
    """
    m = padded_mask(grid)
    out = {}
    # axis 0, side "low": ghost at i-1 of an active cell i (sweep direction +x)
    act = np.argwhere(m)
    for (axis, side, di, dj) in [("x", "lo", -1, 0), ("x", "hi", 1, 0),
                                 ("y", "lo", 0, -1), ("y", "hi", 0, 1)]:
        gi = act[:, 0] + di
        gj = act[:, 1] + dj
        sel = ~m[gi, gj]
        out[(axis, side)] = ((gi[sel], gj[sel]), (act[sel, 0], act[sel, 1]))
    return out
