"""Scenario configuration and well-prepared initial data.

A scenario pairs a flat initial state (r0, w0, J0) on omega with its
extrusion to the slab plus an O(eps) vertical perturbation of zero column
mean, so the relative entropy at t = 0 scales like (alpha * eps)^2.  The
radiation fields start at the isotropic emission equilibrium of the local
density on both levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angular import FOUR_PI, AngularQuadrature
from .grid import LayerGrid
from .model import ModelParams, Opacities, planck_bands, pressure
from .radiation import RadField, equilibrium_field
from .states import FluidState2, FluidState3, extrude_2d_to_3d

RECIPES = ("uniform", "gaussian-bump", "rotating-patch")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one sweep run."""

    nx: int = 32
    ny: int = 32
    nz: int = 8
    eps_list: tuple = (0.4, 0.2, 0.1, 0.05)
    regime: str = "fr1"
    recipe: str = "gaussian-bump"
    alpha: float = 0.1           # vertical perturbation amplitude
    t_end: float = 0.5
    cfl: float = 0.35
    rad_cfl: float = 0.8
    n_polar: int = 2
    n_azi: int = 4
    gravity_update_every: int = 25
    shape: str = "rect"
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if self.recipe not in RECIPES:
            raise ValueError(f"recipe must be one of {RECIPES}")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        eps = tuple(self.eps_list)
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps_list must be strictly decreasing")
        if any(e <= 0 for e in eps):
            raise ValueError("eps values must be positive")


def build_params(regime: str, **overrides) -> ModelParams:
    """Default model parameters per regime; gamma = 2.5 satisfies the
    shallow-scaling requirement gamma >= 12/5."""
    base = dict(gamma=2.0, a=1.0, mu=0.02, xi=0.0, chi=0.5, G=1.0)
    if regime == "freps":
        base["gamma"] = 2.5
    base.update(overrides)
    return ModelParams(regime=regime, **base)


def _radial_bump(grid: LayerGrid, width: float) -> np.ndarray:
    xx, yy = np.meshgrid(grid.xc, grid.yc, indexing="ij")
    return np.exp(-(xx**2 + yy**2) / (2.0 * width**2))


def flat_initial_state(recipe: str, grid: LayerGrid,
                       r_bar: float = 1.0) -> FluidState2:
    if recipe == "uniform":
        r = np.full((grid.nx, grid.ny), r_bar)
        w = np.zeros((2, grid.nx, grid.ny))
    elif recipe == "gaussian-bump":
        bump = _radial_bump(grid, 0.12)
        r = r_bar + 0.25 * bump
        # swirl = amp * grad^perp of a wider bump: divergence-free, decays
        # to ~1e-8 at the walls
        psi = _radial_bump(grid, 0.16)
        xx, yy = np.meshgrid(grid.xc, grid.yc, indexing="ij")
        coeff = 0.5 / 0.16**2
        w = np.stack([coeff * yy * psi, -coeff * xx * psi])
    elif recipe == "rotating-patch":
        bump = _radial_bump(grid, 0.15)
        r = r_bar + 0.15 * bump
        xx, yy = np.meshgrid(grid.xc, grid.yc, indexing="ij")
        w = 0.8 * np.stack([-yy * bump, xx * bump])
    else:
        raise ValueError(f"unknown recipe {recipe!r}")
    r = np.where(grid.mask, r, r_bar)
    w = np.where(grid.mask[None], w, 0.0)
    return FluidState2(r, w)


def build_well_prepared(recipe: str, grid: LayerGrid, params: ModelParams,
                        op: Opacities, quad: AngularQuadrature,
                        alpha: float = 0.1):
    """(state3, rad3, state2, j2) with an alpha*eps vertical perturbation.

    The perturbation rides on cos(pi x3) (density, horizontal velocity) and
    sin(pi x3) (vertical velocity), localized horizontally by a bump; the
    cosine profile has zero column mean on the midpoint grid by symmetry,
    so column-averaging the slab data returns the flat data up to roundoff.
    """
    state2 = flat_initial_state(recipe, grid)
    j2 = equilibrium_field(state2.r, quad, op)

    base3 = extrude_2d_to_3d(state2, grid)
    cz = np.cos(np.pi * grid.zc)                     # (nz,)
    sz = np.sin(np.pi * grid.zc)
    bump = _radial_bump(grid, 0.15)
    mod = alpha * grid.eps * bump[:, :, None] * cz[None, None, :]
    rho = base3.rho * (1.0 + mod)
    u = base3.u.copy()
    u[0] += mod
    u[1] -= 0.5 * mod
    u[2] += alpha * grid.eps * bump[:, :, None] * sz[None, None, :]
    mask3 = grid.mask[:, :, None]
    rho = np.where(mask3, rho, base3.rho)
    u = np.where(mask3[None], u, 0.0)
    state3 = FluidState3(rho, u)
    rad3 = equilibrium_field(rho, quad, op)
    return state3, rad3, state2, j2


# ---------------------------------------------------------------------------
# initial-data size report (no thresholds attached)


def _h1_norm(f: np.ndarray, grid: LayerGrid) -> float:
    gx = np.gradient(f, grid.hx, axis=0)
    gy = np.gradient(f, grid.hy, axis=1)
    m = grid.mask
    cell = grid.hx * grid.hy
    return float(np.sqrt(cell * ((f[m] ** 2).sum() + (gx[m] ** 2).sum()
                                 + (gy[m] ** 2).sum())))


def _lp_norm(f: np.ndarray, grid: LayerGrid, p: float) -> float:
    cell = grid.hx * grid.hy
    return float((cell * (np.abs(f[grid.mask]) ** p).sum()) ** (1.0 / p))


def initial_data_size(state2: FluidState2, j2: RadField, grid: LayerGrid,
                      params: ModelParams, op: Opacities) -> dict:
    """The two smallness measures of the flat data, reported as-is.

    e0 sums the distance of r from its mean, the H1 size of w, the H1 size
    of the radiative energy deviation, the L2 size of the viscous/pressure
    force residual T0, and the L4 size of the vorticity.  E0 adds gradient
    norms of r, T0, and the radiative energy (exponent 4 for the Lp term).
    No threshold is attached; the values locate the data relative to the
    small-data regime without quantifying it.
    """
    r, w = state2.r, state2.w
    m = grid.mask
    cell = grid.hx * grid.hy
    r_bar = float(r[m].mean())

    wdir = np.asarray(j2.quad.w)
    wf = np.asarray(op.freq_weights, dtype=float)
    e_rad = np.einsum("b,d,bdxy->xy", wf, wdir, j2.I) / FOUR_PI
    e_rad_bar = float(wf @ planck_bands(np.array(r_bar), op))

    gx = [np.gradient(w[c], grid.hx, axis=0) for c in range(2)]
    gy = [np.gradient(w[c], grid.hy, axis=1) for c in range(2)]
    vort = gy[0] - gx[1]
    w_h1 = np.sqrt(sum(_h1_norm(w[c], grid) ** 2 for c in range(2)))

    lap = [np.gradient(gx[c], grid.hx, axis=0)
           + np.gradient(gy[c], grid.hy, axis=1) for c in range(2)]
    divw = gx[0] + gy[1]
    grad_div = [np.gradient(divw, grid.hx, axis=0),
                np.gradient(divw, grid.hy, axis=1)]
    dp = [np.gradient(pressure(r, params), grid.hx, axis=0),
          np.gradient(pressure(r, params), grid.hy, axis=1)]
    t0 = [(params.mu * lap[c] + (params.xi + params.mu / 3.0) * grad_div[c]
           - dp[c]) / r for c in range(2)]
    t0_l2 = float(np.sqrt(cell * sum((t0[c][m] ** 2).sum() for c in range(2))))

    e0 = (float(np.abs(r[m] - r_bar).max()) + w_h1
          + _h1_norm(e_rad - e_rad_bar, grid) + t0_l2
          + _lp_norm(vort, grid, 4.0))

    grad_r_l2 = np.sqrt(_lp_norm(np.gradient(r, grid.hx, axis=0), grid, 2) ** 2
                        + _lp_norm(np.gradient(r, grid.hy, axis=1), grid, 2) ** 2)
    grad_r_l4 = (_lp_norm(np.gradient(r, grid.hx, axis=0), grid, 4) ** 4
                 + _lp_norm(np.gradient(r, grid.hy, axis=1), grid, 4) ** 4) ** 0.25
    grad_t0 = 0.0
    for c in range(2):
        grad_t0 += _lp_norm(np.gradient(t0[c], grid.hx, axis=0), grid, 2) ** 2
        grad_t0 += _lp_norm(np.gradient(t0[c], grid.hy, axis=1), grid, 2) ** 2
    grad_j = np.sqrt(_lp_norm(np.gradient(e_rad, grid.hx, axis=0), grid, 2) ** 2
                     + _lp_norm(np.gradient(e_rad, grid.hy, axis=1), grid, 2) ** 2)
    big_e0 = e0 + grad_r_l2 + grad_r_l4 + np.sqrt(grad_t0) + grad_j
    return {"e0": e0, "E0": float(big_e0)}
