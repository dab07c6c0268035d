"""Finite-volume steppers for the slab system and its flat target.

Donor-cell upwind convection, centered face pressure, face-based Newtonian
stress (tight normal derivative, averaged tangential ones), forward Euler in
time.  Every vertical difference carries the 1/eps of the rescaled operator.

Boundary conditions: no-slip lateral walls (mirror-negated ghost velocity,
zero-gradient ghost density, so wall-face mean velocities vanish exactly and
mass telescopes to a constant), slip top and bottom (tangential mirror,
normal negation).  The same ghost machinery serves masked (disk/annulus)
domains through the boundary ring.

The two steppers are written so a column-uniform 3D state with zero vertical
velocity reproduces the flat update exactly: the 3D horizontal stress block
restricted to such states carries the shifted bulk coefficient xi + mu/3 the
flat stress uses, vertical fluxes vanish identically, and sources agree.
That discrete shadow of the dimension-reduction limit is what the relative
entropy diagnostics lean on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import LayerGrid, lateral_ghost_pairs
from .model import (ModelParams, centrifugal_2d, pressure, pressure_derivative,
                    pressure_potential, stress2_h, stress3, stress_contraction,
                    stress2_contraction)
from .states import FluidState2, FluidState3


@dataclass(frozen=True)
class HydroStepConfig:
    cfl: float = 0.4
    vacuum_floor: float = 1e-12
    max_halvings: int = 5   # dt back-off attempts before giving up


DEFAULT_CONFIG = HydroStepConfig()


class HydroStepError(RuntimeError):
    pass


def _ghost_pairs(grid: LayerGrid):
    pairs = getattr(grid, "_ghost_pairs", None)
    if pairs is None:
        pairs = lateral_ghost_pairs(grid)
        grid._ghost_pairs = pairs
    return pairs


def _active_padded(grid: LayerGrid) -> np.ndarray:
    """Padded column activity mask; ghosts and out-of-shape cells are False."""
    act = getattr(grid, "_active_padded", None)
    if act is None:
        act = np.zeros((grid.nx + 2, grid.ny + 2), dtype=bool)
        act[1:-1, 1:-1] = grid.mask
        grid._active_padded = act
    return act


# ---------------------------------------------------------------------------
# ghost filling


def fill_ghosts_3d(state: FluidState3, grid: LayerGrid):
    """Padded (rho, u) honoring slip top/bottom and no-slip lateral walls."""
    nx, ny, nz = grid.nx, grid.ny, grid.nz
    rho_p = np.zeros((nx + 2, ny + 2, nz + 2))
    u_p = np.zeros((3, nx + 2, ny + 2, nz + 2))
    rho_p[1:-1, 1:-1, 1:-1] = state.rho
    u_p[:, 1:-1, 1:-1, 1:-1] = state.u
    # slip walls at x3 = 0, 1: mirror tangential, negate normal
    rho_p[:, :, 0] = rho_p[:, :, 1]
    rho_p[:, :, -1] = rho_p[:, :, -2]
    u_p[0, :, :, 0] = u_p[0, :, :, 1]
    u_p[1, :, :, 0] = u_p[1, :, :, 1]
    u_p[2, :, :, 0] = -u_p[2, :, :, 1]
    u_p[0, :, :, -1] = u_p[0, :, :, -2]
    u_p[1, :, :, -1] = u_p[1, :, :, -2]
    u_p[2, :, :, -1] = -u_p[2, :, :, -2]
    # lateral ring: no-slip
    for (gi, gj), (di, dj) in _ghost_pairs(grid).values():
        rho_p[gi, gj, :] = rho_p[di, dj, :]
        u_p[:, gi, gj, :] = -u_p[:, di, dj, :]
    return rho_p, u_p


def fill_ghosts_2d(state: FluidState2, grid: LayerGrid):
    rho_p = np.zeros((grid.nx + 2, grid.ny + 2))
    w_p = np.zeros((2, grid.nx + 2, grid.ny + 2))
    rho_p[1:-1, 1:-1] = state.r
    w_p[:, 1:-1, 1:-1] = state.w
    for (gi, gj), (di, dj) in _ghost_pairs(grid).values():
        rho_p[gi, gj] = rho_p[di, dj]
        w_p[:, gi, gj] = -w_p[:, di, dj]
    return rho_p, w_p


# ---------------------------------------------------------------------------
# cell-centered scaled gradients (diagnostics and tangential face averages)


def velocity_gradient_3d(u_p: np.ndarray, grid: LayerGrid) -> np.ndarray:
    """Scaled gradient G[i, j] = d^eps_j u_i at cell centers, (3,3,nx,ny,nz)."""
    g = np.empty((3, 3, grid.nx, grid.ny, grid.nz))
    for c in range(3):
        g[c, 0] = (u_p[c, 2:, 1:-1, 1:-1] - u_p[c, :-2, 1:-1, 1:-1]) / (2 * grid.hx)
        g[c, 1] = (u_p[c, 1:-1, 2:, 1:-1] - u_p[c, 1:-1, :-2, 1:-1]) / (2 * grid.hy)
        g[c, 2] = (u_p[c, 1:-1, 1:-1, 2:] - u_p[c, 1:-1, 1:-1, :-2]) / \
            (2 * grid.hz * grid.eps)
    return g


def velocity_gradient_2d(w_p: np.ndarray, grid: LayerGrid) -> np.ndarray:
    g = np.empty((2, 2, grid.nx, grid.ny))
    for c in range(2):
        g[c, 0] = (w_p[c, 2:, 1:-1] - w_p[c, :-2, 1:-1]) / (2 * grid.hx)
        g[c, 1] = (w_p[c, 1:-1, 2:] - w_p[c, 1:-1, :-2]) / (2 * grid.hy)
    return g


def _face_average(cell_values: np.ndarray, axis: int) -> np.ndarray:
    """Cell field -> face field along axis (one-sided at the two ends)."""
    n = cell_values.shape[axis]
    lead = [slice(None)] * cell_values.ndim
    shape = list(cell_values.shape)
    shape[axis] = n + 1
    out = np.empty(shape)
    lo = lead.copy(); lo[axis] = slice(1, n)
    a = lead.copy(); a[axis] = slice(0, n - 1)
    b = lead.copy(); b[axis] = slice(1, n)
    out[tuple(lo)] = 0.5 * (cell_values[tuple(a)] + cell_values[tuple(b)])
    first = lead.copy(); first[axis] = 0
    cf = lead.copy(); cf[axis] = 0
    out[tuple(first)] = cell_values[tuple(cf)]
    last = lead.copy(); last[axis] = n
    cl = lead.copy(); cl[axis] = n - 1
    out[tuple(last)] = cell_values[tuple(cl)]
    return out


# ---------------------------------------------------------------------------
# 3D step


def step3d(state: FluidState3, grid: LayerGrid, params: ModelParams, dt: float,
           gravity: np.ndarray | None = None,
           rad_force: np.ndarray | None = None,
           config: HydroStepConfig = DEFAULT_CONFIG):
    """One forward-Euler finite-volume step of the slab system.

    gravity: force field per unit density (3, nx, ny, nz), already in the
    form the momentum source multiplies by rho (regime handled by caller).
    rad_force: radiative momentum source S_F (3, nx, ny, nz).

    Returns (new_state, diag) where diag carries the energy-ledger rates
    evaluated on the pre-step state and the vacuum-guard mass.
    """
    nx, ny, nz = grid.nx, grid.ny, grid.nz
    hx, hy, hz, eps = grid.hx, grid.hy, grid.hz, grid.eps
    rho_p, u_p = fill_ghosts_3d(state, grid)
    m_p = rho_p[None] * u_p
    p_p = pressure(rho_p, params)
    gcell = velocity_gradient_3d(u_p, grid)
    act_p = np.zeros((nx + 2, ny + 2, nz + 2), dtype=bool)
    act_p[:, :, 1:-1] = _active_padded(grid)[:, :, None]

    div_terms_mass = np.zeros((nx, ny, nz))
    div_terms_mom = np.zeros((3, nx, ny, nz))

    for axis, (h, scale) in enumerate([(hx, 1.0), (hy, 1.0), (hz, eps)]):
        sl_lo = [slice(1, -1)] * 3
        sl_hi = [slice(1, -1)] * 3
        sl_lo[axis] = slice(0, -1)
        sl_hi[axis] = slice(1, None)
        sl_lo = (slice(None),) + tuple(sl_lo)
        sl_hi = (slice(None),) + tuple(sl_hi)
        ubar = 0.5 * (u_p[(axis,) + sl_lo[1:]] + u_p[(axis,) + sl_hi[1:]])
        up = ubar > 0
        rho_face = np.where(up, rho_p[sl_lo[1:]], rho_p[sl_hi[1:]])
        # advective fluxes vanish on wall faces; the mirrored ghosts already
        # give a zero face velocity except where one ghost cell serves
        # donors from both sweep directions (staircase corners of a curved
        # ring), so the wall faces are closed explicitly
        wall = ~(act_p[sl_lo[1:]] & act_p[sl_hi[1:]])
        f_mass = np.where(wall, 0.0, rho_face * ubar)
        m_face = np.where(up[None], m_p[sl_lo], m_p[sl_hi])
        f_mom = np.where(wall[None], 0.0, m_face * ubar[None])
        f_mom[axis] += 0.5 * (p_p[sl_lo[1:]] + p_p[sl_hi[1:]])

        # face stress: tight normal derivative, averaged tangential ones
        gface = np.empty((3, 3) + ubar.shape)
        for c in range(3):
            gface[c, axis] = (u_p[(c,) + sl_hi[1:]] - u_p[(c,) + sl_lo[1:]]) / \
                (h * scale)
            for t in range(3):
                if t != axis:
                    gface[c, t] = _face_average(gcell[c, t], axis)
        sface = stress3(gface, params)
        f_mom -= sface[:, axis]

        dslice = [slice(None)] * 3
        dslice[axis] = slice(1, None)
        lo_d = [slice(None)] * 3
        lo_d[axis] = slice(0, -1)
        inv = 1.0 / (h * scale)
        div_terms_mass += (f_mass[tuple(dslice)] - f_mass[tuple(lo_d)]) * inv
        div_terms_mom += (f_mom[(slice(None),) + tuple(dslice)] -
                          f_mom[(slice(None),) + tuple(lo_d)]) * inv

    # sources on the pre-step state
    rho, u = state.rho, state.u
    src = np.zeros((3, nx, ny, nz))
    chi = params.chi
    src[0] += rho * chi * u[1]
    src[1] -= rho * chi * u[0]
    X, Y, _ = grid.cell_centers_3d()
    cent = centrifugal_2d(X[:, :, 0], Y[:, :, 0], params)
    src[0] += rho * cent[0][:, :, None]
    src[1] += rho * cent[1][:, :, None]
    work_cent = grid.integrate(rho * (cent[0][:, :, None] * u[0] +
                                      cent[1][:, :, None] * u[1]))
    work_grav = 0.0
    if gravity is not None:
        src += rho[None] * gravity
        work_grav = grid.integrate(rho * np.einsum("cxyz,cxyz->xyz", gravity, u))
    work_rad = 0.0
    if rad_force is not None:
        src += rad_force
        work_rad = grid.integrate(np.einsum("cxyz,cxyz->xyz", rad_force, u))

    rho_new = rho - dt * div_terms_mass
    m_new = rho[None] * u - dt * div_terms_mom + dt * src

    if np.any(rho_new[grid.mask, :] < 0):
        raise HydroStepError("negative density after step; reduce dt")
    clip = np.maximum(rho_new, config.vacuum_floor)
    clip_mass = grid.integrate(np.where(grid.mask[:, :, None],
                                        clip - rho_new, 0.0))
    rho_new = clip
    u_new = m_new / rho_new[None]

    mask3 = grid.mask[:, :, None]
    rho_new = np.where(mask3, rho_new, rho)
    u_new = np.where(mask3[None], u_new, u)

    diss = grid.integrate(stress_contraction(gcell, params))
    diag = {"diss": diss, "work_grav": work_grav, "work_cent": work_cent,
            "work_rad": work_rad, "clip_mass": clip_mass,
            "max_speed": float(np.abs(u[:, grid.mask, :]).max())}
    return FluidState3(rho_new, u_new), diag


# ---------------------------------------------------------------------------
# 2D step


def step2d(state: FluidState2, grid: LayerGrid, params: ModelParams, dt: float,
           gravity: np.ndarray | None = None,
           rad_force: np.ndarray | None = None,
           forcing: tuple | None = None,
           config: HydroStepConfig = DEFAULT_CONFIG):
    """One forward-Euler step of the flat target system.

    forcing: optional manufactured-solution pair (f_mass, f_mom) with shapes
    (nx, ny) and (2, nx, ny), added to the continuity and momentum updates.
    """
    nx, ny = grid.nx, grid.ny
    hx, hy = grid.hx, grid.hy
    rho_p, w_p = fill_ghosts_2d(state, grid)
    m_p = rho_p[None] * w_p
    p_p = pressure(rho_p, params)
    gcell = velocity_gradient_2d(w_p, grid)
    act_p = _active_padded(grid)

    div_mass = np.zeros((nx, ny))
    div_mom = np.zeros((2, nx, ny))
    for axis, h in enumerate([hx, hy]):
        sl_lo = [slice(1, -1)] * 2
        sl_hi = [slice(1, -1)] * 2
        sl_lo[axis] = slice(0, -1)
        sl_hi[axis] = slice(1, None)
        sl_lo, sl_hi = tuple(sl_lo), tuple(sl_hi)
        ubar = 0.5 * (w_p[(axis,) + sl_lo] + w_p[(axis,) + sl_hi])
        up = ubar > 0
        # wall faces carry no advective flux; see the slab step for why the
        # ghost mirror alone is not enough on staircase corners
        wall = ~(act_p[sl_lo] & act_p[sl_hi])
        f_mass = np.where(wall, 0.0, np.where(up, rho_p[sl_lo], rho_p[sl_hi])
                          * ubar)
        m_face = np.where(up[None], m_p[(slice(None),) + sl_lo],
                          m_p[(slice(None),) + sl_hi])
        f_mom = np.where(wall[None], 0.0, m_face * ubar[None])
        f_mom[axis] += 0.5 * (p_p[sl_lo] + p_p[sl_hi])

        gface = np.empty((2, 2) + ubar.shape)
        for c in range(2):
            gface[c, axis] = (w_p[(c,) + sl_hi] - w_p[(c,) + sl_lo]) / h
            t = 1 - axis
            gface[c, t] = _face_average(gcell[c, t], axis)
        sface = stress2_h(gface, params)
        f_mom -= sface[:, axis]

        dhi = [slice(None)] * 2
        dhi[axis] = slice(1, None)
        dlo = [slice(None)] * 2
        dlo[axis] = slice(0, -1)
        div_mass += (f_mass[tuple(dhi)] - f_mass[tuple(dlo)]) / h
        div_mom += (f_mom[(slice(None),) + tuple(dhi)] -
                    f_mom[(slice(None),) + tuple(dlo)]) / h

    r, w = state.r, state.w
    src = np.zeros((2, nx, ny))
    src[0] += r * params.chi * w[1]
    src[1] -= r * params.chi * w[0]
    xx, yy = np.meshgrid(grid.xc, grid.yc, indexing="ij")
    cent = centrifugal_2d(xx, yy, params)
    src += r[None] * cent
    work_cent = grid.integrate(r * (cent[0] * w[0] + cent[1] * w[1]))
    work_grav = 0.0
    if gravity is not None:
        src += r[None] * gravity
        work_grav = grid.integrate(r * (gravity[0] * w[0] + gravity[1] * w[1]))
    work_rad = 0.0
    if rad_force is not None:
        src += rad_force
        work_rad = grid.integrate(rad_force[0] * w[0] + rad_force[1] * w[1])

    r_new = r - dt * div_mass
    m_new = r[None] * w - dt * div_mom + dt * src
    if forcing is not None:
        r_new = r_new + dt * forcing[0]
        m_new = m_new + dt * forcing[1]

    if np.any(r_new[grid.mask] < 0):
        raise HydroStepError("negative density after step; reduce dt")
    clip = np.maximum(r_new, config.vacuum_floor)
    clip_mass = grid.integrate(np.where(grid.mask, clip - r_new, 0.0))
    r_new = clip
    w_new = m_new / r_new[None]

    r_new = np.where(grid.mask, r_new, r)
    w_new = np.where(grid.mask[None], w_new, w)

    diss = grid.integrate(stress2_contraction(gcell, params))
    diag = {"diss": diss, "work_grav": work_grav, "work_cent": work_cent,
            "work_rad": work_rad, "clip_mass": clip_mass,
            "max_speed": float(np.abs(w[:, grid.mask]).max())}
    return FluidState2(r_new, w_new), diag


# ---------------------------------------------------------------------------
# admissible dt


def max_dt_hydro3(state: FluidState3, grid: LayerGrid, params: ModelParams,
                  cfl: float = 0.4) -> float:
    rho = state.rho[grid.mask, :]
    u = state.u[:, grid.mask, :]
    c = np.sqrt(pressure_derivative(np.maximum(rho, 1e-12), params))
    adv = ((np.abs(u[0]) + c) / grid.hx + (np.abs(u[1]) + c) / grid.hy +
           (np.abs(u[2]) + c) / (grid.eps * grid.hz))
    nu = (2.0 * params.mu + params.xi) / np.maximum(rho, 1e-12)
    visc = 2.0 * nu * (1.0 / grid.hx**2 + 1.0 / grid.hy**2 +
                       1.0 / (grid.eps * grid.hz) ** 2)
    return cfl / float((adv + visc).max())


def max_dt_hydro2(state: FluidState2, grid: LayerGrid, params: ModelParams,
                  cfl: float = 0.4) -> float:
    r = state.r[grid.mask]
    w = state.w[:, grid.mask]
    c = np.sqrt(pressure_derivative(np.maximum(r, 1e-12), params))
    adv = (np.abs(w[0]) + c) / grid.hx + (np.abs(w[1]) + c) / grid.hy
    nu = (2.0 * params.mu + params.xi) / np.maximum(r, 1e-12)
    visc = 2.0 * nu * (1.0 / grid.hx**2 + 1.0 / grid.hy**2)
    return cfl / float((adv + visc).max())


# ---------------------------------------------------------------------------
# energy bookkeeping


def kinetic_energy_3d(state: FluidState3, grid: LayerGrid) -> float:
    return grid.integrate(0.5 * state.rho * np.einsum("cxyz,cxyz->xyz",
                                                      state.u, state.u))


def internal_energy_3d(state: FluidState3, grid: LayerGrid,
                       params: ModelParams) -> float:
    return grid.integrate(pressure_potential(state.rho, params))


def kinetic_energy_2d(state: FluidState2, grid: LayerGrid) -> float:
    return grid.integrate(0.5 * state.r * (state.w[0] ** 2 + state.w[1] ** 2))


def internal_energy_2d(state: FluidState2, grid: LayerGrid,
                       params: ModelParams) -> float:
    return grid.integrate(pressure_potential(state.r, params))


def total_mass(rho: np.ndarray, grid: LayerGrid) -> float:
    return grid.integrate(rho)


@dataclass
class EnergyLedger:
    """Per-step energy account of one solver run.

    Records totals and source/dissipation rates; `check` evaluates the
    energy-inequality monitor: at every step

        E_tot(t_n) + sum dt * dissipation
            <= E_tot(0) + sum dt * (gravity + centrifugal + radiative work
                                    + radiative source integral) + tol.

    Dissipation rates are nonnegative by the pointwise stress contraction.
    """

    t: list = field(default_factory=list)
    e_kin: list = field(default_factory=list)
    e_int: list = field(default_factory=list)
    e_rad: list = field(default_factory=list)
    diss_rate: list = field(default_factory=list)
    source_rate: list = field(default_factory=list)
    clip_mass: list = field(default_factory=list)
    mass: list = field(default_factory=list)

    def record(self, t, e_kin, e_int, e_rad, diss_rate, source_rate,
               clip_mass, mass):
        self.t.append(t)
        self.e_kin.append(e_kin)
        self.e_int.append(e_int)
        self.e_rad.append(e_rad)
        self.diss_rate.append(diss_rate)
        self.source_rate.append(source_rate)
        self.clip_mass.append(clip_mass)
        self.mass.append(mass)

    @property
    def e_total(self) -> np.ndarray:
        return (np.asarray(self.e_kin) + np.asarray(self.e_int) +
                np.asarray(self.e_rad))

    def violations(self, tol: float) -> np.ndarray:
        """Per-step slack of the inequality; negative entries violate it."""
        t = np.asarray(self.t)
        if len(t) < 2:
            return np.zeros(0)
        dt = np.diff(t)
        e = self.e_total
        diss = np.cumsum(np.asarray(self.diss_rate)[:-1] * dt)
        src = np.cumsum(np.asarray(self.source_rate)[:-1] * dt)
        return (e[0] + src + tol) - (e[1:] + diss)


def energy_monitor(ledger: EnergyLedger, dt: float, h: float):
    """Criterion-style report: tol = 10 (dt + h) E_tot(0)."""
    e0 = float(ledger.e_total[0])
    tol = 10.0 * (dt + h) * abs(e0)
    slack = ledger.violations(tol)
    ok = bool((slack >= 0).all()) if slack.size else True
    worst = float(slack.min()) if slack.size else 0.0
    first_bad = int(np.argmax(slack < 0)) if not ok else -1
    return {"ok": ok, "tol": tol, "worst_slack": worst,
            "first_violation": first_bad}
