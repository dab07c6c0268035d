"""Invariant suites: exact fixed points and discrete conservation checks.

These are the cheap structural checks that do not need a full sweep: a
uniform equilibrium must be a fixed point of both solvers, and mirror-wall
transport without absorption must conserve the total intensity integral.
Each check returns a dict with an "ok" flag plus the measured numbers so
reports can show margins, not just verdicts.
"""

from __future__ import annotations

import numpy as np

from .angular import AngularQuadrature
from .grid import LayerGrid
from .hydro import max_dt_hydro2, max_dt_hydro3, step2d, step3d
from .model import Opacities
from .radiation import (RadField, angular_band_integral, equilibrium_field,
                        max_dt_transport, radiative_momentum,
                        transport_step_2d, transport_step_3d)
from .scenarios import build_params
from .states import FluidState2, FluidState3


def stationarity_check(n: int = 12, nz: int = 4, steps: int = 20,
                       eps: float = 0.3, tol: float = 1e-12) -> dict:
    """Uniform rest state with I = B(rho) must stay put, step after step.

    Rotation and gravity are switched off and the lateral transport wall is
    specular, so nothing in the discrete update can distinguish one cell
    from its neighbour.  Runs the slab and the flat solver side by side with
    the radiative force coupled in, and reports the largest per-step change
    over density, velocity, and intensity.
    """
    grid = LayerGrid(n, n, nz, eps=eps, shape="rect")
    params = build_params("fr1", chi=0.0, G=0.0)
    op = Opacities()
    quad = AngularQuadrature(2, 4)

    state3 = FluidState3(np.ones((n, n, nz)), np.zeros((3, n, n, nz)))
    rad3 = equilibrium_field(state3.rho, quad, op)
    state2 = FluidState2(np.ones((n, n)), np.zeros((2, n, n)))
    rad2 = equilibrium_field(state2.r, quad, op)

    dt = 0.5 * min(max_dt_hydro3(state3, grid, params),
                   max_dt_hydro2(state2, grid, params),
                   max_dt_transport(grid, quad, op, flat=False),
                   max_dt_transport(grid, quad, op, flat=True))

    worst = 0.0
    for _ in range(steps):
        sf3 = radiative_momentum(rad3.I, state3.rho, op, quad)
        new3, _ = step3d(state3, grid, params, dt, rad_force=sf3)
        nrad3 = transport_step_3d(rad3, state3.rho, grid, op, dt,
                                  lateral_bc="specular")
        sf2 = radiative_momentum(rad2.I, state2.r, op, quad)[:2]
        new2, _ = step2d(state2, grid, params, dt, rad_force=sf2)
        nrad2 = transport_step_2d(rad2, state2.r, grid, op, dt,
                                  lateral_bc="specular")
        worst = max(worst,
                    float(np.abs(new3.rho - state3.rho).max()),
                    float(np.abs(new3.u - state3.u).max()),
                    float(np.abs(nrad3.I - rad3.I).max()),
                    float(np.abs(new2.r - state2.r).max()),
                    float(np.abs(new2.w - state2.w).max()),
                    float(np.abs(nrad2.I - rad2.I).max()))
        state3, rad3 = new3, nrad3
        state2, rad2 = new2, nrad2

    return {"ok": bool(worst <= tol), "max_step_change": worst,
            "tol": tol, "steps": steps, "dt": float(dt)}


def specular_conservation_check(n: int = 16, nz: int = 4, steps: int = 100,
                                eps: float = 0.4, tol: float = 1e-10) -> dict:
    """Scattering-only transport in a mirror box conserves the intensity sum.

    With sigma_a = 0 the source only redistributes intensity across
    directions (zero angular mean), and every wall flux has a mirrored
    counterpart, so int I over angle, frequency, and space can drift only
    by roundoff.  The drift is measured relative to the initial integral
    after `steps` steps on a deliberately rough random field.
    """
    grid = LayerGrid(n, n, nz, eps=eps, shape="rect")
    op = Opacities(sigma_a0=0.0, sigma_s0=0.7)
    quad = AngularQuadrature(2, 4)
    rng = np.random.default_rng(7)
    I0 = 1.0 + 0.5 * rng.random((op.n_bands, quad.n_dir, n, n, nz))
    rad = RadField(I0, quad)
    rho = 1.0 + 0.25 * rng.random((n, n, nz))
    dt = max_dt_transport(grid, quad, op, flat=False)

    def total(field):
        return grid.integrate(angular_band_integral(field.I, quad, op))

    t0 = total(rad)
    for _ in range(steps):
        rad = transport_step_3d(rad, rho, grid, op, dt, lateral_bc="specular")
    drift = abs(total(rad) - t0) / abs(t0)
    return {"ok": bool(drift <= tol), "relative_drift": float(drift),
            "tol": tol, "steps": steps, "dt": float(dt)}
