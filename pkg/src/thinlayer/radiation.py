"""Grey discrete-ordinates transport on the slab and on the flat domain.

Intensity arrays are indexed (band, direction, x, y[, z]).  The transport
operator is donor-cell upwind in each coordinate; the vertical advection
speed is xi3/eps, which is what makes the 3D step stiff for thin layers and
is why the driver substeps radiation inside a hydro step.

Boundary conditions: zero inflow on the lateral boundary (the physical
choice; "specular" is available as a test configuration on rectangular
masks), specular reflection on top and bottom always.  Sources are
absorption/emission sigma_a (B - I) plus isotropizing scattering
sigma_s (Imean - I), both explicit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angular import FOUR_PI, AngularQuadrature
from .grid import LayerGrid
from .model import Opacities, planck_bands, sigma_a, sigma_s


class CFLError(RuntimeError):
    """Raised when a requested transport step exceeds the admissible dt."""


@dataclass
class RadField:
    """Band/direction intensity bundle tied to its angular quadrature."""

    I: np.ndarray
    quad: AngularQuadrature

    def copy(self) -> "RadField":
        return RadField(self.I.copy(), self.quad)

    @property
    def is_flat(self) -> bool:
        return self.I.ndim == 4


def isotropic_field(values: np.ndarray, quad: AngularQuadrature,
                    op: Opacities) -> RadField:
    """Intensity equal to `values` (per band) in every direction.

    values: (n_bands,) + spatial shape.
    """
    I = np.repeat(values[:, None, ...], quad.n_dir, axis=1)
    return RadField(np.ascontiguousarray(I), quad)


def equilibrium_field(rho: np.ndarray, quad: AngularQuadrature,
                      op: Opacities) -> RadField:
    """I = B(rho) isotropic, the absorption-emission fixed point."""
    return isotropic_field(planck_bands(rho, op), quad, op)


def mean_intensity(I: np.ndarray, quad: AngularQuadrature) -> np.ndarray:
    """(1/4pi) int I dsigma per band; shape (nb,) + spatial."""
    return np.tensordot(quad.w, I, axes=(0, 1)) / FOUR_PI


def angular_band_integral(I: np.ndarray, quad: AngularQuadrature,
                          op: Opacities) -> np.ndarray:
    """int dnu int dsigma I: full angle+frequency integral, spatial shape."""
    per_band = np.tensordot(quad.w, I, axes=(0, 1))
    return np.tensordot(np.asarray(op.freq_weights), per_band, axes=(0, 0))


def radiative_source(I: np.ndarray, rho: np.ndarray, op: Opacities,
                     quad: AngularQuadrature) -> np.ndarray:
    """sigma_a (B - I) + sigma_s (Imean - I), shape of I."""
    sa = sigma_a(rho, op)
    ss = sigma_s(rho, op)
    B = planck_bands(rho, op)
    Im = mean_intensity(I, quad)
    return sa * (B[:, None] - I) + ss * (Im[:, None] - I)


def radiative_momentum(I: np.ndarray, rho: np.ndarray, op: Opacities,
                       quad: AngularQuadrature) -> np.ndarray:
    """Radiative force density S_F = (sigma_a+sigma_s) int int xi I.

    Returns all three components, shape (3,) + spatial; flat solvers use the
    horizontal pair (the vertical moment vanishes for mirror-symmetric
    intensities).
    """
    wxi = quad.w[:, None] * quad.xi          # (nd, 3)
    flux = np.tensordot(wxi, I, axes=(0, 1))  # (3, nb) + spatial
    flux = np.tensordot(np.asarray(op.freq_weights), np.moveaxis(flux, 0, 1),
                        axes=(0, 0))
    return (sigma_a(rho, op) + sigma_s(rho, op))[None] * flux


# ---------------------------------------------------------------------------
# admissible step sizes


def max_dt_transport(grid: LayerGrid, quad: AngularQuadrature, op: Opacities,
                     flat: bool = False, cfl: float = 0.9) -> float:
    """Largest dt keeping the donor-cell update positivity-preserving.

    Uses the summed condition dt*(|xi1|/hx + |xi2|/hy + |xi3|/(eps hz)
    + sigma_a0 + sigma_s0) <= cfl <= 1, which implies the per-axis bound.
    """
    speed = np.abs(quad.xi[:, 0]) / grid.hx + np.abs(quad.xi[:, 1]) / grid.hy
    if not flat:
        speed = speed + np.abs(quad.xi[:, 2]) / (grid.eps * grid.hz)
    rate = float(speed.max()) + op.sigma_a0 + op.sigma_s0
    return cfl / rate


def _check_dt(dt: float, grid: LayerGrid, quad: AngularQuadrature,
              op: Opacities, flat: bool):
    limit = max_dt_transport(grid, quad, op, flat=flat, cfl=1.0)
    if dt > limit * (1.0 + 1e-12):
        raise CFLError(f"transport dt {dt:.3e} exceeds admissible {limit:.3e}")


# ---------------------------------------------------------------------------
# transport steps


def _require_rect(grid: LayerGrid, lateral_bc: str):
    if lateral_bc == "specular" and grid.shape != "rect":
        raise NotImplementedError("specular lateral walls need a rectangular mask")


def transport_step_3d(rad: RadField, rho: np.ndarray, grid: LayerGrid,
                      op: Opacities, dt: float,
                      lateral_bc: str = "absorbing",
                      forcing: np.ndarray | None = None) -> RadField:
    """One explicit upwind step of the slab transport equation.

    Top and bottom are always specular; lateral inflow is zero unless the
    rectangular test configuration lateral_bc="specular" is selected.
    Raises CFLError for inadmissible dt.  Cells outside the mask stay zero.
    """
    _check_dt(dt, grid, rad.quad, op, flat=False)
    _require_rect(grid, lateral_bc)
    quad = rad.quad
    I = rad.I
    nb, nd = I.shape[:2]
    xi = quad.xi

    Ip = np.zeros((nb, nd, grid.nx + 2, grid.ny + 2, grid.nz + 2))
    Ip[:, :, 1:-1, 1:-1, 1:-1] = I
    # vertical specular ghosts: mirrored-direction donor value at the wall cell
    mz = quad.mirror_z
    Ip[:, :, 1:-1, 1:-1, 0] = I[..., 0][:, mz]
    Ip[:, :, 1:-1, 1:-1, -1] = I[..., -1][:, mz]
    if lateral_bc == "specular":
        mx, my = quad.mirror_x, quad.mirror_y
        Ip[:, :, 0, 1:-1, 1:-1] = I[:, :, 0][:, mx]
        Ip[:, :, -1, 1:-1, 1:-1] = I[:, :, -1][:, mx]
        Ip[:, :, 1:-1, 0, 1:-1] = I[:, :, :, 0][:, my]
        Ip[:, :, 1:-1, -1, 1:-1] = I[:, :, :, -1][:, my]
    # absorbing lateral: ghosts stay zero (and masked-out cells hold zero)

    C = Ip[:, :, 1:-1, 1:-1, 1:-1]
    s1 = xi[:, 0].reshape(1, nd, 1, 1, 1)
    s2 = xi[:, 1].reshape(1, nd, 1, 1, 1)
    s3 = xi[:, 2].reshape(1, nd, 1, 1, 1)
    d1 = np.where(s1 > 0, C - Ip[:, :, :-2, 1:-1, 1:-1],
                  Ip[:, :, 2:, 1:-1, 1:-1] - C) / grid.hx
    d2 = np.where(s2 > 0, C - Ip[:, :, 1:-1, :-2, 1:-1],
                  Ip[:, :, 1:-1, 2:, 1:-1] - C) / grid.hy
    d3 = np.where(s3 > 0, C - Ip[:, :, 1:-1, 1:-1, :-2],
                  Ip[:, :, 1:-1, 1:-1, 2:] - C) / grid.hz

    adv = s1 * d1 + s2 * d2 + (s3 / grid.eps) * d3
    rhs = radiative_source(I, rho, op, quad) - adv
    if forcing is not None:
        rhs = rhs + forcing
    I_new = I + dt * rhs
    if not grid.mask.all():
        I_new *= grid.mask[None, None, :, :, None]
    return RadField(I_new, quad)


def transport_step_2d(rad: RadField, r: np.ndarray, grid: LayerGrid,
                      op: Opacities, dt: float,
                      lateral_bc: str = "absorbing",
                      forcing: np.ndarray | None = None) -> RadField:
    """Flat-system transport step: horizontal advection, full-sphere directions."""
    _check_dt(dt, grid, rad.quad, op, flat=True)
    _require_rect(grid, lateral_bc)
    quad = rad.quad
    I = rad.I
    nb, nd = I.shape[:2]
    xi = quad.xi

    Ip = np.zeros((nb, nd, grid.nx + 2, grid.ny + 2))
    Ip[:, :, 1:-1, 1:-1] = I
    if lateral_bc == "specular":
        mx, my = quad.mirror_x, quad.mirror_y
        Ip[:, :, 0, 1:-1] = I[:, :, 0][:, mx]
        Ip[:, :, -1, 1:-1] = I[:, :, -1][:, mx]
        Ip[:, :, 1:-1, 0] = I[:, :, :, 0][:, my]
        Ip[:, :, 1:-1, -1] = I[:, :, :, -1][:, my]

    C = Ip[:, :, 1:-1, 1:-1]
    s1 = xi[:, 0].reshape(1, nd, 1, 1)
    s2 = xi[:, 1].reshape(1, nd, 1, 1)
    d1 = np.where(s1 > 0, C - Ip[:, :, :-2, 1:-1], Ip[:, :, 2:, 1:-1] - C) / grid.hx
    d2 = np.where(s2 > 0, C - Ip[:, :, 1:-1, :-2], Ip[:, :, 1:-1, 2:] - C) / grid.hy

    rhs = radiative_source(I, r, op, quad) - (s1 * d1 + s2 * d2)
    if forcing is not None:
        rhs = rhs + forcing
    I_new = I + dt * rhs
    if not grid.mask.all():
        I_new *= grid.mask[None, None, :, :]
    return RadField(I_new, quad)


# ---------------------------------------------------------------------------
# boundary flux (Darrozes-Guiraud sign) check


def boundary_flux_check(rad: RadField, grid: LayerGrid, op: Opacities,
                        lateral_bc: str = "absorbing"):
    """Net outward radiative energy flux at every boundary face.

    Traces are the same donor values the upwind step uses: outgoing
    directions take the wall cell, incoming take the ghost (zero or the
    mirrored direction).  Vertical fluxes carry the 1/eps of the rescaled
    operator; only the sign matters for the check.  Returns
    (min_flux, {class: flux array}).
    """
    quad = rad.quad
    I = rad.I
    wf = np.asarray(op.freq_weights)
    out = {}

    def _net(trace_out, trace_in, speed_out, speed_in):
        # trace_*: (nb, nd_sub, faces...), speed_*: (nd_sub,)
        fo = np.tensordot(speed_out, np.tensordot(wf, trace_out, axes=(0, 0)),
                          axes=(0, 0))
        fi = np.tensordot(speed_in, np.tensordot(wf, trace_in, axes=(0, 0)),
                          axes=(0, 0))
        return fo - fi

    if not rad.is_flat:
        s3 = quad.xi[:, 2] / grid.eps
        up = s3 > 0
        dn = ~up
        mz = quad.mirror_z
        # top wall: outgoing up-directions, incoming down-directions (specular)
        top = I[..., -1]
        out["top"] = _net(top[:, up], top[:, mz[dn]], quad.w[up] * s3[up],
                          quad.w[dn] * (-s3[dn]))
        bottom = I[..., 0]
        out["bottom"] = _net(bottom[:, dn], bottom[:, mz[up]],
                             quad.w[dn] * (-s3[dn]), quad.w[up] * s3[up])

    lat = []
    cls = grid.face_classification()
    for axis, comp in (("x", 0), ("y", 1)):
        lo, hi = cls[axis]
        s = quad.xi[:, comp]
        for side, sel in (("lo", lo), ("hi", hi)):
            sign = -1.0 if side == "lo" else 1.0
            going_out = sign * s > 0
            going_in = ~going_out
            if rad.is_flat:
                cells = I[:, :, sel]
            else:
                cells = I[:, :, sel, :]
            trace_out = cells[:, going_out]
            if lateral_bc == "specular":
                mirror = quad.mirror_x if axis == "x" else quad.mirror_y
                trace_in = cells[:, mirror[going_in]]
            else:
                trace_in = np.zeros_like(cells[:, going_in])
            lat.append(_net(trace_out, trace_in,
                            quad.w[going_out] * np.abs(s[going_out]),
                            quad.w[going_in] * np.abs(s[going_in])))
    out["lateral"] = np.concatenate([f.ravel() for f in lat]) if lat else np.zeros(0)

    min_flux = min(float(v.min()) for v in out.values() if v.size)
    return min_flux, out


# ---------------------------------------------------------------------------
# L2 energy monitor


class RadiationL2Monitor:
    """Tracks the squared-intensity balance

        1/2 ||I(t)||^2 + sum dt (absorption + scattering dissipation)
            <= 1/2 ||I(0)||^2 + sum dt * 4pi int sigma_a sum_bands B^2.

    Dissipation and source rates are evaluated on the pre-step state, the
    same explicit quadrature the stepper uses.
    """

    def __init__(self, rad: RadField, rho: np.ndarray, grid: LayerGrid,
                 op: Opacities):
        self.grid = grid
        self.op = op
        self.lhs0 = self._half_norm_sq(rad)
        self.diss = 0.0
        self.src = 0.0
        self.history = []

    def _half_norm_sq(self, rad: RadField) -> float:
        quad = rad.quad
        s = np.tensordot(quad.w, rad.I**2, axes=(0, 1))
        s = np.tensordot(np.asarray(self.op.freq_weights), s, axes=(0, 0))
        return 0.5 * self.grid.integrate(s)

    def pre_step(self, rad: RadField, rho: np.ndarray, dt: float):
        """Accumulate dissipation/source rates of the state a step starts from."""
        quad = rad.quad
        wf = np.asarray(self.op.freq_weights)
        sa = sigma_a(rho, self.op)
        ss = sigma_s(rho, self.op)
        B = planck_bands(rho, self.op)
        Im = mean_intensity(rad.I, quad)
        dev_a = np.tensordot(quad.w, (B[:, None] - rad.I) ** 2, axes=(0, 1))
        dev_s = np.tensordot(quad.w, (rad.I - Im[:, None]) ** 2, axes=(0, 1))
        d_abs = self.grid.integrate(sa * np.tensordot(wf, dev_a, axes=(0, 0)))
        d_sct = self.grid.integrate(ss * np.tensordot(wf, dev_s, axes=(0, 0)))
        src = FOUR_PI * self.grid.integrate(sa * np.tensordot(wf, B**2, axes=(0, 0)))
        self.diss += dt * (d_abs + d_sct)
        self.src += dt * src

    def check(self, rad: RadField) -> float:
        """Slack of the inequality for the current state; >= 0 when it holds."""
        lhs = self._half_norm_sq(rad) + self.diss
        rhs = self.lhs0 + self.src
        slack = rhs - lhs
        self.history.append(slack)
        return slack
