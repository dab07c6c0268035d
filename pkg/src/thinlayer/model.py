"""Constitutive laws and model parameters.

Pressure is the isentropic power law p = a*rho**gamma; its potential H
(the convex function whose Bregman distance drives the relative entropy) is
H = a*rho**gamma/(gamma-1).  Viscous stress is the standard compressible
Newtonian tensor in 3D and, for the flat limit system, the same tensor with
the bulk coefficient shifted to xi + mu/3 (the trace the vertical direction
leaves behind).

Opacities and the emission law are saturating in density,

    sigma(rho) = sigma0 * rho / (1 + rho),    B(nu, rho) = b0 * rho/(1+rho) * exp(-nu),

which keeps absorption, scattering, emission, and their rho-derivatives
bounded, and makes B * (1 + B) integrable in frequency against exp(-nu).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REGIMES = ("fr1", "freps")
CENTRIFUGAL_FORMS = ("gradient_of_square", "paper_a1")


@dataclass(frozen=True)
class ModelParams:
    """Physical and regime parameters shared by the 3D and 2D systems.

    regime "freps": shallow scaling Fr = sqrt(eps) with self-gravity
    (eta = 1), requires gamma >= 12/5.  regime "fr1": Fr = 1 with a fixed
    external gravitating source (eta = 0), requires gamma > 3/2.
    """

    gamma: float = 2.0
    a: float = 1.0
    mu: float = 0.02
    xi: float = 0.0
    chi: float = 0.5          # rotation rate, axis e3
    G: float = 1.0            # gravity prefactor (absorbed constants)
    regime: str = "fr1"
    centrifugal_form: str = "gradient_of_square"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        if self.centrifugal_form not in CENTRIFUGAL_FORMS:
            raise ValueError(f"centrifugal_form must be one of {CENTRIFUGAL_FORMS}")
        if self.mu <= 0 or self.xi < 0:
            raise ValueError("need mu > 0 and xi >= 0")
        if self.regime == "freps" and self.gamma < 12.0 / 5.0:
            raise ValueError("freps regime needs gamma >= 12/5")
        if self.gamma <= 1.5:
            raise ValueError("gamma must exceed 3/2")
        if self.a <= 0:
            raise ValueError("pressure coefficient a must be positive")

    @property
    def eta(self) -> int:
        return 1 if self.regime == "freps" else 0

    def froude_sq(self, eps: float) -> float:
        """Fr^2 for the given aspect ratio."""
        return eps if self.regime == "freps" else 1.0


@dataclass(frozen=True)
class Opacities:
    """Saturating opacity/emission laws plus the frequency quadrature.

    freq_nodes/freq_weights realize integrals over nu in (0, inf):
    int f(nu) dnu ~= sum_k w_k f(nu_k).  The default single band (node 0,
    weight 1 = int exp(-nu) dnu) integrates the emission profile exactly.
    """

    sigma_a0: float = 0.5
    sigma_s0: float = 0.5
    b0: float = 0.5
    freq_nodes: tuple = (0.0,)
    freq_weights: tuple = (1.0,)

    def __post_init__(self):
        if min(self.sigma_a0, self.sigma_s0, self.b0) < 0:
            raise ValueError("opacity coefficients must be nonnegative")
        if len(self.freq_nodes) != len(self.freq_weights):
            raise ValueError("frequency nodes and weights must pair up")
        if any(w <= 0 for w in self.freq_weights):
            raise ValueError("frequency weights must be positive")

    @property
    def n_bands(self) -> int:
        return len(self.freq_nodes)

    def bound_sigma(self) -> float:
        """c1 of the opacity bounds: 0 <= sigma_a, sigma_s <= c1."""
        return max(self.sigma_a0, self.sigma_s0)

    def bound_derivatives(self) -> float:
        """c2 bounding d_rho sigma_a, d_rho sigma_s, d_rho B and B."""
        return max(self.sigma_a0, self.sigma_s0, self.b0)

    def emission_envelope(self, nu) -> np.ndarray:
        """Integrable h(nu) with sigma_a * B * (1 + B) <= h pointwise."""
        nu = np.asarray(nu, dtype=float)
        return self.sigma_a0 * self.b0 * np.exp(-nu) * (1.0 + self.b0)


def gauss_laguerre_bands(n: int) -> tuple:
    """n-band frequency quadrature exact for exp(-nu) * polynomials.

    Returns (nodes, weights) for the plain-measure convention used by
    Opacities (weights already include the exp(+nu) factor).
    """
    x, w = np.polynomial.laguerre.laggauss(n)
    return tuple(x), tuple(w * np.exp(x))


# ---------------------------------------------------------------------------
# constitutive laws


def pressure(rho, params: ModelParams):
    """p(rho) = a rho^gamma; rejects negative density."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("pressure: negative density")
    return params.a * rho**params.gamma


def pressure_derivative(rho, params: ModelParams):
    rho = np.asarray(rho, dtype=float)
    return params.a * params.gamma * rho ** (params.gamma - 1.0)


def pressure_potential(rho, params: ModelParams):
    """H(rho) = rho * int_0^rho p(s)/s^2 ds = a rho^gamma / (gamma - 1)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("pressure_potential: negative density")
    return params.a * rho**params.gamma / (params.gamma - 1.0)


def relative_distance(rho, r, params: ModelParams):
    """Bregman distance E(rho, r) = H(rho) - H'(r)(rho - r) - H(r).

    Nonnegative, zero exactly on rho = r; for gamma = 2, a = 1 it is
    (rho - r)^2.  r must be strictly positive.
    """
    rho = np.asarray(rho, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("relative_distance: reference density must be positive")
    g, a = params.gamma, params.a
    h_prime_r = a * g / (g - 1.0) * r ** (g - 1.0)
    return (pressure_potential(rho, params) - h_prime_r * (rho - r)
            - pressure_potential(r, params))


# ---------------------------------------------------------------------------
# viscous stress


def stress3(grad_u: np.ndarray, params: ModelParams) -> np.ndarray:
    """3D Newtonian stress from a scaled gradient field.

    grad_u has shape (3, 3, ...) with grad_u[i, j] = (scaled) d_j u_i.
    S = mu (G + G^T - 2/3 tr(G) Id) + xi tr(G) Id, so trace(S) = 3 xi tr(G).
    """
    g = np.asarray(grad_u, dtype=float)
    div = g[0, 0] + g[1, 1] + g[2, 2]
    s = params.mu * (g + np.swapaxes(g, 0, 1))
    coef = (params.xi - 2.0 * params.mu / 3.0) * div
    for i in range(3):
        s[i, i] += coef
    return s


def stress2_h(grad_w: np.ndarray, params: ModelParams) -> np.ndarray:
    """Flat-system stress: mu(G + G^T - tr(G) Id) + (xi + mu/3) tr(G) Id.

    grad_w has shape (2, 2, ...).  The bulk shift mu/3 is what the vertical
    direction of the 3D tensor leaves in the horizontal block when the state
    has no vertical structure.
    """
    g = np.asarray(grad_w, dtype=float)
    div = g[0, 0] + g[1, 1]
    s = params.mu * (g + np.swapaxes(g, 0, 1))
    # written as xi - 2mu/3 so the floats match the 3D horizontal block
    # exactly on states with no vertical structure
    coef = (params.xi - 2.0 * params.mu / 3.0) * div
    for i in range(2):
        s[i, i] += coef
    return s


def stress_contraction(grad_u: np.ndarray, params: ModelParams) -> np.ndarray:
    """S(G):G = (xi - 2mu/3) tr(G)^2 + mu (|G|^2 + G:G^T), pointwise >= 0."""
    g = np.asarray(grad_u, dtype=float)
    div = g[0, 0] + g[1, 1] + g[2, 2]
    frob = np.einsum("ij...,ij...->...", g, g)
    cross = np.einsum("ij...,ji...->...", g, g)
    return (params.xi - 2.0 * params.mu / 3.0) * div**2 + params.mu * (frob + cross)


def stress2_contraction(grad_w: np.ndarray, params: ModelParams) -> np.ndarray:
    """2D analogue S_h(G):G with the shifted bulk coefficient."""
    g = np.asarray(grad_w, dtype=float)
    div = g[0, 0] + g[1, 1]
    frob = np.einsum("ij...,ij...->...", g, g)
    cross = np.einsum("ij...,ji...->...", g, g)
    return (params.xi - 2.0 * params.mu / 3.0) * div**2 + params.mu * (frob + cross)


# ---------------------------------------------------------------------------
# radiation material laws


def sigma_a(rho, op: Opacities):
    """Absorption opacity sigma_a(rho) = sigma_a0 * rho / (1 + rho)."""
    rho = np.asarray(rho, dtype=float)
    return op.sigma_a0 * rho / (1.0 + rho)


def sigma_s(rho, op: Opacities):
    """Scattering opacity, same saturating profile."""
    rho = np.asarray(rho, dtype=float)
    return op.sigma_s0 * rho / (1.0 + rho)


def planck_b(nu, rho, op: Opacities):
    """Emission law B(nu, rho) = b0 * rho/(1+rho) * exp(-nu)."""
    rho = np.asarray(rho, dtype=float)
    nu = np.asarray(nu, dtype=float)
    return op.b0 * rho / (1.0 + rho) * np.exp(-nu)


def planck_bands(rho, op: Opacities) -> np.ndarray:
    """B evaluated at every frequency node; shape (n_bands,) + rho.shape."""
    rho = np.asarray(rho, dtype=float)
    nodes = np.asarray(op.freq_nodes, dtype=float)
    return (op.b0 * rho / (1.0 + rho))[None, ...] * \
        np.exp(-nodes).reshape((-1,) + (1,) * rho.ndim)


def centrifugal_2d(xh1, xh2, params: ModelParams):
    """Horizontal centrifugal field at cell centers, shape (2,) + field.

    gradient_of_square: grad(chi^2 |x_h|^2) = 2 chi^2 (x1, x2).
    paper_a1: the literal printed form (x1, x2)/|x_h| (chi-independent).
    """
    x1 = np.asarray(xh1, dtype=float)
    x2 = np.asarray(xh2, dtype=float)
    if params.centrifugal_form == "gradient_of_square":
        c = 2.0 * params.chi**2
        return np.stack([c * x1, c * x2])
    rr = np.sqrt(x1**2 + x2**2)
    if np.any(rr == 0.0):
        raise ValueError("paper_a1 centrifugal form is singular at the axis")
    return np.stack([x1 / rr, x2 / rr])
