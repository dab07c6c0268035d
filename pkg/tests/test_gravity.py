import numpy as np
import pytest
from scipy.integrate import quad

from thinlayer import LayerGrid, build_params
from thinlayer.gravity import (
    ExternalSource,
    dump_gravity_csv,
    external_potential_2d,
    g4_sample_points,
    grad_external_2d,
    grad_phi_external,
    grad_phi_selfgrav,
    grad_single_layer_2d,
    kernel_limit_g3,
    kernel_limit_g4,
)

PARAMS = build_params("freps")

# direct summation of the same compact bump on the 8x refined grid
# (see test_far_field_blob for the configuration)
BLOB_ORACLE_F1 = -0.0070764360827995322


def _blob(X, Y, radius=0.1):
    r2 = (X**2 + Y**2) / radius**2
    return np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** 3, 0.0)


# --- self-gravity ----------------------------------------------------------


def test_selfgrav_zero_density(grid_small):
    f = grad_phi_selfgrav(np.zeros((12, 12, 4)), grid_small, PARAMS)
    assert np.array_equal(f, np.zeros((3, 12, 12, 4)))


def test_selfgrav_vertical_antisymmetry(grid_small):
    # x3-uniform density: the vertical pull at height z cancels the pull at
    # 1 - z, so F3 is antisymmetric across the midplane (and sums to zero)
    rho = np.ones((12, 12, 4))
    rho[4:8, 4:8, :] = 2.0
    f = grad_phi_selfgrav(rho, grid_small, PARAMS)
    assert np.max(np.abs(f[2] + f[2][:, :, ::-1])) < 1e-10
    assert np.max(np.abs(f[2].sum(axis=2))) < 1e-10


def test_far_field_blob():
    # compact bump at the center, field sampled a third of a box away:
    # matches the point-mass law eps*M/d^2 and the refined-quadrature sum
    g = LayerGrid(21, 21, 6, eps=0.1)
    rho = np.broadcast_to(
        _blob(*np.meshgrid(g.xc, g.yc, indexing="ij"))[:, :, None],
        (21, 21, 6)).copy()
    f = grad_phi_selfgrav(rho, g, PARAMS)
    i, j, k = 17, 10, 3
    d = g.xc[i]
    assert abs(d - 1.0 / 3.0) < 1e-14
    f_h = float(np.hypot(f[0, i, j, k], f[1, i, j, k]))
    mass = g.integrate(rho)
    assert f_h == pytest.approx(g.eps * PARAMS.G * mass / d**2, rel=0.05)
    assert f[0, i, j, k] == pytest.approx(BLOB_ORACLE_F1, rel=0.025)


def test_selfgrav_quadrature_order(grid_small):
    # integrated field from a smooth density: refinement errors shrink at
    # first order or better
    def density(g):
        X, Y = np.meshgrid(g.xc, g.yc, indexing="ij")
        return np.broadcast_to(
            (1.0 + 0.5 * np.cos(2 * np.pi * X) * np.cos(2 * np.pi * Y))[..., None],
            (g.nx, g.ny, g.nz)).copy()

    vals = []
    for n in (8, 16, 32):
        g = LayerGrid(n, n, 4, eps=0.3)
        f = grad_phi_selfgrav(density(g), g, PARAMS)
        vals.append(g.integrate(np.abs(f[0])))
    assert abs(vals[1] - vals[2]) < 0.6 * abs(vals[0] - vals[1])


def test_selfgrav_l2_bound_uniform_in_eps(rng):
    # kernel map bounded on L2 with a constant independent of the aspect
    # ratio (checked on random smooth low-mode densities)
    n = 12
    worst = 0.0
    for seed in (0, 1):
        coeffs = np.random.default_rng(seed).standard_normal((3, 3))
        for eps in (0.4, 0.2, 0.1, 0.05):
            g = LayerGrid(n, n, 4, eps=eps)
            X, Y = np.meshgrid(g.xc, g.yc, indexing="ij")
            rho2 = np.ones((n, n))
            for p in range(3):
                for q in range(3):
                    rho2 += 0.1 * coeffs[p, q] * np.cos(2 * np.pi * (p * X + q * Y))
            rho = np.broadcast_to(rho2[..., None], (n, n, 4)).copy()
            f = grad_phi_selfgrav(rho, g, PARAMS)
            num = np.sqrt(g.integrate((f**2).sum(axis=0)))
            den = np.sqrt(g.integrate(rho**2))
            worst = max(worst, num / den)
    assert worst < 10.0


# --- external source -------------------------------------------------------


def test_external_zero_source(grid_small):
    src = ExternalSource(np.zeros((1, 3)), np.ones(1), np.zeros(1))
    f = grad_phi_external(grid_small, src, PARAMS)
    assert np.array_equal(f, np.zeros_like(f))


def test_external_point_mass_closed_form():
    # one quadrature node of mass m: the kernel is evaluated exactly, so the
    # field is Newtonian to rounding; eps=0 keeps evaluation in the plane
    g = LayerGrid(8, 8, 2, eps=1e-15)
    src = ExternalSource(np.array([[0.0, 0.0, 0.0]]), np.ones(1),
                         np.array([0.7]))
    f = grad_phi_external(g, src, PARAMS)
    X, Y, _ = g.cell_centers_3d()
    d3 = (X**2 + Y**2) ** 1.5
    assert np.allclose(f[0], -0.7 * X / d3, rtol=1e-10)
    assert np.allclose(f[1], -0.7 * Y / d3, rtol=1e-10)
    assert np.max(np.abs(f[2])) < 1e-12


def test_external_eps_continuity(grid_small):
    # the ball straddles the layer plane, so slab points inside its support
    # sit arbitrarily close to quadrature nodes; continuity in the layer
    # thickness is a statement about the smooth far field only
    src = ExternalSource.ball()
    X, Y, _ = grid_small.cell_centers_3d()
    far = (np.hypot(X, Y) > 0.38)[None]
    assert far.sum() >= 3 * 4 * grid_small.nz
    base = grad_phi_external(grid_small.with_eps(1e-15), src, PARAMS)
    gaps = []
    for eps in (0.4, 0.2, 0.1, 0.05):
        f = grad_phi_external(grid_small.with_eps(eps), src, PARAMS)
        gaps.append(np.max(np.abs(f - base)[:, far[0]]))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_external_source_moment_condition():
    # even-in-y3 profile: the odd vertical moment vanishes identically
    src = ExternalSource.ball(mass=0.3, radius=0.3, n=16)
    pts = np.array([[0.1, 0.2], [-0.3, 0.05], [0.0, 0.0]])
    assert src.vertical_moment(pts) < 1e-15
    assert src.mass == pytest.approx(0.3)


def test_external_potential_point_mass():
    g = LayerGrid(8, 8, 2, eps=0.3)
    src = ExternalSource(np.array([[0.0, 0.0, 0.0]]), np.ones(1),
                         np.array([1.0]))
    phi = external_potential_2d(g, src, PARAMS)
    X, Y = np.meshgrid(g.xc, g.yc, indexing="ij")
    assert np.allclose(phi, 1.0 / np.hypot(X, Y), rtol=1e-12)


def test_external_gradient_consistency():
    # central differences of the potential converge to the direct kernel
    # gradient at second order, away from the source support where the
    # point-cloud potential is smooth
    src = ExternalSource.ball(center_h=(0.05, 0.0))
    errs = []
    for n in (16, 32):
        g = LayerGrid(n, n, 2, eps=0.3)
        phi = external_potential_2d(g, src, PARAMS)
        f = grad_external_2d(g, src, PARAMS)
        fd = (phi[2:, :] - phi[:-2, :]) / (2 * g.hx)
        X, Y = np.meshgrid(g.xc[1:-1], g.yc, indexing="ij")
        far = np.hypot(X - 0.05, Y) > 0.42
        assert far.sum() >= 8
        errs.append(np.max(np.abs(fd - f[0, 1:-1, :])[far]))
    assert errs[1] < 0.35 * errs[0]


# --- flat self-gravity -----------------------------------------------------


def test_single_layer_zero(grid_small):
    f = grad_single_layer_2d(np.zeros((12, 12)), grid_small, PARAMS)
    assert np.array_equal(f, np.zeros((2, 12, 12)))


def test_single_layer_radial_center_zero():
    # radially symmetric density about a cell center: odd integrand cancels
    g = LayerGrid(15, 15, 2, eps=0.3, shape="disk")
    X, Y = np.meshgrid(g.xc, g.yc, indexing="ij")
    r = np.exp(-(X**2 + Y**2) / 0.05)
    f = grad_single_layer_2d(r, g, PARAMS)
    assert abs(f[0, 7, 7]) < 1e-10 and abs(f[1, 7, 7]) < 1e-10


def test_single_layer_constant_disk_oracle():
    # r = 1 on a disk of radius R, evaluated at (R/2, 0): polar reduction
    # of the principal value gives -(1/2) int cos(phi) log(L+/L-) dphi with
    # L+- the chords through the point; the value is scale-invariant
    x0 = 0.5

    def logratio(phi):
        c = x0 * np.cos(phi)
        s = np.sqrt(1.0 - x0**2 + c**2)
        return np.cos(phi) * np.log((s + c) / (s - c))

    exact = -0.5 * quad(logratio, 0.0, 2.0 * np.pi, limit=400)[0]
    vals = {}
    for n in (25, 75):
        g = LayerGrid(n, n, 2, eps=0.3, shape="disk")
        i = int(round(0.74 * n - 0.5))
        f = grad_single_layer_2d(g.mask.astype(float), g, PARAMS)
        vals[n] = float(f[0, i, n // 2])
        assert abs(f[1, i, n // 2]) < 1e-12
    assert vals[25] == pytest.approx(PARAMS.G * exact, rel=0.04)
    assert abs(vals[75] - PARAMS.G * exact) < abs(vals[25] - PARAMS.G * exact)


# --- kernel-limit reports --------------------------------------------------


def test_g3_zero_density():
    rows = kernel_limit_g3(lambda X, Y: np.zeros_like(X), (0.4, 0.2),
                           [(0.1, 0.1, 0.25)], n_h=8, nz=4, refine=3)
    assert all(gap == 0.0 for _, gap in rows)


def test_g3_midheight_antisymmetry():
    rows = kernel_limit_g3(lambda X, Y: np.ones_like(X), (0.4, 0.2),
                           [(0.13, -0.07, 0.5)], n_h=8, nz=4, refine=3)
    assert all(gap < 1e-10 for _, gap in rows)


def test_g3_decreasing():
    rows = kernel_limit_g3(lambda X, Y: np.ones_like(X), (0.4, 0.2, 0.1),
                           [(0.1037, 0.2113, 0.25)], n_h=8, nz=4, refine=3)
    gaps = [gap for _, gap in rows]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_g4_zero_density():
    pts = g4_sample_points(8)
    rows, self_gap = kernel_limit_g4(lambda X, Y: np.zeros_like(X),
                                     (0.4, 0.2), pts, n_h=8, nz=4, refine=3)
    assert self_gap == 0.0 and all(gap == 0.0 for _, gap in rows)


def test_g4_radial_center_zero():
    pts = [(0.0, 0.0, 0.37)]      # center cell of an odd grid
    rows, self_gap = kernel_limit_g4(
        lambda X, Y: np.exp(-(X**2 + Y**2) / 0.02), (0.4, 0.2), pts,
        n_h=15, nz=4, refine=3)
    assert self_gap < 1e-12 and all(gap < 1e-12 for _, gap in rows)


def test_g4_decreasing_and_matches_oracle():
    # a varying profile, so the resolution gap dominates the thin-layer
    # remainder at the smallest aspect ratio; a constant profile has a
    # geometric self gap small enough that the remainder would swamp it
    def profile(X, Y):
        return 1.0 + 0.25 * np.exp(-((X / 0.18) ** 2 + (Y / 0.18) ** 2))

    pts = g4_sample_points(8)
    rows, self_gap = kernel_limit_g4(profile, (0.4, 0.2, 0.1, 0.05), pts,
                                     n_h=8, nz=8, refine=9)
    gaps = [gap for _, gap in rows]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert abs(gaps[-1] - self_gap) <= 0.05 * self_gap


def test_g4_rejects_even_refinement():
    with pytest.raises(ValueError):
        kernel_limit_g4(lambda X, Y: np.ones_like(X), (0.4,),
                        g4_sample_points(8), n_h=8, nz=4, refine=4)


def test_dump_gravity_csv(tmp_path, grid_disk):
    field = np.zeros((3, 15, 15, 4))
    field[0] = 1.0 / 3.0
    path = tmp_path / "field.csv"
    dump_gravity_csv(field, grid_disk, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "x1,x2,x3,F1,F2,F3"
    assert len(lines) == 1 + grid_disk.mask.sum() * 4
    # 17 significant digits survive the round-trip
    assert float(lines[1].split(",")[3]) == 1.0 / 3.0
