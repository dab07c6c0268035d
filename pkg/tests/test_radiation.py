import numpy as np
import pytest

from thinlayer import (
    AngularQuadrature,
    LayerGrid,
    Opacities,
    RadField,
    equilibrium_field,
)
from thinlayer.angular import FOUR_PI
from thinlayer.radiation import (
    CFLError,
    RadiationL2Monitor,
    angular_band_integral,
    boundary_flux_check,
    isotropic_field,
    max_dt_transport,
    mean_intensity,
    radiative_momentum,
    radiative_source,
    transport_step_2d,
    transport_step_3d,
)


def _random_field(quad, shape, rng, floor=0.2):
    return RadField(floor + rng.random((1, quad.n_dir) + shape), quad)


def test_mean_intensity_of_isotropic(quad24, op_default):
    vals = np.full((1, 5, 5), 2.5)
    f = isotropic_field(vals, quad24, op_default)
    assert np.allclose(mean_intensity(f.I, quad24), 2.5, atol=1e-14)
    assert np.allclose(angular_band_integral(f.I, quad24, op_default),
                       2.5 * FOUR_PI)


def test_equilibrium_is_source_free(quad24, op_default, rng):
    rho = 0.5 + rng.random((6, 6, 3))
    f = equilibrium_field(rho, quad24, op_default)
    src = radiative_source(f.I, rho, op_default, quad24)
    assert np.max(np.abs(src)) < 1e-15


def test_isotropic_carries_no_momentum(quad24, op_default, rng):
    rho = 0.5 + rng.random((6, 6))
    f = isotropic_field(np.ones((1, 6, 6)), quad24, op_default)
    sf = radiative_momentum(f.I, rho, op_default, quad24)
    assert np.max(np.abs(sf)) < 1e-14


def test_beam_momentum_sign(quad24, op_default):
    # intensity concentrated in +x directions pushes in +x
    I = np.zeros((1, quad24.n_dir, 4, 4))
    I[:, quad24.xi[:, 0] > 0] = 1.0
    rho = np.ones((4, 4))
    sf = radiative_momentum(I, rho, op_default, quad24)
    assert np.all(sf[0] > 0)
    assert np.max(np.abs(sf[1])) < 1e-14


def test_transport_rejects_large_dt(grid_small, quad24, op_default):
    f = RadField(np.ones((1, quad24.n_dir, 12, 12, 4)), quad24)
    dt = 2.0 * max_dt_transport(grid_small, quad24, op_default)
    with pytest.raises(CFLError):
        transport_step_3d(f, np.ones((12, 12, 4)), grid_small, op_default, dt)


def test_specular_needs_rectangle(grid_disk, quad24, op_default):
    f = RadField(np.ones((1, quad24.n_dir, 15, 15, 4)), quad24)
    dt = 0.5 * max_dt_transport(grid_disk, quad24, op_default)
    with pytest.raises(NotImplementedError):
        transport_step_3d(f, np.ones((15, 15, 4)), grid_disk, op_default, dt,
                          lateral_bc="specular")


def test_transport_preserves_positivity(grid_small, quad24, op_default, rng):
    f = _random_field(quad24, (12, 12, 4), rng, floor=0.0)
    rho = 0.5 + rng.random((12, 12, 4))
    dt = 0.95 * max_dt_transport(grid_small, quad24, op_default)
    for _ in range(5):
        f = transport_step_3d(f, rho, grid_small, op_default, dt)
    assert np.min(f.I) >= 0.0


def test_transport_2d_positivity_and_decay(quad24, op_default, rng):
    # absorbing walls drain a scattering-free box
    g = LayerGrid(10, 10, 2, eps=0.5)
    op = Opacities(sigma_a0=0.0, sigma_s0=0.0)
    f = _random_field(quad24, (10, 10), rng)
    total0 = g.integrate(angular_band_integral(f.I, quad24, op))
    dt = 0.9 * max_dt_transport(g, quad24, op, flat=True)
    for _ in range(30):
        f = transport_step_2d(f, np.ones((10, 10)), g, op, dt)
    total = g.integrate(angular_band_integral(f.I, quad24, op))
    assert np.min(f.I) >= 0.0
    assert total < total0


def test_specular_walls_conserve_scattering_only(quad24, rng):
    g = LayerGrid(8, 8, 4, eps=0.4)
    op = Opacities(sigma_a0=0.0, sigma_s0=0.6)
    f = _random_field(quad24, (8, 8, 4), rng)
    rho = 0.5 + rng.random((8, 8, 4))
    total0 = g.integrate(angular_band_integral(f.I, quad24, op))
    dt = 0.9 * max_dt_transport(g, quad24, op)
    for _ in range(40):
        f = transport_step_3d(f, rho, g, op, dt, lateral_bc="specular")
    total = g.integrate(angular_band_integral(f.I, quad24, op))
    assert abs(total - total0) < 1e-12 * abs(total0)


def test_boundary_flux_nonnegative_absorbing(grid_small, quad24, op_default, rng):
    f = _random_field(quad24, (12, 12, 4), rng)
    rho = np.ones((12, 12, 4))
    dt = 0.9 * max_dt_transport(grid_small, quad24, op_default)
    for _ in range(5):
        f = transport_step_3d(f, rho, grid_small, op_default, dt)
        min_flux, _ = boundary_flux_check(f, grid_small, op_default)
        assert min_flux >= -1e-10


def test_boundary_flux_zero_specular(quad24, op_default, rng):
    # mirrored traces: incoming equals outgoing, net flux vanishes
    g = LayerGrid(8, 8, 4, eps=0.4)
    f = _random_field(quad24, (8, 8, 4), rng)
    min_flux, per_class = boundary_flux_check(f, g, op_default,
                                              lateral_bc="specular")
    assert np.max(np.abs(per_class["top"])) < 1e-12
    assert np.max(np.abs(per_class["lateral"])) < 1e-12
    assert min_flux >= -1e-12


def test_l2_monitor_bound_holds(grid_small, quad24, op_default, rng):
    f = _random_field(quad24, (12, 12, 4), rng)
    rho = 0.5 + rng.random((12, 12, 4))
    mon = RadiationL2Monitor(f, rho, grid_small, op_default)
    dt = 0.9 * max_dt_transport(grid_small, quad24, op_default)
    for _ in range(20):
        mon.pre_step(f, rho, dt)
        f = transport_step_3d(f, rho, grid_small, op_default, dt)
        assert mon.check(f) >= 0.0


def test_masked_cells_stay_zero(grid_disk, quad24, op_default, rng):
    I = rng.random((1, quad24.n_dir, 15, 15, 4))
    I *= grid_disk.mask[None, None, :, :, None]
    f = RadField(I, quad24)
    rho = np.ones((15, 15, 4)) * grid_disk.mask[:, :, None]
    dt = 0.9 * max_dt_transport(grid_disk, quad24, op_default)
    for _ in range(3):
        f = transport_step_3d(f, rho, grid_disk, op_default, dt)
    assert np.max(np.abs(f.I[:, :, ~grid_disk.mask])) == 0.0


def test_vertical_cfl_tightens_with_eps(quad24, op_default):
    thick = LayerGrid(8, 8, 4, eps=0.4)
    thin = LayerGrid(8, 8, 4, eps=0.05)
    assert max_dt_transport(thin, quad24, op_default) < \
        max_dt_transport(thick, quad24, op_default)
