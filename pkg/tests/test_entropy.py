import numpy as np
import pytest

from thinlayer import (
    AngularQuadrature,
    FluidState2,
    FluidState3,
    LayerGrid,
    Opacities,
    build_params,
    build_well_prepared,
    equilibrium_field,
    lower_bound_constant,
    relative_entropy,
)
from thinlayer.entropy import (
    EssentialResidualMask,
    entropy_lower_bound_check,
    excess_series,
    gronwall_envelope,
    lower_bound_margin_grid,
    relative_dissipation,
    velocity_gap_state,
    w12_gap,
)
from thinlayer.states import extrude_2d_to_3d

PARAMS = build_params("fr1")


def _pair(grid, quad, op, rng, perturb=0.0):
    r = 1.0 + 0.2 * rng.random((grid.nx, grid.ny))
    w = 0.1 * rng.standard_normal((2, grid.nx, grid.ny))
    s2 = FluidState2(r, w)
    j2 = equilibrium_field(r, quad, op)
    s3 = extrude_2d_to_3d(s2, grid)
    rad3 = RadFieldExtrude(j2, grid)
    if perturb:
        s3.rho = s3.rho * (1.0 + perturb * rng.random(s3.rho.shape))
        s3.u = s3.u + perturb * rng.standard_normal(s3.u.shape)
        rad3.I = rad3.I + perturb * rng.random(rad3.I.shape)
    return s3, rad3, s2, j2


def RadFieldExtrude(j2, grid):
    from thinlayer import RadField
    return RadField(np.repeat(j2.I[..., None], grid.nz, axis=-1), j2.quad)


def test_entropy_zero_on_matching_states(grid_small, quad24, op_default, rng):
    s3, rad3, s2, j2 = _pair(grid_small, quad24, op_default, rng)
    parts = relative_entropy(s3, rad3, s2, j2, grid_small, PARAMS, op_default)
    assert parts["total"] == pytest.approx(0.0, abs=1e-14)


def test_entropy_parts_nonnegative_and_sum(grid_small, quad24, op_default, rng):
    s3, rad3, s2, j2 = _pair(grid_small, quad24, op_default, rng, perturb=0.3)
    parts = relative_entropy(s3, rad3, s2, j2, grid_small, PARAMS, op_default)
    for key in ("kinetic", "pressure_gap", "radiative"):
        assert parts[key] >= 0.0
    total = parts["kinetic"] + parts["pressure_gap"] + parts["radiative"]
    assert parts["total"] == pytest.approx(total, rel=1e-12)


def test_entropy_rejects_nonpositive_target(grid_small, quad24, op_default, rng):
    s3, rad3, s2, j2 = _pair(grid_small, quad24, op_default, rng)
    s2.r[3, 3] = 0.0
    with pytest.raises(ValueError):
        relative_entropy(s3, rad3, s2, j2, grid_small, PARAMS, op_default)


def test_essential_residual_partition(rng):
    rho = rng.random((6, 6, 3)) * 4.0
    m = EssentialResidualMask.from_density(rho, 0.5, 1.5)
    assert np.array_equal(m.ess, ~m.res)
    f = rng.standard_normal(rho.shape)
    ess, res = m.split(f)
    assert np.array_equal(ess + res, f)
    assert np.all(ess[m.res] == 0.0) and np.all(res[m.ess] == 0.0)


def test_essential_band_edges():
    rho = np.array([[[0.24, 0.25, 3.0, 3.01]]])
    m = EssentialResidualMask.from_density(rho, 0.5, 1.5)
    assert list(m.ess[0, 0]) == [False, True, True, False]


def test_lower_bound_constant_properties():
    c = lower_bound_constant(0.8, 1.3, PARAMS)
    assert 0.0 < c <= 0.45
    # an independent sampling grid confirms the frozen constant
    assert lower_bound_margin_grid(c, 0.8, 1.3, PARAMS) >= 0.0
    # 1e4-point check at acceptance density
    assert lower_bound_margin_grid(c, 0.8, 1.3, PARAMS,
                                   n_rho=200, n_ref=50) >= 0.0


def test_lower_bound_check_on_states(grid_small, quad24, op_default, rng):
    s3, rad3, s2, j2 = _pair(grid_small, quad24, op_default, rng, perturb=0.2)
    r_lo = float(s2.r.min())
    r_hi = float(s2.r.max())
    c = lower_bound_constant(r_lo, r_hi, PARAMS)
    m = EssentialResidualMask.from_density(s3.rho, r_lo, r_hi)
    out = entropy_lower_bound_check(s3, rad3, s2, j2, m, c, grid_small,
                                    PARAMS, op_default)
    assert out["margin"] >= 0.0
    assert out["lhs"] >= out["rhs"]


def test_velocity_gap_state(grid_small, rng):
    s2 = FluidState2(np.ones((12, 12)), rng.standard_normal((2, 12, 12)))
    s3 = extrude_2d_to_3d(s2, grid_small)
    s3.u[2] += 0.3
    gap = velocity_gap_state(s3, s2)
    assert np.max(np.abs(gap.u[:2])) < 1e-15
    assert np.allclose(gap.u[2], 0.3)


def test_w12_gap_zero_iff_matching(grid_small, quad24, op_default, rng):
    s3, _, s2, _ = _pair(grid_small, quad24, op_default, rng)
    assert w12_gap(s3, s2, grid_small) == pytest.approx(0.0, abs=1e-14)
    s3.u[0] += 0.1
    assert w12_gap(s3, s2, grid_small) > 0.0


def test_relative_dissipation_nonnegative(grid_small, quad24, op_default, rng):
    s3, _, s2, _ = _pair(grid_small, quad24, op_default, rng, perturb=0.2)
    assert relative_dissipation(s3, s2, grid_small, PARAMS) >= 0.0


def test_initial_entropy_alpha_square(grid_small, quad24, op_default):
    # the well-prepared perturbation enters the functional quadratically
    vals = {}
    for alpha in (0.1, 0.05):
        s3, rad3, s2, j2 = build_well_prepared("gaussian-bump", grid_small,
                                               PARAMS, op_default, quad24,
                                               alpha=alpha)
        vals[alpha] = relative_entropy(s3, rad3, s2, j2, grid_small, PARAMS,
                                       op_default)["total"]
    assert vals[0.1] / vals[0.05] == pytest.approx(4.0, rel=0.1)


def test_excess_and_envelope_shapes():
    e = np.array([1.0, 0.9, 0.85, 0.9])
    d = np.full(4, 0.1)
    k = np.full(4, 0.2)
    h = excess_series(e, d, k, 0.1)
    assert h.shape == (4,)
    env, ok = gronwall_envelope(e, k, h, 0.1)
    assert env.shape == (4,)
    assert env[0] == e[0]
    assert isinstance(ok, bool)


def test_gronwall_envelope_dominates_calm_series():
    # flat entropy with no kernel: the forcing series already carries the
    # initial value, so the envelope reduces to it exactly
    e = np.full(5, 0.5)
    k = np.zeros(5)
    h = np.full(5, 0.5)
    env, ok = gronwall_envelope(e, k, h, 0.1)
    assert ok
    assert np.allclose(env, h)
    # an excursion above the envelope must flip the verdict
    bad = e.copy()
    bad[3] = 0.6
    _, ok_bad = gronwall_envelope(bad, k, h, 0.1)
    assert not ok_bad


def test_gronwall_envelope_rejects_negative_kernel():
    with pytest.raises(ValueError, match="nonnegative"):
        gronwall_envelope(np.ones(3), np.array([0.1, -0.2, 0.0]),
                          np.ones(3), 0.1)
