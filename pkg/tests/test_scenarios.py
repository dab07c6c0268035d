"""Scenario configs, recipes, and well-prepared initial data."""

import numpy as np
import pytest

from thinlayer.angular import AngularQuadrature
from thinlayer.grid import LayerGrid
from thinlayer.model import Opacities
from thinlayer.scenarios import (RECIPES, ScenarioConfig, build_params,
                                 build_well_prepared, flat_initial_state,
                                 initial_data_size)
from thinlayer.states import column_average


def test_config_defaults_roundtrip():
    cfg = ScenarioConfig()
    assert cfg.eps_list == (0.4, 0.2, 0.1, 0.05)
    assert cfg.regime == "fr1"
    assert cfg.t_end == 0.5


@pytest.mark.parametrize("kwargs", [
    {"recipe": "square-wave"},
    {"t_end": 0.0},
    {"t_end": -1.0},
    {"eps_list": (0.1, 0.2)},
    {"eps_list": (0.2, 0.2)},
    {"eps_list": (0.2, -0.1)},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ScenarioConfig(**kwargs)


def test_build_params_regimes():
    p1 = build_params("fr1")
    pe = build_params("freps")
    assert p1.eta == 0.0 and pe.eta == 1.0
    assert pe.gamma >= 2.4          # shallow-scaling requirement
    assert build_params("fr1", mu=0.5).mu == 0.5


@pytest.mark.parametrize("recipe", RECIPES)
def test_flat_initial_states_valid(recipe, grid_small):
    s = flat_initial_state(recipe, grid_small)
    s.validate(grid_small)
    assert np.all(s.r[grid_small.mask] > 0)
    if recipe == "uniform":
        assert np.all(s.w == 0.0)
    else:
        assert np.abs(s.w).max() > 0


def test_flat_swirl_nearly_divergence_free(grid_small):
    g = grid_small
    s = flat_initial_state("gaussian-bump", g)
    div = (np.gradient(s.w[0], g.hx, axis=0)
           + np.gradient(s.w[1], g.hy, axis=1))
    # grad-perp construction: discrete divergence is O(h^2), not zero
    assert np.abs(div).max() < 0.5 * np.abs(s.w).max()


def test_well_prepared_column_average(grid_small, params_fr1, quad24):
    op = Opacities()
    gaps = {}
    for alpha in (0.1, 0.05):
        s3, rad3, s2, _ = build_well_prepared("gaussian-bump", grid_small,
                                              params_fr1, op, quad24,
                                              alpha=alpha)
        flat = column_average(s3)
        # the cosine profile has zero mean on the midpoint grid, so the
        # density column average recovers the flat field up to roundoff
        assert np.abs(flat.r - s2.r).max() < 1e-13
        assert rad3.I.shape[2:] == s3.rho.shape
        gaps[alpha] = np.abs(flat.w - s2.w).max()
    # the mass-weighted velocity average keeps only the quadratic cross
    # term of the perturbation, which scales exactly like alpha^2
    assert gaps[0.1] < (0.1 * grid_small.eps) ** 2
    assert gaps[0.1] == pytest.approx(4 * gaps[0.05], rel=1e-6)


def test_well_prepared_perturbation_scales(params_fr1, quad24):
    op = Opacities()
    sizes = {}
    for eps in (0.4, 0.2):
        g = LayerGrid(12, 12, 4, eps)
        for alpha in (0.1, 0.05):
            s3, _, s2, _ = build_well_prepared("gaussian-bump", g, params_fr1,
                                               op, quad24, alpha=alpha)
            base = s2.r[:, :, None] * np.ones(g.nz)
            sizes[(eps, alpha)] = np.abs(s3.rho - base).max()
    # amplitude is alpha * eps * max(bump): exactly linear in each factor
    assert sizes[(0.4, 0.1)] == pytest.approx(2 * sizes[(0.2, 0.1)], rel=1e-12)
    assert sizes[(0.4, 0.1)] == pytest.approx(2 * sizes[(0.4, 0.05)], rel=1e-12)


def test_initial_data_size_reports(grid_small, params_fr1, quad24):
    op = Opacities()
    s2 = flat_initial_state("gaussian-bump", grid_small)
    from thinlayer.radiation import equilibrium_field
    j2 = equilibrium_field(s2.r, quad24, op)
    sizes = initial_data_size(s2, j2, grid_small, params_fr1, op)
    assert set(sizes) == {"e0", "E0"}
    assert 0 < sizes["e0"] <= sizes["E0"]
    u2 = flat_initial_state("uniform", grid_small)
    ju = equilibrium_field(u2.r, quad24, op)
    uniform_sizes = initial_data_size(u2, ju, grid_small, params_fr1, op)
    assert uniform_sizes["e0"] < 1e-12
