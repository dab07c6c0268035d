import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinlayer import LayerGrid
from thinlayer.grid import lateral_ghost_pairs, padded_mask


def test_vertical_spacing_is_reciprocal_count():
    for nz in (2, 5, 8):
        g = LayerGrid(4, 4, nz, eps=0.5)
        assert g.hz == 1.0 / nz


def test_rejects_bad_eps():
    with pytest.raises(ValueError):
        LayerGrid(4, 4, 4, eps=0.0)
    with pytest.raises(ValueError):
        LayerGrid(4, 4, 4, eps=-0.1)
    with pytest.raises(ValueError):
        LayerGrid(4, 4, 4, eps=1.5)


def test_rejects_tiny_axes():
    with pytest.raises(ValueError):
        LayerGrid(1, 4, 4, eps=0.5)
    with pytest.raises(ValueError):
        LayerGrid(4, 4, 1, eps=0.5)


def test_rejects_disconnected_mask():
    # inner radius beyond outer leaves nothing; a thin annulus on a coarse
    # grid falls apart into disconnected arcs
    with pytest.raises(ValueError):
        LayerGrid(6, 6, 2, eps=0.5, shape="annulus", r_inner=0.4, r_outer=0.45)


def test_cell_centers_inside_domain(grid_small):
    X, Y, Z = grid_small.cell_centers_3d()
    assert X.min() > -0.5 and X.max() < 0.5
    assert Z.min() > 0.0 and Z.max() < 1.0


def test_integrate_constant(grid_small, grid_disk):
    one3 = np.ones((12, 12, 4))
    assert grid_small.integrate(one3) == pytest.approx(1.0)
    active = grid_disk.mask.sum() * grid_disk.hx * grid_disk.hy
    assert grid_disk.integrate(np.ones((15, 15, 4))) == pytest.approx(active)


def test_integrate_ignores_masked_cells(grid_disk):
    f = np.ones((15, 15))
    f[~grid_disk.mask] = 1e9
    assert grid_disk.integrate(f) == pytest.approx(
        grid_disk.mask.sum() * grid_disk.hx * grid_disk.hy)


def test_sup_ignores_masked_cells(grid_disk):
    f = np.zeros((15, 15, 4))
    f[~grid_disk.mask] = 77.0
    f[7, 7, 1] = -3.0
    assert grid_disk.sup(f) == 3.0


def test_with_eps_preserves_shape(grid_disk):
    g2 = grid_disk.with_eps(0.1)
    assert g2.eps == 0.1
    assert np.array_equal(g2.mask, grid_disk.mask)


@settings(max_examples=25, deadline=None)
@given(nx=st.integers(3, 12), ny=st.integers(3, 12), nz=st.integers(2, 6),
       shape=st.sampled_from(["rect", "disk"]))
def test_face_partition(nx, ny, nz, shape):
    # every face of every active cell lands in exactly one class
    g = LayerGrid(nx, ny, nz, eps=0.4, shape=shape)
    counts = g.count_faces()
    n_col = int(g.mask.sum())
    total = counts["lateral"] + counts["top"] + counts["bottom"] \
        + counts["interior"]
    # 6 faces per cell, interior faces shared by two cells
    assert 2 * counts["interior"] + counts["lateral"] \
        + counts["top"] + counts["bottom"] == 6 * n_col * nz
    assert total <= 6 * n_col * nz


def test_face_classification_rect(grid_small):
    cls = grid_small.face_classification()
    lo_x, hi_x = cls["x"]
    assert lo_x.sum() == 12 and hi_x.sum() == 12
    assert lo_x[0].all() and not lo_x[1:].any()


def test_lateral_ghost_pairs_cover_ring(grid_disk):
    pairs = lateral_ghost_pairs(grid_disk)
    m = padded_mask(grid_disk)
    for (ghost, donor) in pairs.values():
        assert not m[ghost].any()      # ghosts sit outside the active set
        assert m[donor].all()          # donors inside
    n_lat = grid_disk.count_faces()["lateral"] // grid_disk.nz
    assert sum(len(g[0]) for g, _ in pairs.values()) == n_lat
