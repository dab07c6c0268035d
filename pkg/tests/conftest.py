import numpy as np
import pytest

from thinlayer import (
    AngularQuadrature,
    LayerGrid,
    Opacities,
    build_params,
)


@pytest.fixture
def grid_small():
    return LayerGrid(12, 12, 4, eps=0.3)


@pytest.fixture
def grid_disk():
    return LayerGrid(15, 15, 4, eps=0.3, shape="disk")


@pytest.fixture
def params_fr1():
    return build_params("fr1")


@pytest.fixture
def params_freps():
    return build_params("freps")


@pytest.fixture
def quad24():
    return AngularQuadrature(2, 4)


@pytest.fixture
def op_default():
    return Opacities()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
