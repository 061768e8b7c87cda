"""Fixtures compartidas de las pruebas."""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from solver.lattice import LatticeBox  # noqa: E402
from solver.vortex_data import VortexConfig  # noqa: E402


@pytest.fixture
def rng():
    """Generador con semilla fija: las configuraciones aleatorias son reproducibles."""
    return np.random.default_rng(20240917)


@pytest.fixture
def box2():
    return LatticeBox.cube(2, 4)


@pytest.fixture
def box3():
    return LatticeBox.cube(3, 2)


@pytest.fixture
def unit_vortex2():
    return VortexConfig(2, u_vortices=(((0, 0), 1),))


def _random_config(rng, dim: int, radius: int, max_vortices: int = 3) -> VortexConfig:
    """Hasta max_vortices vórtices en el interior de la caja {|x_i| ≤ radius − 1}."""
    def draw():
        count = int(rng.integers(0, max_vortices + 1))
        return tuple(
            (tuple(int(c) for c in rng.integers(-(radius - 1), radius, size=dim)), int(rng.integers(1, 3)))
            for _ in range(count)
        )
    return VortexConfig(dim, draw(), draw())


@pytest.fixture
def random_config(rng):
    """Fábrica: random_config(dim, radius) con el rng de la prueba."""
    return lambda dim, radius, max_vortices=3: _random_config(rng, dim, radius, max_vortices)
