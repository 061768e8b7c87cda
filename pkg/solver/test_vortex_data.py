"""Pruebas de fuentes, masa total y umbral de λ."""
import math

import numpy as np
import pytest

from solver.errors import VortexError
from solver.lattice import LatticeBox
from solver.vortex_data import (
    FOUR_PI,
    VortexConfig,
    lambda_threshold,
    source_g,
    source_h,
    total_mass_B,
)


def test_sources_and_mass():
    cfg = VortexConfig(2, u_vortices=(((0, 0), 2), ((1, 0), 1)), v_vortices=(((0, 1), 3),))
    assert source_g(cfg, (0, 0)) == pytest.approx(8 * math.pi)
    assert source_g(cfg, (0, 1)) == 0.0
    assert source_h(cfg, (0, 1)) == pytest.approx(12 * math.pi)
    assert total_mass_B(cfg) == pytest.approx(FOUR_PI * 6)


def test_repeated_points_merge():
    cfg = VortexConfig(2, u_vortices=(((0, 0), 1), ((0, 0), 2)))
    assert cfg.u_vortices == (((0, 0), 3),)


def test_zero_multiplicity_dropped():
    cfg = VortexConfig(2, u_vortices=(((0, 0), 0),))
    assert cfg.is_trivial_u
    assert total_mass_B(cfg) == 0.0


def test_invalid_multiplicities():
    with pytest.raises(VortexError):
        VortexConfig(2, u_vortices=(((0, 0), -1),))
    with pytest.raises(VortexError):
        VortexConfig(2, u_vortices=(((0, 0), 0.5),))
    with pytest.raises(VortexError):
        VortexConfig(2, u_vortices=(((0, 0, 0), 1),))


def test_fractional_hook():
    cfg = VortexConfig.fractional_mass(2, u_vortices=[((0, 0), 0.05 / FOUR_PI)])
    assert cfg.fractional
    assert total_mass_B(cfg) == pytest.approx(0.05)


def test_source_arrays_and_outside():
    cfg = VortexConfig(2, u_vortices=(((1, 1), 1),), v_vortices=(((-1, 0), 2),))
    box = LatticeBox.cube(2, 2)
    g, h = cfg.source_arrays(box)
    assert g.sum() == pytest.approx(FOUR_PI)
    assert h[box.padded_index((-1, 0))] == pytest.approx(2 * FOUR_PI)
    with pytest.raises(VortexError, match="source outside Ω"):
        cfg.source_arrays(LatticeBox.cube(2, 0))


def test_centroid_and_shift():
    cfg = VortexConfig(2, u_vortices=(((0, 0), 1),), v_vortices=(((4, 2), 1),))
    assert cfg.centroid() == (2, 1)
    moved = cfg.shifted((1, -1))
    assert moved.u_vortices == (((1, -1), 1),)
    assert VortexConfig(3).centroid() == (0, 0, 0)


def test_lambda_threshold():
    trivial = lambda_threshold(VortexConfig(2))
    assert trivial.vacuous
    assert not trivial.exceeded_by(1.0)

    cfg = VortexConfig.fractional_mass(2, u_vortices=[((0, 0), 0.05 / FOUR_PI)])
    t = lambda_threshold(cfg)
    expected = 2 * 0.05 * (4 + math.exp(0.2))
    assert t.representable
    assert t.linear_value == pytest.approx(expected)
    assert t.exceeded_by(10.0)

    # B grande: e^{4B} no cabe en un double pero el logaritmo sí
    big = VortexConfig(2, u_vortices=(((0, 0), 20),))
    tb = lambda_threshold(big)
    assert not tb.representable
    assert tb.linear_value is None
    assert np.isfinite(tb.log_value)


def test_centroid_commutes_with_shift():
    cfg = VortexConfig(2, u_vortices=(((0, 0), 1),), v_vortices=(((1, 3), 1),))
    for shift in [(7, -3), (-4, 2), (1, 1)]:
        moved = cfg.shifted(shift).centroid()
        assert moved == tuple(c + s for c, s in zip(cfg.centroid(), shift))
