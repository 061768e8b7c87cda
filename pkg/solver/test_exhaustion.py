"""Pruebas del agotamiento por cajas y del ajuste de decaimiento."""
import math

import numpy as np
import pytest

from solver.errors import ConvergenceError, LatticeError, ParameterError
from solver.exhaustion import (
    DEFAULT_RADII,
    decay_floor,
    estimate_decay_constant,
    estimate_decay_rate,
    solve_maximal,
)
from solver.green_function import green_combination
from solver.lattice import LatticeBox
from solver.monotone_scheme import default_params
from solver.vortex_data import VortexConfig

QUICK_RADII = (3, 5, 8, 12)


def test_trivial_config_converges_immediately():
    sol = solve_maximal(VortexConfig(2), default_params(1.0), QUICK_RADII)
    assert sol.converged
    assert sol.box_radii == [3]
    assert np.all(sol.u_star.values == 0.0)


def test_domain_monotonicity_and_history(unit_vortex2):
    sol = solve_maximal(unit_vortex2, default_params(4.0), QUICK_RADII, ext_tol=1e-5)
    assert sol.converged
    assert sol.domain_monotone_ok
    u = sol.history["u"].values
    # Cajas mayores dan soluciones menores en la ventana
    assert np.all(np.diff(u, axis=0) <= sol.domain_slack)
    assert set(sol.history.coords) >= {"radius", "x1", "x2"}
    assert sol.history.sizes["vertex"] == int(sol.window.closure_mask.sum())
    assert sol.certificate()["valid"]
    assert len(sol.records()) == len(sol.box_radii)


def test_sup_differences_shrink(unit_vortex2):
    sol = solve_maximal(unit_vortex2, default_params(4.0), QUICK_RADII, ext_tol=1e-12, strict=False)
    diffs = sol.sup_differences
    assert all(b < a for a, b in zip(diffs, diffs[1:]))


def test_strict_exhaustion_raises(unit_vortex2):
    with pytest.raises(ConvergenceError):
        solve_maximal(unit_vortex2, default_params(0.5), (3, 4), ext_tol=1e-14)
    sol = solve_maximal(unit_vortex2, default_params(0.5), (3, 4), ext_tol=1e-14, strict=False)
    assert not sol.converged
    assert "exhaustion not converged" in sol.certificate()["warnings"][0]


def test_translation_invariance():
    cfg = VortexConfig(2, u_vortices=(((0, 0), 1),), v_vortices=(((2, 0), 1),))
    shift = (7, -3)
    params = default_params(2.0)
    a = solve_maximal(cfg, params, QUICK_RADII, ext_tol=1e-5)
    b = solve_maximal(cfg.shifted(shift), params, QUICK_RADII, ext_tol=1e-5)
    assert b.window == a.window.shifted(shift)
    assert np.allclose(a.u_star.values, b.u_star.values, atol=1e-12)
    assert np.allclose(a.v_star.values, b.v_star.values, atol=1e-12)


def test_window_must_fit(unit_vortex2):
    with pytest.raises(LatticeError):
        solve_maximal(unit_vortex2, default_params(1.0), QUICK_RADII, window=LatticeBox.cube(2, 4))


def test_default_window_capped_by_smallest_radius(unit_vortex2):
    sol = solve_maximal(unit_vortex2, default_params(4.0), QUICK_RADII, ext_tol=1e-5)
    assert sol.window == LatticeBox.cube(2, 3)


def test_decay_floor():
    assert decay_floor(1.0, 2) == pytest.approx(math.log(1.25))
    assert decay_floor(4.0, 2) == pytest.approx(math.log(2.0))


def test_decay_rejects_trivial_solution():
    sol = solve_maximal(VortexConfig(2), default_params(1.0), QUICK_RADII)
    with pytest.raises(ParameterError, match="window too small or solution trivial"):
        estimate_decay_rate(sol)


def test_decay_rejects_short_axis(unit_vortex2):
    sol = solve_maximal(unit_vortex2, default_params(1.0), (3,), strict=False)
    with pytest.raises(ParameterError, match="window too small or solution trivial"):
        estimate_decay_rate(sol)


def test_decay_on_quick_run(unit_vortex2):
    sol = solve_maximal(unit_vortex2, default_params(4.0), QUICK_RADII, ext_tol=1e-5)
    rate, r2 = estimate_decay_rate(sol, axis=1)
    assert rate >= 0.8 * decay_floor(4.0, 2)
    assert r2 >= 0.98
    assert sol.decay_fit.axis == 1
    assert estimate_decay_constant(sol, axis=1) > 0


@pytest.mark.slow
@pytest.mark.parametrize("dim,lam,radii", [
    (2, 1.0, DEFAULT_RADII),
    (2, 4.0, DEFAULT_RADII),
    (3, 1.0, (4, 6, 9, 13)),
])
def test_decay_rate_above_floor(dim, lam, radii):
    cfg = VortexConfig(dim, u_vortices=(((0,) * dim, 1),))
    sol = solve_maximal(cfg, default_params(lam), radii, strict=False)
    rate, r2 = estimate_decay_rate(sol)
    assert rate >= 0.8 * math.log1p(lam / (2 * dim))
    assert r2 >= 0.98
    assert sol.domain_monotone_ok


def test_decay_fit_floor_discards_small_values(unit_vortex2):
    sol = solve_maximal(unit_vortex2, default_params(4.0), QUICK_RADII, ext_tol=1e-5)
    estimate_decay_rate(sol, min_abs=0.0)
    loose = sol.decay_fit.n_points
    estimate_decay_rate(sol, min_abs=1e-5)
    strict = sol.decay_fit.n_points
    assert loose >= strict >= 5
    far = list(sol.final_box.domain.center)
    far[0] += sol.decay_fit.t_max
    assert abs(sol.final_box.u.at(far)) >= 1e-5


def test_green_subsolution_stays_below_maximal_solution():
    cfg = VortexConfig(3, u_vortices=(((0, 0, 0), 1),))
    sol = solve_maximal(cfg, default_params(1.0), (3, 4, 5), ext_tol=1e-4, strict=False)
    psi = green_combination(cfg, "u", sol.window)
    mask = sol.window.closure_mask
    assert np.all(psi.values[mask] <= sol.u_star.values[mask] + 1e-9)
    assert np.all(sol.v_star.values[mask] == 0.0)
