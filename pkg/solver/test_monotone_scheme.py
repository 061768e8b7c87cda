"""Pruebas del esquema monótono en cajas finitas y del oráculo de Newton."""
import numpy as np
import pytest

from solver.errors import CertificateError, ParameterError, VortexError
from solver.green_function import green_combination
from solver.lattice import LatticeBox
from solver.linear_solver import SolverParams, solve_poisson_dirichlet
from solver.monotone_scheme import (
    SchemeParams,
    check_subsupersolution,
    default_params,
    flux_defects,
    iterate_once,
    mass_balance,
    nonlinear_residual,
    solve_on_box,
)
from solver.newton import DENSE_LIMIT, dirichlet_laplacian, newton_solve
from solver.operators import FieldPair, LatticeFunction
from solver.vortex_data import VortexConfig, total_mass_B


def _poisson_pair(box: LatticeBox, cfg: VortexConfig) -> FieldPair:
    """(W, V) con ΔW = g, ΔV = h y frontera nula: una subsolución."""
    g, h = cfg.source_arrays(box)
    sl = box.interior_slices
    params = SolverParams(tol=1e-13)
    return FieldPair(
        solve_poisson_dirichlet(box, g[sl], params=params),
        solve_poisson_dirichlet(box, h[sl], params=params),
    )


def test_trivial_sources_give_zero(box2):
    pair, report = solve_on_box(box2, VortexConfig(2), default_params(1.0))
    assert np.all(pair.u.values == 0.0)
    assert np.all(pair.v.values == 0.0)
    assert report.outer_iters == 1
    assert report.certificate()["valid"]


def test_shift_too_small():
    with pytest.raises(ParameterError, match="shift too small"):
        SchemeParams(lam=1.0, L=2.0)
    with pytest.raises(ParameterError):
        SchemeParams(lam=1.0, shift_ratio=1.5)
    with pytest.raises(ParameterError):
        SchemeParams(lam=0.0)


def test_source_outside_domain():
    cfg = VortexConfig(2, u_vortices=(((5, 0), 1),))
    with pytest.raises(VortexError, match="source outside Ω"):
        solve_on_box(LatticeBox.cube(2, 3), cfg, default_params(1.0))


def test_iterates_are_nonincreasing(unit_vortex2):
    box = LatticeBox.cube(2, 5)
    params = default_params(1.0)
    state = FieldPair.zeros(box)
    for _ in range(30):
        nxt = iterate_once(state, unit_vortex2, params, box)
        assert np.all(nxt.u.values <= state.u.values + 1e-12)
        assert np.all(nxt.v.values <= state.v.values + 1e-12)
        assert np.all(nxt.u.boundary_vector() == 0.0)
        state = nxt


def test_iterate_rejects_positive_state(box2, unit_vortex2):
    state = FieldPair(LatticeFunction.from_interior(box2, np.full(box2.shape, 0.5)), LatticeFunction.zeros(box2))
    with pytest.raises(ParameterError):
        iterate_once(state, unit_vortex2, default_params(1.0), box2)


def test_single_vortex_certificates(unit_vortex2):
    box = LatticeBox.cube(2, 6)
    pair, report = solve_on_box(box, unit_vortex2, default_params(2.0))
    assert report.flux_ok
    assert report.residual_ok
    assert report.collar_bound_ok
    assert report.mass_balance_ok
    assert report.certificate()["valid"]
    # Solo u tiene fuente: v ≡ 0 y u < 0 en todo Ω
    assert np.all(pair.v.values == 0.0)
    assert pair.u.interior_values.max() < 0.0
    du, dv = flux_defects(pair, unit_vortex2, 2.0)
    assert abs(du) <= 1e-8 * (2.0 * box.size + total_mass_B(unit_vortex2))
    assert mass_balance(pair) <= total_mass_B(unit_vortex2) / 2.0 + 1e-8


def test_parallel_step_matches_serial(unit_vortex2):
    box = LatticeBox.cube(2, 4)
    serial, _ = solve_on_box(box, unit_vortex2, default_params(1.0))
    parallel, _ = solve_on_box(box, unit_vortex2, default_params(1.0, parallel=True))
    assert np.array_equal(serial.u.values, parallel.u.values)
    assert np.array_equal(serial.v.values, parallel.v.values)


@pytest.mark.slow
def test_random_configs_converge_monotonically(rng, random_config):
    for _ in range(50):
        dim = int(rng.choice([2, 3]))
        radius = int(rng.integers(2, 9 if dim == 2 else 5))
        lam = float(rng.uniform(0.25, 4.0))
        cfg = random_config(dim, radius)
        box = LatticeBox.cube(dim, radius)
        pair, report = solve_on_box(box, cfg, default_params(lam))
        assert report.certificate()["valid"], report.certificate()["errors"]
        ru, rv = nonlinear_residual(pair, cfg, lam)
        assert max(np.abs(ru).max(), np.abs(rv).max()) <= 1e-8


@pytest.mark.slow
def test_newton_oracle_agrees(rng, random_config):
    """Newton denso desde cero, sin información del esquema monótono."""
    for _ in range(20):
        dim = int(rng.choice([2, 3]))
        radius = int(rng.integers(2, 9 if dim == 2 else 3))
        box = LatticeBox.cube(dim, radius)
        assert box.size <= DENSE_LIMIT
        lam = float(rng.uniform(0.25, 4.0))
        cfg = random_config(dim, radius)
        pair, _ = solve_on_box(box, cfg, default_params(lam, stop_tol=1e-12))
        oracle = newton_solve(box, cfg, lam)
        assert oracle.converged, oracle.message
        assert np.abs(oracle.pair.u.values - pair.u.values).max() <= 1e-8
        assert np.abs(oracle.pair.v.values - pair.v.values).max() <= 1e-8


def test_poisson_subsolution_is_below(rng):
    cfg = VortexConfig(2, u_vortices=(((0, 0), 1), ((1, 1), 2)), v_vortices=(((-1, 0), 1),))
    box = LatticeBox.cube(2, 4)
    params = default_params(1.5, stop_tol=1e-12)
    pair, _ = solve_on_box(box, cfg, params)
    cert = check_subsupersolution(_poisson_pair(box, cfg), pair, cfg, params, box)
    assert cert.ordered
    assert cert.witness is None
    assert cert.max_excess_u <= 1e-9


def test_non_subsolution_names_equation_and_vertex(unit_vortex2):
    box = LatticeBox.cube(2, 3)
    params = default_params(1.0)
    pair, _ = solve_on_box(box, unit_vortex2, params)
    with pytest.raises(CertificateError) as excinfo:
        check_subsupersolution(FieldPair.zeros(box), pair, unit_vortex2, params, box)
    assert excinfo.value.diagnostics["equation"] == "W"
    assert excinfo.value.diagnostics["vertex"] == (0, 0)


def test_ordering_witness(unit_vortex2):
    box = LatticeBox.cube(2, 3)
    params = default_params(1.0)
    candidate = _poisson_pair(box, unit_vortex2)
    # Referencia artificialmente baja: el certificado devuelve el testigo
    low = FieldPair(candidate.u - LatticeFunction.from_interior(box, np.ones(box.shape)), candidate.v)
    cert = check_subsupersolution(candidate, low, unit_vortex2, params, box)
    assert not cert.ordered
    assert box.contains(cert.witness)
    assert cert.max_excess_u == pytest.approx(1.0)


@pytest.mark.parametrize("dim,radius", [(2, 5), (3, 3)])
def test_symmetric_config_keeps_lattice_symmetries(dim, radius):
    cfg = VortexConfig(dim, u_vortices=(((0,) * dim, 1),))
    box = LatticeBox.cube(dim, radius)
    pair, _ = solve_on_box(box, cfg, default_params(1.0, stop_tol=1e-12))
    u = pair.u.interior_values
    images = [np.flip(u, axis=k) for k in range(dim)] + [np.swapaxes(u, 0, k) for k in range(1, dim)]
    for image in images:
        assert np.abs(image - u).max() <= 1e-12


def test_green_combination_is_ordered_below_box_solution():
    cfg = VortexConfig(3, u_vortices=(((0, 0, 0), 1),))
    box = LatticeBox.cube(3, 3)
    params = default_params(1.0, stop_tol=1e-12)
    pair, _ = solve_on_box(box, cfg, params)
    psi = green_combination(cfg, "u", box)
    eta = green_combination(cfg, "v", box)
    cert = check_subsupersolution(FieldPair(psi, eta), pair, cfg, params, box)
    assert cert.ordered
    assert cert.witness is None
    assert cert.max_excess_u < 0.0
    assert cert.min_subsolution_margin_u >= 0.0


def test_first_two_iterates_match_dense_solve():
    cfg = VortexConfig(2, u_vortices=(((0, 0), 1),), v_vortices=(((1, 0), 2),))
    box = LatticeBox.cube(2, 3)
    lam = 1.5
    params = default_params(lam, stop_tol=1e-12)
    L = params.shift
    A = dirichlet_laplacian(box).toarray() - L * np.eye(box.size)
    g, h = cfg.source_arrays(box)
    g, h = g[box.interior_slices].reshape(-1), h[box.interior_slices].reshape(-1)

    first = iterate_once(FieldPair.zeros(box), cfg, params, box)
    u1 = np.linalg.solve(A, g)
    v1 = np.linalg.solve(A, h)
    assert np.allclose(first.u.interior_vector(), u1, atol=1e-10)
    assert np.allclose(first.v.interior_vector(), v1, atol=1e-10)

    second = iterate_once(first, cfg, params, box)
    u2 = np.linalg.solve(A, lam * np.exp(v1) * np.expm1(u1) + g - L * u1)
    v2 = np.linalg.solve(A, lam * np.exp(u1) * np.expm1(v1) + h - L * v1)
    assert np.allclose(second.u.interior_vector(), u2, atol=1e-10)
    assert np.allclose(second.v.interior_vector(), v2, atol=1e-10)
