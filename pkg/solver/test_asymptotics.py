"""Pruebas de los barridos en λ, los límites asintóticos y la sonda de unicidad."""
import math

import numpy as np
import pytest

from solver.asymptotics import (
    FLUX_COLLAR_MAX,
    LOG_HALF,
    check_large_lambda_bound,
    check_small_lambda_limit,
    sweep_lambda,
    uniqueness_probe,
)
from solver.errors import ConvergenceError, ParameterError
from solver.exhaustion import DEFAULT_RADII, solve_maximal
from solver.monotone_scheme import default_params
from solver.vortex_data import FOUR_PI, VortexConfig, total_mass_B

QUICK_RADII = (3, 5, 8, 12)


def _fractional(dim: int, B: float) -> VortexConfig:
    return VortexConfig.fractional_mass(dim, u_vortices=[((0,) * dim, B / FOUR_PI)])


def test_quick_sweep_is_monotone_in_lambda(unit_vortex2):
    sweep = sweep_lambda(unit_vortex2, [4, 1, 2], radii=QUICK_RADII, ext_tol=1e-5, strict=False, workers=2)
    assert sweep.lambdas == [1.0, 2.0, 4.0]
    assert sweep.lambda_monotone_ok
    u = sweep.snapshots["u"].values
    assert np.all(np.diff(u, axis=0) >= -1e-9)
    summary = sweep.summary_frame()
    assert list(summary["lam"]) == [1.0, 2.0, 4.0]
    assert {"min_u", "sup_u", "mass_balance", "mass_bound"} <= set(summary.columns)
    assert np.all(summary["mass_balance"] <= summary["mass_bound"] + 1e-8)
    frame = sweep.to_frame()
    assert list(frame.columns) == ["lam", "x1", "x2", "u", "v"]
    assert sweep.certificate()["valid"]
    assert sweep.certificate()["stats"]["flux_checked"] == [
        d["lam"] for d in sweep.diagnostics if d["collar_max_abs"] < FLUX_COLLAR_MAX
    ]


def test_flux_totals_match_sources_on_large_box(unit_vortex2):
    sweep = sweep_lambda(unit_vortex2, [4.0, 8.0], radii=(4, 6, 9, 13, 19), ext_tol=1e-12, strict=False, workers=2)
    cert = sweep.certificate()
    assert cert["valid"], cert["errors"]
    assert cert["stats"]["flux_checked"] == [4.0, 8.0]
    B = total_mass_B(unit_vortex2)
    for d in sweep.diagnostics:
        assert d["collar_max_abs"] < FLUX_COLLAR_MAX
        assert abs(d["flux_total_u"] - FOUR_PI) <= 0.01 * B
        assert d["flux_total_v"] == 0.0


def test_sweep_failure_carries_partial_results(unit_vortex2):
    with pytest.raises(ConvergenceError) as excinfo:
        sweep_lambda(unit_vortex2, [1.0, 2.0], radii=(3, 4), ext_tol=1e-14)
    diagnostics = excinfo.value.diagnostics
    assert set(diagnostics["failures"]) == {1.0, 2.0}
    assert not diagnostics["sweep"].certificate()["valid"]


def test_sweep_rejects_bad_schedules(unit_vortex2):
    with pytest.raises(ParameterError):
        sweep_lambda(unit_vortex2, [])
    with pytest.raises(ParameterError):
        sweep_lambda(unit_vortex2, [1.0, 1.0])
    with pytest.raises(ParameterError):
        sweep_lambda(unit_vortex2, [-1.0, 1.0])


def test_large_lambda_bound_on_fractional_config():
    cfg = _fractional(2, 0.05)
    sol = solve_maximal(cfg, default_params(10.0), QUICK_RADII, ext_tol=1e-8, strict=False)
    report = check_large_lambda_bound(sol, cfg)
    assert report.checked
    assert report.passed
    assert report.margin >= 0.0
    assert report.bound == pytest.approx(math.log(1 - 0.01))
    assert report.certificate()["valid"]


def test_large_lambda_bound_informational_below_threshold():
    cfg = VortexConfig(2, u_vortices=(((0, 0), 1),))
    sol = solve_maximal(cfg, default_params(30.0), QUICK_RADII, ext_tol=1e-6, strict=False)
    report = check_large_lambda_bound(sol, cfg)
    assert not report.checked
    assert report.passed is None
    assert report.certificate()["valid"]
    assert report.certificate()["warnings"]


def test_large_lambda_bound_undefined(unit_vortex2):
    sol = solve_maximal(unit_vortex2, default_params(1.0), QUICK_RADII, ext_tol=1e-5, strict=False)
    with pytest.raises(ParameterError, match="bound undefined"):
        check_large_lambda_bound(sol, unit_vortex2)


def test_small_lambda_two_dim_quick(unit_vortex2):
    report = check_small_lambda_limit(unit_vortex2, lambdas=[1.0, 0.1, 0.01], radii=QUICK_RADII, ext_tol=1e-6)
    assert report.passed, report.failures
    mins = [row["min_u"] for row in report.rows]
    assert all(b < a for a, b in zip(mins, mins[1:]))
    assert all(row["sup_v"] == 0.0 for row in report.rows)
    assert report.certificate()["valid"]


def test_uniqueness_probe_flagged_regime():
    cfg = _fractional(2, 0.05)
    report = uniqueness_probe(cfg, 4.0, radii=(3, 5), ext_tol=1e-6)
    assert report.flagged
    assert report.min_window >= LOG_HALF
    assert set(report.starts) == {"zero", "log_half"}
    assert all(r.converged for r in report.starts.values())
    assert all(d <= 1e-7 for d in report.distances.values())
    assert report.passed
    assert list(report.to_frame()["start"]) == ["zero", "log_half"]


@pytest.mark.slow
def test_lambda_sweep_trend():
    cfg = VortexConfig(2, u_vortices=(((0, 0), 1),), v_vortices=(((1, 0), 1),))
    lambdas = [0.5, 1, 2, 4, 8, 16]
    sweep = sweep_lambda(cfg, lambdas, radii=DEFAULT_RADII, strict=False, workers=2)
    assert sweep.lambda_monotone_ok
    sups = {d["lam"]: d["sup_u"] for d in sweep.diagnostics}
    assert sups[16.0] < 0.25 * sups[0.5]


@pytest.mark.slow
def test_small_lambda_limits():
    n2 = check_small_lambda_limit(VortexConfig(2, u_vortices=(((0, 0), 1),)))
    assert n2.passed, n2.failures
    n3 = check_small_lambda_limit(VortexConfig(3, u_vortices=(((0, 0, 0), 1),)))
    assert n3.passed, n3.failures
    final = n3.rows[-1]
    scale = float(np.abs(n3.limit_u.values).max())
    assert final["lam"] == 1e-4
    assert final["dist_u"] <= 0.02 * scale


@pytest.mark.slow
@pytest.mark.parametrize("cfg,lam,radii", [
    (VortexConfig.fractional_mass(2, u_vortices=[((0, 0), 0.05 / FOUR_PI)]), 4.0, (3, 5, 8)),
    (VortexConfig(2, u_vortices=(((0, 0), 1),), v_vortices=(((1, 0), 1),)), 40.0, (3, 5, 8)),
    (VortexConfig.fractional_mass(2, u_vortices=[((0, 0), 0.02)], v_vortices=[((1, 1), 0.01)]), 2.0, (3, 5, 8)),
    (VortexConfig(3, u_vortices=(((0, 0, 0), 1),)), 40.0, (2, 3)),
    (VortexConfig.fractional_mass(3, u_vortices=[((0, 0, 0), 0.01)], v_vortices=[((1, 0, 0), 0.01)]), 4.0, (2, 3)),
])
def test_uniqueness_starts_agree(cfg, lam, radii):
    report = uniqueness_probe(cfg, lam, radii=radii, ext_tol=1e-6)
    assert report.flagged
    assert report.starts["zero"].converged
    assert report.distances
    assert report.passed, report.distances
