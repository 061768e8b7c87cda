"""
Experimentos en λ: barridos con certificado de monotonía en λ, la cota
inferior para λ grande, los límites λ → 0 y la sonda de unicidad con
Newton desde varios puntos de partida.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import xarray as xr

from solver.errors import ConvergenceError, ParameterError, SolverError
from solver.exhaustion import DEFAULT_EXT_TOL, DEFAULT_RADII, MaximalSolution, default_window, solve_maximal, window_frame
from solver.green_function import green_combination
from solver.lattice import LatticeBox
from solver.monotone_scheme import SchemeParams, default_params, mass_balance
from solver.newton import NewtonResult, newton_solve
from solver.operators import FieldPair, LatticeFunction
from solver.utils import fail, new_certificate
from solver.vortex_data import LambdaThreshold, VortexConfig, lambda_threshold, total_mass_B

logger = logging.getLogger(__name__)

LAMBDA_MONOTONE_SLACK = 1e-9
LOG_HALF = math.log(0.5)
# Balance de flujo: solo se exige si la caja ya es casi nula junto a δΩ
FLUX_COLLAR_MAX = 1e-6
FLUX_REL_TOL = 0.01


def _check_lambdas(lambdas: Sequence[float]) -> List[float]:
    values = sorted(float(l) for l in lambdas)
    if not values:
        raise ParameterError("lambdas must be nonempty")
    if values[0] <= 0:
        raise ParameterError(f"lambda must be positive, got {values[0]}")
    if len(set(values)) != len(values):
        raise ParameterError("lambdas must be distinct")
    return values


def _window_values(sol: MaximalSolution) -> Dict[str, np.ndarray]:
    mask = sol.window.closure_mask
    return {"u": sol.u_star.values[mask], "v": sol.v_star.values[mask]}


def _diagnostics(sol: MaximalSolution, cfg: VortexConfig) -> Dict[str, Any]:
    """Resumen por λ: mínimos, normas, balance de masa y flujo en la mayor caja."""
    vals = _window_values(sol)
    box_pair = sol.final_box
    u_box = box_pair.u.interior_values
    v_box = box_pair.v.interior_values
    collar = box_pair.domain.collar_mask[box_pair.domain.interior_slices]
    return {
        "lam": sol.lam,
        "converged": sol.converged,
        "radius": sol.box_radii[-1],
        "min_u": float(vals["u"].min()),
        "min_v": float(vals["v"].min()),
        "min_u_plus_v": float((vals["u"] + vals["v"]).min()),
        "sup_u": float(np.abs(vals["u"]).max()),
        "sup_v": float(np.abs(vals["v"]).max()),
        "mass_balance": mass_balance(box_pair),
        "mass_bound": total_mass_B(cfg) / sol.lam,
        "flux_total_u": sol.lam * float(np.sum(np.exp(v_box) * -np.expm1(u_box))),
        "flux_total_v": sol.lam * float(np.sum(np.exp(u_box) * -np.expm1(v_box))),
        "flux_target_u": cfg.total_mass_u,
        "flux_target_v": cfg.total_mass_v,
        "collar_max_abs": float(max(np.abs(u_box[collar]).max(), np.abs(v_box[collar]).max())),
    }


# ----------------------------------------------------------------------
# Barrido en λ
# ----------------------------------------------------------------------
@dataclass
class LambdaSweep:
    cfg: VortexConfig
    lambdas: List[float]
    window: LatticeBox
    snapshots: xr.Dataset
    solutions: Dict[float, MaximalSolution] = field(default_factory=dict)
    failures: Dict[float, str] = field(default_factory=dict)
    diagnostics: List[Dict[str, Any]] = field(default_factory=list)
    max_monotone_violation: float = 0.0

    @property
    def lambda_monotone_ok(self) -> bool:
        return self.max_monotone_violation <= LAMBDA_MONOTONE_SLACK

    def certificate(self) -> Dict[str, Any]:
        cert = new_certificate()
        for lam, message in sorted(self.failures.items()):
            fail(cert, f"λ={lam:g}: {message}")
        if not self.lambda_monotone_ok:
            fail(cert, f"λ-monotonicity violated by {self.max_monotone_violation:.3e}")
        for lam, sol in sorted(self.solutions.items()):
            sub = sol.certificate()
            for message in sub["errors"]:
                fail(cert, f"λ={lam:g}: {message}")
            cert["warnings"].extend(f"λ={lam:g}: {w}" for w in sub["warnings"])
        flux_checked = []
        B = total_mass_B(self.cfg)
        for d in self.diagnostics:
            if d["collar_max_abs"] >= FLUX_COLLAR_MAX:
                cert["warnings"].append(f"λ={d['lam']:g}: flux balance not checked (collar max {d['collar_max_abs']:.1e})")
                continue
            flux_checked.append(d["lam"])
            for side in ("u", "v"):
                defect = abs(d[f"flux_total_{side}"] - d[f"flux_target_{side}"])
                if defect > FLUX_REL_TOL * B:
                    fail(cert, f"λ={d['lam']:g}: flux balance of {side} off by {defect:.3e} (> 1% of B)")
        cert["stats"] = {
            "lambdas": self.lambdas,
            "max_monotone_violation": self.max_monotone_violation,
            "flux_checked": flux_checked,
        }
        return cert

    def to_frame(self) -> pd.DataFrame:
        """Filas lam, x1..xn, u, v (solo λ resueltos)."""
        frames = []
        for lam, sol in sorted(self.solutions.items()):
            frame = sol.pair.to_frame()
            frame.insert(0, "lam", lam)
            frames.append(frame)
        if not frames:
            return pd.DataFrame(columns=["lam"])
        return pd.concat(frames, ignore_index=True)

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.diagnostics)


def sweep_lambda(
    cfg: VortexConfig,
    lambdas: Sequence[float],
    window: Optional[LatticeBox] = None,
    params: Optional[SchemeParams] = None,
    radii: Sequence[int] = DEFAULT_RADII,
    ext_tol: float = DEFAULT_EXT_TOL,
    strict: bool = True,
    workers: int = 1,
) -> LambdaSweep:
    """
    Solución maximal para cada λ y certificado λ₁ < λ₂ ⇒ u*_{λ₁} ≤ u*_{λ₂} + 1e−9.

    Args:
        params: plantilla; cada λ usa params.with_lambda(λ)
        workers: puntos del barrido en paralelo

    Raises:
        ConvergenceError: algún λ falló (el barrido se completa igual y
            viaja en diagnostics["sweep"])
    """
    values = _check_lambdas(lambdas)
    template = params if params is not None else default_params(values[0])
    if window is None:
        window = default_window(cfg, min(5, min(radii)))

    def run(lam: float) -> MaximalSolution:
        return solve_maximal(cfg, template.with_lambda(lam), radii, window, ext_tol, strict)

    solutions: Dict[float, MaximalSolution] = {}
    failures: Dict[float, str] = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {lam: pool.submit(run, lam) for lam in values}
        for lam in values:
            try:
                solutions[lam] = futures[lam].result()
                logger.info(f"✅ λ={lam:g} resuelto")
            except SolverError as e:
                failures[lam] = str(e)
                logger.error(f"❌ λ={lam:g}: {e}")

    size = int(window.closure_mask.sum())
    u = np.full((len(values), size), np.nan)
    v = np.full((len(values), size), np.nan)
    for i, lam in enumerate(values):
        if lam in solutions:
            vals = _window_values(solutions[lam])
            u[i], v[i] = vals["u"], vals["v"]
    snapshots = xr.Dataset(
        {"u": (("lam", "vertex"), u), "v": (("lam", "vertex"), v)},
        coords={"lam": values, **window_frame(window)},
    )

    violation = 0.0
    solved = [lam for lam in values if lam in solutions]
    for lo, hi in zip(solved, solved[1:]):
        a, b = _window_values(solutions[lo]), _window_values(solutions[hi])
        violation = max(violation, float((a["u"] - b["u"]).max()), float((a["v"] - b["v"]).max()))
    if violation > LAMBDA_MONOTONE_SLACK:
        logger.warning(f"⚠️ Monotonía en λ violada por {violation:.2e}")

    sweep = LambdaSweep(
        cfg=cfg,
        lambdas=values,
        window=window,
        snapshots=snapshots,
        solutions=solutions,
        failures=failures,
        diagnostics=[_diagnostics(solutions[lam], cfg) for lam in solved],
        max_monotone_violation=max(violation, 0.0),
    )
    if failures:
        raise ConvergenceError(
            f"λ sweep failed at {sorted(failures)}",
            {"sweep": sweep, "failures": failures},
        )
    return sweep


# ----------------------------------------------------------------------
# λ grande
# ----------------------------------------------------------------------
@dataclass
class LargeLambdaReport:
    lam: float
    B: float
    bound: float
    min_u_plus_v: float
    margin: float
    threshold: LambdaThreshold
    checked: bool
    passed: Optional[bool]

    def certificate(self) -> Dict[str, Any]:
        cert = new_certificate()
        if self.checked and not self.passed:
            fail(cert, f"u + v ≥ ln(1 − 2B/λ) violated: margin {self.margin:.3e}")
        if not self.checked:
            cert["warnings"].append("λ below the threshold 2B(2n + e^{4B}); margin is informational")
        cert["stats"] = {"margin": self.margin, "bound": self.bound, "log_threshold": self.threshold.log_value}
        return cert


def check_large_lambda_bound(snapshot: MaximalSolution, cfg: VortexConfig) -> LargeLambdaReport:
    """
    margen = min_w(u_λ + v_λ) − ln(1 − 2B/λ); con λ > 2B(2n + e^{4B}) debe
    ser ≥ −1e−9, por debajo del umbral solo se informa.

    Raises:
        ParameterError: λ ≤ 2B ("bound undefined")
    """
    lam = snapshot.lam
    B = total_mass_B(cfg)
    if lam <= 2.0 * B:
        raise ParameterError("bound undefined", {"lambda": lam, "B": B})
    bound = math.log1p(-2.0 * B / lam)
    vals = _window_values(snapshot)
    min_sum = float((vals["u"] + vals["v"]).min())
    margin = min_sum - bound
    threshold = lambda_threshold(cfg)
    checked = threshold.vacuous or threshold.exceeded_by(lam)
    passed = (margin >= -1e-9) if checked else None
    logger.info(
        f"📐 λ={lam:g}: min(u+v)={min_sum:.6e}, ln(1−2B/λ)={bound:.6e}, margen={margin:.3e}"
        + ("" if checked else " (informativo)")
    )
    return LargeLambdaReport(lam, B, bound, min_sum, margin, threshold, checked, passed)


# ----------------------------------------------------------------------
# λ → 0
# ----------------------------------------------------------------------
DEFAULT_SMALL_LAMBDAS = (1e-1, 1e-2, 1e-3, 1e-4)
SMALL_LAMBDA_RELATIVE_TOL = 0.02


@dataclass
class SmallLambdaReport:
    dim: int
    lambdas: List[float]
    rows: List[Dict[str, Any]]
    passed: bool
    failures: List[str] = field(default_factory=list)
    limit_u: Optional[LatticeFunction] = None
    limit_v: Optional[LatticeFunction] = None

    def certificate(self) -> Dict[str, Any]:
        cert = new_certificate()
        for message in self.failures:
            fail(cert, message)
        cert["stats"] = {"lambdas": self.lambdas}
        return cert

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)


def check_small_lambda_limit(
    cfg: VortexConfig,
    window: Optional[LatticeBox] = None,
    params: Optional[SchemeParams] = None,
    lambdas: Sequence[float] = DEFAULT_SMALL_LAMBDAS,
    radii: Sequence[int] = DEFAULT_RADII,
    ext_tol: float = DEFAULT_EXT_TOL,
    green_tol: Optional[float] = None,
) -> SmallLambdaReport:
    """
    n = 2: el mínimo de cada lado con fuente decrece estrictamente al bajar λ
    y el lado sin fuente es idénticamente 0.
    n ≥ 3: sup_w|u_λ − ψ_n| (y |v_λ − η_n|) no crece y el último valor es
    ≤ 2 % de ‖ψ_n‖∞.
    """
    schedule = sorted(_check_lambdas(lambdas), reverse=True)
    template = params if params is not None else default_params(schedule[0])
    if window is None:
        window = default_window(cfg, min(5, min(radii)))
    n = cfg.dim
    mask = window.closure_mask

    limits: Dict[str, Optional[np.ndarray]] = {"u": None, "v": None}
    psi = eta = None
    if n >= 3:
        psi = green_combination(cfg, "u", window, green_tol)
        eta = green_combination(cfg, "v", window, green_tol)
        limits = {"u": psi.values[mask], "v": eta.values[mask]}

    rows: List[Dict[str, Any]] = []
    for lam in schedule:
        sol = solve_maximal(cfg, template.with_lambda(lam), radii, window, ext_tol, strict=False)
        vals = _window_values(sol)
        row = {"lam": lam, "converged": sol.converged, "radius": sol.box_radii[-1]}
        for side in ("u", "v"):
            row[f"min_{side}"] = float(vals[side].min())
            row[f"sup_{side}"] = float(np.abs(vals[side]).max())
            if limits[side] is not None:
                row[f"dist_{side}"] = float(np.abs(vals[side] - limits[side]).max())
        rows.append(row)
        logger.info(f"🔬 λ={lam:g}: " + ", ".join(f"{k}={v:.4e}" for k, v in row.items() if isinstance(v, float)))

    failures: List[str] = []
    sources = {"u": not cfg.is_trivial_u, "v": not cfg.is_trivial_v}
    for side in ("u", "v"):
        if not sources[side]:
            for row in rows:
                if row[f"sup_{side}"] != 0.0:
                    failures.append(f"{side} not identically 0 at λ={row['lam']:g} despite zero source")
            continue
        if n == 2:
            for a, b in zip(rows, rows[1:]):
                drop = a[f"min_{side}"] - b[f"min_{side}"]
                b[f"decrease_{side}"] = drop
                if not drop > 0:
                    failures.append(
                        f"min {side} not strictly decreasing between λ={a['lam']:g} and λ={b['lam']:g}"
                    )
        else:
            for a, b in zip(rows, rows[1:]):
                if b[f"dist_{side}"] > a[f"dist_{side}"] + 1e-12:
                    failures.append(
                        f"distance to limit of {side} increased between λ={a['lam']:g} and λ={b['lam']:g}"
                    )
            scale = float(np.abs(limits[side]).max())
            final = rows[-1][f"dist_{side}"]
            if final > SMALL_LAMBDA_RELATIVE_TOL * scale:
                failures.append(
                    f"final distance {final:.4e} for {side} above {SMALL_LAMBDA_RELATIVE_TOL:.0%} of {scale:.4e}"
                )

    return SmallLambdaReport(
        dim=n,
        lambdas=schedule,
        rows=rows,
        passed=not failures,
        failures=failures,
        limit_u=psi,
        limit_v=eta,
    )


# ----------------------------------------------------------------------
# Unicidad
# ----------------------------------------------------------------------
@dataclass
class UniquenessReport:
    lam: float
    flagged: bool
    min_window: float
    starts: Dict[str, NewtonResult]
    distances: Dict[str, float]
    distance_to_monotone: Dict[str, float]
    passed: bool
    tolerance: float

    def certificate(self) -> Dict[str, Any]:
        cert = new_certificate()
        if not self.passed:
            fail(cert, f"Newton starts disagree beyond {self.tolerance:g} in the flagged regime: {self.distances}")
        for label, result in self.starts.items():
            if not result.converged:
                cert["warnings"].append(f"start {label}: {result.message}")
        if not self.flagged:
            cert["warnings"].append("regime flag false (min < ln ½); distances are informational")
        cert["stats"] = {"distances": self.distances, "flagged": self.flagged}
        return cert

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for label, result in self.starts.items():
            rows.append({
                "start": label,
                "converged": result.converged,
                "iterations": result.iterations,
                "residual": result.residual,
                "distance_to_monotone": self.distance_to_monotone.get(label, math.nan),
                "message": result.message,
            })
        return pd.DataFrame(rows)


def uniqueness_probe(
    cfg: VortexConfig,
    lam: float,
    window: Optional[LatticeBox] = None,
    params: Optional[SchemeParams] = None,
    radii: Sequence[int] = DEFAULT_RADII,
    ext_tol: float = DEFAULT_EXT_TOL,
    newton_tol: float = 1e-11,
    tolerance: float = 1e-7,
    green_tol: Optional[float] = None,
) -> UniquenessReport:
    """
    Newton sobre la mayor caja desde cero, (ψ_n, η_n) si n ≥ 3 y (ln ½, ln ½).

    El régimen marcado es u*, v* ≥ ln ½ en la ventana; solo ahí la
    discrepancia entre soluciones convergidas hace fallar la sonda.
    """
    template = params if params is not None else default_params(lam)
    maximal = solve_maximal(cfg, template.with_lambda(lam), radii, window, ext_tol, strict=False)
    vals = _window_values(maximal)
    min_window = float(min(vals["u"].min(), vals["v"].min()))
    flagged = min_window >= LOG_HALF
    box = maximal.final_box.domain

    starts: Dict[str, Optional[FieldPair]] = {"zero": None}
    if cfg.dim >= 3:
        starts["green"] = FieldPair(
            green_combination(cfg, "u", box, green_tol),
            green_combination(cfg, "v", box, green_tol),
        )
    half = np.full(box.shape, LOG_HALF)
    starts["log_half"] = FieldPair(LatticeFunction.from_interior(box, half), LatticeFunction.from_interior(box, half))

    results = {
        label: newton_solve(box, cfg, lam, start, tol=newton_tol, label=label)
        for label, start in starts.items()
    }
    converged = {k: r for k, r in results.items() if r.converged and r.pair is not None}

    def sup_distance(a: FieldPair, b: FieldPair) -> float:
        return float(max(np.abs(a.u.values - b.u.values).max(), np.abs(a.v.values - b.v.values).max()))

    labels = sorted(converged)
    distances = {
        f"{a}|{b}": sup_distance(converged[a].pair, converged[b].pair)
        for i, a in enumerate(labels) for b in labels[i + 1:]
    }
    to_monotone = {k: sup_distance(r.pair, maximal.final_box) for k, r in converged.items()}
    passed = not flagged or all(d <= tolerance for d in distances.values())
    shown = ", ".join(f"{k}={d:.2e}" for k, d in distances.items())
    logger.info(f"🧭 Unicidad λ={lam:g}: régimen={'sí' if flagged else 'no'}, distancias: {shown}")
    return UniquenessReport(
        lam=lam,
        flagged=flagged,
        min_window=min_window,
        starts=results,
        distances=distances,
        distance_to_monotone=to_monotone,
        passed=passed,
        tolerance=tolerance,
    )
