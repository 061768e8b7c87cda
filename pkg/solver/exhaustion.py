"""
Agotamiento de ℤⁿ por cajas encajadas Ω₁ ⊂ Ω₂ ⊂ …: se resuelve en cada
caja, se observa la solución extendida por cero sobre una ventana fija y
se comprueba que decrece con el radio hacia la solución maximal (u*, v*).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import xarray as xr
from scipy.stats import linregress

from solver.errors import ConvergenceError, LatticeError, ParameterError
from solver.lattice import Exhaustion, LatticeBox
from solver.monotone_scheme import SchemeParams, SolveReport, solve_on_box
from solver.operators import FieldPair, LatticeFunction
from solver.utils import fail, new_certificate
from solver.vortex_data import VortexConfig, total_mass_B

logger = logging.getLogger(__name__)

DEFAULT_RADII = (4, 6, 9, 13, 19, 28)
DEFAULT_WINDOW_RADIUS = 5
DEFAULT_EXT_TOL = 1e-8

# Margen de ajuste de la tasa: rate ≥ (1 − ε)·m
DECAY_EPSILON = 0.2


@dataclass
class DecayFit:
    """Ajuste lineal de ln|u| frente a t a lo largo de un eje."""
    axis: int
    rate: float
    r2: float
    intercept: float
    floor: float
    n_points: int
    t_min: int
    t_max: int

    @property
    def constant(self) -> float:
        """C en |u| ≈ C·e^{−rate·t}."""
        return math.exp(self.intercept)

    @property
    def passes(self) -> bool:
        return self.rate >= (1.0 - DECAY_EPSILON) * self.floor


@dataclass
class MaximalSolution:
    window: LatticeBox
    u_star: LatticeFunction
    v_star: LatticeFunction
    box_radii: List[int]
    sup_differences: List[float]
    converged: bool
    history: xr.Dataset
    reports: List[SolveReport] = field(default_factory=list)
    final_box: Optional[FieldPair] = None
    lam: float = 0.0
    max_domain_violation: float = 0.0
    domain_slack: float = 1e-12
    ext_tol: float = DEFAULT_EXT_TOL
    decay_fit: Optional[DecayFit] = None

    @property
    def pair(self) -> FieldPair:
        return FieldPair(self.u_star, self.v_star)

    @property
    def domain_monotone_ok(self) -> bool:
        return self.max_domain_violation <= self.domain_slack

    def records(self) -> List[Dict[str, Any]]:
        """Una fila por radio (para exhaustion.csv)."""
        rows = []
        for i, (radius, report) in enumerate(zip(self.box_radii, self.reports)):
            rows.append({
                "radius": radius,
                "box_size": int(self.history.attrs["box_sizes"][i]),
                "outer_iters": report.outer_iters,
                "sup_difference": self.sup_differences[i - 1] if i > 0 else math.nan,
                "residual_u": report.residual_u,
                "residual_v": report.residual_v,
                "flux_defect_u": report.flux_defect_u,
                "flux_defect_v": report.flux_defect_v,
                "min_u_window": float(self.history["u"].isel(radius=i).min()),
                "min_v_window": float(self.history["v"].isel(radius=i).min()),
            })
        return rows

    def certificate(self) -> Dict[str, Any]:
        cert = new_certificate()
        for report in self.reports:
            sub = report.certificate()
            for message in sub["errors"]:
                fail(cert, f"{report.box}: {message}")
        if not self.domain_monotone_ok:
            fail(cert, f"domain monotonicity violated by {self.max_domain_violation:.3e}")
        if not self.converged:
            cert["warnings"].append(
                f"exhaustion not converged: last difference {self.sup_differences[-1]:.3e}"
                if self.sup_differences else "exhaustion not converged"
            )
        cert["stats"] = {
            "radii": list(self.box_radii),
            "sup_differences": list(self.sup_differences),
            "max_domain_violation": self.max_domain_violation,
        }
        return cert


def window_frame(window: LatticeBox) -> Dict[str, Any]:
    """Coordenadas de los vértices de Ω̄_w para un eje 'vertex' de xarray."""
    coords = window.closure
    return {f"x{i + 1}": ("vertex", coords[:, i]) for i in range(window.dim)}


def default_window(cfg: VortexConfig, radius: int = DEFAULT_WINDOW_RADIUS) -> LatticeBox:
    return LatticeBox.centered(cfg.centroid(), radius)


def solve_maximal(
    cfg: VortexConfig,
    params: SchemeParams,
    radii: Sequence[int] = DEFAULT_RADII,
    window: Optional[LatticeBox] = None,
    ext_tol: float = DEFAULT_EXT_TOL,
    strict: bool = True,
) -> MaximalSolution:
    """
    Resolver en cajas concéntricas (centradas en el centroide de los
    vórtices) hasta que sup_w|u^{Ωᵢ₊₁} − u^{Ωᵢ}| + sup_w|v^{Ωᵢ₊₁} − v^{Ωᵢ}| ≤ ext_tol.

    Args:
        cfg: fuentes
        params: parámetros del esquema monótono
        radii: radios crecientes de las cajas
        window: ventana de observación; por defecto radio 5 (o el menor
            radio si es más pequeño) alrededor del centroide
        ext_tol: tolerancia entre radios consecutivos
        strict: si False, agotar los radios sin converger devuelve
            converged=False en lugar de lanzar

    Raises:
        ConvergenceError: radios agotados antes de la tolerancia (strict)
    """
    radii = [int(r) for r in radii]
    if not radii:
        raise ParameterError("radii must be nonempty")
    if not ext_tol > 0:
        raise ParameterError(f"ext_tol must be positive, got {ext_tol}")
    center = cfg.centroid()
    if window is None:
        window = default_window(cfg, min(DEFAULT_WINDOW_RADIUS, radii[0]))
    cfg.check_inside(window)
    family = Exhaustion.from_radii(center, radii, base=window)
    if not window.is_subbox(family.boxes[0]):
        raise LatticeError(f"window {window.describe()} not inside smallest box")

    trivial = total_mass_B(cfg) == 0
    slack = max(1e-12, 10.0 * params.stop_tol)
    mask = window.closure_mask
    u_rows: List[np.ndarray] = []
    v_rows: List[np.ndarray] = []
    reports: List[SolveReport] = []
    differences: List[float] = []
    used: List[int] = []
    sizes: List[int] = []
    max_violation = 0.0
    converged = False
    pair = None

    for radius, box in zip(radii, family):
        pair, report = solve_on_box(box, cfg, params)
        seen = pair.restrict(window)
        u_w, v_w = seen.u.values[mask], seen.v.values[mask]
        if u_rows:
            du = u_w - u_rows[-1]
            dv = v_w - v_rows[-1]
            max_violation = max(max_violation, float(du.max()), float(dv.max()))
            diff = float(np.abs(du).max()) + float(np.abs(dv).max())
            differences.append(diff)
            logger.info(f"📏 radio {radius}: sup-diferencia en la ventana {diff:.3e}")
        u_rows.append(u_w)
        v_rows.append(v_w)
        reports.append(report)
        used.append(radius)
        sizes.append(box.size)
        if trivial or (differences and differences[-1] <= ext_tol):
            converged = True
            break

    history = xr.Dataset(
        {
            "u": (("radius", "vertex"), np.array(u_rows)),
            "v": (("radius", "vertex"), np.array(v_rows)),
        },
        coords={"radius": used, **window_frame(window)},
        attrs={"lam": params.lam, "box_sizes": sizes},
    )
    if max_violation > slack:
        logger.warning(f"⚠️ Monotonía en el dominio violada por {max_violation:.2e}")
    if not converged:
        diagnostics = {"differences": differences, "radii": used}
        if strict:
            raise ConvergenceError(
                f"exhaustion did not reach ext_tol={ext_tol:g}; differences {differences}",
                diagnostics,
            )
        logger.warning(f"⚠️ Agotamiento sin converger (ext_tol={ext_tol:g}): {differences}")

    final = pair.restrict(window)
    return MaximalSolution(
        window=window,
        u_star=final.u,
        v_star=final.v,
        box_radii=used,
        sup_differences=differences,
        converged=converged,
        history=history,
        reports=reports,
        final_box=pair,
        lam=params.lam,
        max_domain_violation=max(max_violation, 0.0),
        domain_slack=slack,
        ext_tol=ext_tol,
    )


def decay_floor(lam: float, dim: int) -> float:
    """m = ln(1 + λ/2n)."""
    return math.log1p(lam / (2.0 * dim))


def estimate_decay_rate(
    sol: MaximalSolution,
    axis: int = 0,
    component: str = "u",
    min_abs: float = 1e-9,
):
    """
    Pendiente de ln|u*(c + t·e_axis)| frente a t, con c el centro de la caja.

    Usa la solución de la mayor caja resuelta; descarta puntos con
    |u| < max(100·ε, min_abs) y los que están a distancia ≤ 2 de δΩ.

    Args:
        min_abs: piso de |u| para el ajuste. Por debajo de ~1e-9 los valores
            quedan al nivel del error de parada de cada caja (stop_tol y la
            tolerancia de Krylov) y curvan la recta de ln|u|; con min_abs=0
            queda solo el piso 100·ε.

    Returns:
        (rate, r2); el ajuste completo queda en sol.decay_fit

    Raises:
        ParameterError: menos de 5 puntos utilizables
            ("window too small or solution trivial")
    """
    box_pair = sol.final_box
    if box_pair is None:
        raise ParameterError("window too small or solution trivial")
    box = box_pair.domain
    if not 0 <= axis < box.dim:
        raise LatticeError(f"axis {axis} outside [0, {box.dim})")
    f = box_pair.u if component == "u" else box_pair.v
    star = sol.u_star if component == "u" else sol.v_star
    if float(np.abs(star.values).max(initial=0.0)) <= 10.0 * sol.ext_tol:
        raise ParameterError("window too small or solution trivial")

    center = box.center
    half = box.upper[axis] - center[axis]
    floor_abs = max(100.0 * np.finfo(float).eps, min_abs)
    ts, logs = [], []
    # δΩ está en t = half + 1; distancia > 2
    for t in range(1, half - 1):
        p = list(center)
        p[axis] += t
        value = abs(f.at(p))
        if value >= floor_abs:
            ts.append(t)
            logs.append(math.log(value))
    if len(ts) < 5:
        raise ParameterError(
            "window too small or solution trivial",
            {"usable_points": len(ts), "axis": axis},
        )
    fit = linregress(ts, logs)
    result = DecayFit(
        axis=axis,
        rate=-float(fit.slope),
        r2=float(fit.rvalue ** 2),
        intercept=float(fit.intercept),
        floor=decay_floor(sol.lam, box.dim),
        n_points=len(ts),
        t_min=ts[0],
        t_max=ts[-1],
    )
    sol.decay_fit = result
    logger.info(
        f"📉 Decaimiento eje {axis}: tasa {result.rate:.5f} (m={result.floor:.5f}), "
        f"R²={result.r2:.5f}, {result.n_points} puntos"
    )
    return result.rate, result.r2


def estimate_decay_constant(sol: MaximalSolution, axis: int = 0, component: str = "u") -> float:
    """C ajustada en |u*| ≈ C·e^{−rate·t} (solo valor empírico)."""
    if sol.decay_fit is None or sol.decay_fit.axis != axis:
        estimate_decay_rate(sol, axis, component)
    return sol.decay_fit.constant

