"""
Esquema monótono sobre una caja finita Ω:

    (Δ − L) u_k = λ e^{v_{k−1}}(e^{u_{k−1}} − 1) + g − L u_{k−1}   en Ω
    (Δ − L) v_k = λ e^{u_{k−1}}(e^{v_{k−1}} − 1) + h − L v_{k−1}   en Ω
    u_k = v_k = 0 en δΩ,   u_0 = v_0 = 0,   L > 2λ.

Restando (Δ − L)u_{k−1} a ambos lados, cada paso resuelve el incremento
(Δ − L)(u_k − u_{k−1}) = −r_{k−1}, con r el residuo no lineal
Δu − λe^v(e^u − 1) − g. Es el mismo iterado; el error del Krylov queda
relativo al tamaño del incremento.
"""
import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from solver.errors import CertificateError, ConvergenceError, LatticeError, ParameterError
from solver.lattice import LatticeBox
from solver.linear_solver import SolverParams, solve_shifted_with_info
from solver.operators import FieldPair, LatticeFunction, flux_sum, laplacian_field, laplacian_interior
from solver.utils import fail, new_certificate
from solver.vortex_data import VortexConfig, total_mass_B

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SchemeParams:
    """
    Parámetros del esquema. Si L no se da, L = shift_ratio·λ (2.5λ por
    defecto); siempre debe cumplirse L > 2λ.
    """
    lam: float
    L: Optional[float] = None
    stop_tol: float = 1e-10
    max_outer: int = 100_000
    linear: SolverParams = field(default_factory=lambda: SolverParams(tol=1e-13))
    shift_ratio: float = 2.5
    monotone_slack: float = 1e-12
    parallel: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ParameterError(f"lambda must be positive, got {self.lam}")
        if not self.stop_tol > 0:
            raise ParameterError(f"stop_tol must be positive, got {self.stop_tol}")
        if self.max_outer < 1:
            raise ParameterError(f"max_outer must be ≥ 1, got {self.max_outer}")
        if not self.shift > 2.0 * self.lam:
            raise ParameterError("shift too small", {"L": self.shift, "lambda": self.lam})

    @property
    def shift(self) -> float:
        return self.L if self.L is not None else self.shift_ratio * self.lam

    def with_lambda(self, lam: float) -> "SchemeParams":
        """Mismos ajustes para otro λ (L se recalcula con shift_ratio)."""
        return replace(self, lam=lam, L=None)

    def linear_for(self, dim: int) -> SolverParams:
        """
        Tolerancia del Krylov acotada por la precisión alcanzable
        (~ε·cond, con cond ≤ (L + 4n)/L).
        """
        cond = (self.shift + 4.0 * dim) / self.shift
        return replace(self.linear, tol=max(self.linear.tol, 64.0 * EPS * cond))


def default_params(lam: float, **kwargs) -> SchemeParams:
    """L = 2.5λ y tolerancias por defecto."""
    return SchemeParams(lam=lam, **kwargs)


@dataclass
class SolveReport:
    """Certificados de una resolución sobre una caja."""
    box: str
    lam: float
    L: float
    outer_iters: int
    final_diff_u: float
    final_diff_v: float
    monotone_ok: bool
    max_monotone_violation: float
    flux_defect_u: float
    flux_defect_v: float
    flux_tolerance: float
    residual_u: float
    residual_v: float
    residual_tolerance: float
    collar_sum_max_u: float
    collar_sum_max_v: float
    collar_bound_ok: bool
    mass_balance: float
    mass_balance_bound: float
    linear_iterations: int = 0

    @property
    def flux_ok(self) -> bool:
        return max(abs(self.flux_defect_u), abs(self.flux_defect_v)) <= self.flux_tolerance

    @property
    def residual_ok(self) -> bool:
        return max(self.residual_u, self.residual_v) <= self.residual_tolerance

    @property
    def mass_balance_ok(self) -> bool:
        return self.mass_balance <= self.mass_balance_bound + 1e-8

    def certificate(self) -> Dict[str, Any]:
        """Certificado con la forma estándar valid/errors/warnings/stats."""
        cert = new_certificate()
        if not self.monotone_ok:
            fail(cert, f"monotonicity violated by {self.max_monotone_violation:.3e}")
        if not self.flux_ok:
            fail(cert, f"flux identity defect {max(abs(self.flux_defect_u), abs(self.flux_defect_v)):.3e} "
                       f"> {self.flux_tolerance:.3e}")
        if not self.residual_ok:
            fail(cert, f"nonlinear residual {max(self.residual_u, self.residual_v):.3e} "
                       f"> {self.residual_tolerance:.3e}")
        if not self.collar_bound_ok:
            fail(cert, "collar sum bound Σ_{B(Ω)}|u_k| < B violated")
        if not self.mass_balance_ok:
            fail(cert, f"mass balance {self.mass_balance:.6e} > B/λ = {self.mass_balance_bound:.6e}")
        cert["stats"] = {
            "outer_iters": self.outer_iters,
            "linear_iterations": self.linear_iterations,
            "residual_u": self.residual_u,
            "residual_v": self.residual_v,
            "flux_defect_u": self.flux_defect_u,
            "flux_defect_v": self.flux_defect_v,
        }
        return cert


# ----------------------------------------------------------------------
# Piezas del sistema
# ----------------------------------------------------------------------
def _nonlinear(u: np.ndarray, v: np.ndarray, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """(λe^v(e^u − 1), λe^u(e^v − 1))."""
    return lam * np.exp(v) * np.expm1(u), lam * np.exp(u) * np.expm1(v)


def nonlinear_residual(pair: FieldPair, cfg: VortexConfig, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """Residuo del sistema en los vértices interiores: Δu − λe^v(e^u − 1) − g, y el de v."""
    domain = pair.domain
    g, h = cfg.source_arrays(domain)
    sl = domain.interior_slices
    nu, nv = _nonlinear(pair.u.interior_values, pair.v.interior_values, lam)
    ru = laplacian_field(pair.u) - nu - g[sl]
    rv = laplacian_field(pair.v) - nv - h[sl]
    return ru, rv


def flux_defects(pair: FieldPair, cfg: VortexConfig, lam: float) -> Tuple[float, float]:
    """
    Σ_{δΩ} ∂u/∂n̄ + λ Σ_Ω e^v(1 − e^u) − Σ_Ω g, y el análogo para v con h.
    """
    u, v = pair.u.interior_values, pair.v.interior_values
    defect_u = flux_sum(pair.u) + lam * float(np.sum(np.exp(v) * -np.expm1(u))) - cfg.total_mass_u
    defect_v = flux_sum(pair.v) + lam * float(np.sum(np.exp(u) * -np.expm1(v))) - cfg.total_mass_v
    return defect_u, defect_v


def mass_balance(pair: FieldPair) -> float:
    """Σ_Ω (e^u + e^v − 2e^{u+v})."""
    u, v = pair.u.interior_values, pair.v.interior_values
    return float(np.sum(np.exp(u) + np.exp(v) - 2.0 * np.exp(u + v)))


def _check_state(state: FieldPair, domain: LatticeBox, slack: float) -> None:
    if state.domain != domain:
        raise LatticeError("state lives on a different domain")
    for name, f in (("u", state.u), ("v", state.v)):
        if np.any(f.boundary_vector() != 0.0):
            raise ParameterError(f"state {name} must vanish on δΩ")
        if f.interior_values.max(initial=0.0) > slack:
            raise ParameterError(f"state {name} must be ≤ 0")


def _step(
    u: np.ndarray,
    v: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    domain: LatticeBox,
    params: SchemeParams,
    linear: SolverParams,
    executor: Optional[Executor] = None,
):
    """
    Incrementos (δu, δv) de un paso del esquema.

    Returns:
        δu, δv, iteraciones de Krylov y la holgura de monotonía admitida:
        el mayor entre monotone_slack y la cota del error del solve lineal
        (tol·‖r‖₂/L)
    """
    nu, nv = _nonlinear(u, v, params.lam)
    ru = laplacian_interior(u) - nu - g
    rv = laplacian_interior(v) - nv - h
    L = params.shift
    if executor is not None:
        fu = executor.submit(solve_shifted_with_info, domain, L, -ru, linear)
        fv = executor.submit(solve_shifted_with_info, domain, L, -rv, linear)
        (du, iu), (dv, iv) = fu.result(), fv.result()
    else:
        du, iu = solve_shifted_with_info(domain, L, -ru, linear)
        dv, iv = solve_shifted_with_info(domain, L, -rv, linear)
    noise = linear.tol * max(iu.rhs_norm, iv.rhs_norm) / L
    slack = max(params.monotone_slack, noise)
    return du.interior_values, dv.interior_values, iu.iterations + iv.iterations, slack


def iterate_once(state: FieldPair, cfg: VortexConfig, params: SchemeParams, domain: LatticeBox) -> FieldPair:
    """
    Un paso del esquema: (u_{k−1}, v_{k−1}) ↦ (u_k, v_k).

    Raises:
        ParameterError: L ≤ 2λ ("shift too small") o estado inválido
        CertificateError: u_k > u_{k−1} (o v) por encima de la holgura numérica
    """
    if not params.shift > 2.0 * params.lam:
        raise ParameterError("shift too small")
    _check_state(state, domain, params.monotone_slack)
    g, h = cfg.source_arrays(domain)
    sl = domain.interior_slices
    u, v = state.u.interior_values, state.v.interior_values
    du, dv, _, slack = _step(u, v, g[sl], h[sl], domain, params, params.linear_for(domain.dim))
    violation = max(du.max(initial=0.0), dv.max(initial=0.0))
    if violation > slack:
        raise CertificateError(
            f"monotonicity violated by {violation:.3e} (numerical tolerance event)",
            {"violation": violation},
        )
    return FieldPair(
        LatticeFunction.from_interior(domain, u + du),
        LatticeFunction.from_interior(domain, v + dv),
    )


def solve_on_box(
    domain: LatticeBox,
    cfg: VortexConfig,
    params: SchemeParams,
) -> Tuple[FieldPair, SolveReport]:
    """
    Iterar el esquema desde (0, 0) hasta ‖u_k − u_{k−1}‖∞ + ‖v_k − v_{k−1}‖∞ ≤ stop_tol.

    Args:
        domain: caja Ω que contiene todos los vórtices en su interior
        cfg: fuentes g, h
        params: λ, L, tolerancias

    Returns:
        (u_Ω, v_Ω) y el SolveReport con los certificados

    Raises:
        VortexError: "source outside Ω"
        ConvergenceError: se alcanzó max_outer o el residuo final no cumple
        CertificateError: violación de monotonía mayor que la holgura
    """
    cfg.check_inside(domain)
    g_full, h_full = cfg.source_arrays(domain)
    sl = domain.interior_slices
    g, h = g_full[sl], h_full[sl]
    B = total_mass_B(cfg)
    lam = params.lam
    linear = params.linear_for(domain.dim)
    collar = domain.collar_mask[sl]

    u = np.zeros(domain.shape)
    v = np.zeros(domain.shape)
    collar_max_u = collar_max_v = 0.0
    max_violation = 0.0
    linear_iters = 0
    diff_u = diff_v = np.inf
    converged = False

    executor = ThreadPoolExecutor(max_workers=2) if params.parallel else None
    try:
        for k in range(1, params.max_outer + 1):
            du, dv, iters, slack = _step(u, v, g, h, domain, params, linear, executor)
            linear_iters += iters
            violation = max(du.max(initial=0.0), dv.max(initial=0.0))
            if violation > slack:
                where = np.unravel_index(int(np.argmax(np.maximum(du, dv))), domain.shape)
                vertex = tuple(int(i) + lo for i, lo in zip(where, domain.lower))
                raise CertificateError(
                    f"monotonicity violated by {violation:.3e} at iteration {k}, vertex {vertex}",
                    {"iteration": k, "vertex": vertex, "violation": violation},
                )
            if violation > 0:
                max_violation = max(max_violation, violation)
            u = u + du
            v = v + dv
            collar_max_u = max(collar_max_u, float(np.abs(u[collar]).sum()))
            collar_max_v = max(collar_max_v, float(np.abs(v[collar]).sum()))
            diff_u = float(np.abs(du).max(initial=0.0))
            diff_v = float(np.abs(dv).max(initial=0.0))
            logger.debug(f"k={k}: ‖δu‖∞={diff_u:.3e} ‖δv‖∞={diff_v:.3e}")
            if diff_u + diff_v <= params.stop_tol:
                converged = True
                break
    finally:
        if executor is not None:
            executor.shutdown()

    if not converged:
        raise ConvergenceError(
            f"monotone scheme did not converge in {params.max_outer} outer iterations "
            f"(last difference {diff_u + diff_v:.3e})",
            {"outer_iters": params.max_outer, "final_diff_u": diff_u, "final_diff_v": diff_v},
        )
    if max_violation > 0:
        logger.warning(f"⚠️ Ruido de monotonía tolerado: {max_violation:.2e}")

    pair = FieldPair(LatticeFunction.from_interior(domain, u), LatticeFunction.from_interior(domain, v))
    ru, rv = nonlinear_residual(pair, cfg, lam)
    fu, fv = flux_defects(pair, cfg, lam)
    if B > 0:
        collar_ok = collar_max_u < B and collar_max_v < B
    else:
        collar_ok = collar_max_u == 0.0 and collar_max_v == 0.0
    report = SolveReport(
        box=domain.describe(),
        lam=lam,
        L=params.shift,
        outer_iters=k,
        final_diff_u=diff_u,
        final_diff_v=diff_v,
        monotone_ok=True,
        max_monotone_violation=max_violation,
        flux_defect_u=fu,
        flux_defect_v=fv,
        flux_tolerance=1e-8 * (lam * domain.size + B),
        residual_u=float(np.abs(ru).max(initial=0.0)),
        residual_v=float(np.abs(rv).max(initial=0.0)),
        residual_tolerance=10.0 * params.stop_tol * (lam + B),
        collar_sum_max_u=collar_max_u,
        collar_sum_max_v=collar_max_v,
        collar_bound_ok=collar_ok,
        mass_balance=mass_balance(pair),
        mass_balance_bound=B / lam,
        linear_iterations=linear_iters,
    )
    if not report.residual_ok:
        raise ConvergenceError(
            f"nonlinear residual {max(report.residual_u, report.residual_v):.3e} "
            f"above {report.residual_tolerance:.3e}",
            {"report": report},
        )
    logger.info(
        f"✅ {domain.describe()} λ={lam:g}: {k} iteraciones, "
        f"residuo {max(report.residual_u, report.residual_v):.2e}, Krylov {linear_iters}"
    )
    return pair, report


# ----------------------------------------------------------------------
# Comparación con subsoluciones
# ----------------------------------------------------------------------
@dataclass
class OrderingCertificate:
    """W ≤ u_Ω y V ≤ v_Ω punto a punto, o el vértice testigo."""
    ordered: bool
    max_excess_u: float
    max_excess_v: float
    witness: Optional[Tuple[int, ...]] = None
    min_subsolution_margin_u: float = 0.0
    min_subsolution_margin_v: float = 0.0


def _argmin_vertex(domain: LatticeBox, values: np.ndarray) -> Tuple[int, ...]:
    where = np.unravel_index(int(np.argmin(values)), values.shape)
    return tuple(int(i) + lo for i, lo in zip(where, domain.lower))


def check_subsupersolution(
    candidate: FieldPair,
    reference: FieldPair,
    cfg: VortexConfig,
    params: SchemeParams,
    domain: LatticeBox,
    slack: float = 1e-9,
) -> OrderingCertificate:
    """
    Comprobar que (W, V) es subsolución y certificar W ≤ u_Ω, V ≤ v_Ω.

    Subsolución: ΔW ≥ λe^V(e^W − 1) + g y ΔV ≥ λe^W(e^V − 1) + h en Ω,
    W ≤ 0 y V ≤ 0 en δΩ (todo con holgura `slack`).

    Raises:
        CertificateError: la desigualdad falla; indica ecuación y vértice
    """
    if candidate.domain != domain or reference.domain != domain:
        raise LatticeError("domain mismatch")
    ru, rv = nonlinear_residual(candidate, cfg, params.lam)
    for name, r in (("W", ru), ("V", rv)):
        if r.min(initial=0.0) < -slack:
            vertex = _argmin_vertex(domain, r)
            raise CertificateError(
                f"candidate is not a subsolution: inequality for {name} fails at {vertex} "
                f"(defect {r.min():.3e})",
                {"equation": name, "vertex": vertex, "defect": float(r.min())},
            )
    for name, f in (("W", candidate.u), ("V", candidate.v)):
        if f.boundary_vector().max(initial=0.0) > slack:
            raise CertificateError(
                f"candidate is not a subsolution: {name} > 0 on δΩ",
                {"equation": name, "defect": float(f.boundary_vector().max())},
            )

    excess_u = candidate.u.values - reference.u.values
    excess_v = candidate.v.values - reference.v.values
    mask = domain.closure_mask
    max_u = float(excess_u[mask].max())
    max_v = float(excess_v[mask].max())
    witness = None
    ordered = max(max_u, max_v) <= slack
    if not ordered:
        worst = excess_u if max_u >= max_v else excess_v
        where = np.unravel_index(int(np.argmax(np.where(mask, worst, -np.inf))), worst.shape)
        witness = tuple(int(i) + lo - 1 for i, lo in zip(where, domain.lower))
        logger.warning(f"⚠️ Subsolución por encima de la solución en {witness}")
    return OrderingCertificate(
        ordered=ordered,
        max_excess_u=max_u,
        max_excess_v=max_v,
        witness=witness,
        min_subsolution_margin_u=float(ru.min(initial=0.0)),
        min_subsolution_margin_v=float(rv.min(initial=0.0)),
    )
