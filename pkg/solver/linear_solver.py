"""
Resolución de (Δ − L)w = f en el interior de una caja con w = 0 en δΩ.

−(Δ − L) es simétrico definido positivo con autovalores en [L, L + 4n],
así que un Krylov sin precondicionar (gradiente conjugado) converge rápido.
El operador se aplica sin ensamblar (stencil) a través de un
`scipy.sparse.linalg.LinearOperator`.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg, minres

from solver.errors import ConvergenceError, ParameterError
from solver.lattice import LatticeBox
from solver.operators import LatticeFunction, laplacian_interior, laplacian_padded

logger = logging.getLogger(__name__)

METHODS = {"cg": cg, "minres": minres}

# Reinicios desde el último iterado si el residuo verdadero no cumple
MAX_RESTARTS = 3


@dataclass(frozen=True)
class SolverParams:
    """Parámetros del solver lineal."""
    tol: float = 1e-10
    max_iter: Optional[int] = None  # por defecto 10·|Ω|
    method: str = "cg"

    def __post_init__(self):
        if not self.tol > 0:
            raise ParameterError(f"tol must be positive, got {self.tol}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ParameterError(f"max_iter must be ≥ 1, got {self.max_iter}")
        if self.method not in METHODS:
            raise ParameterError(f"unknown linear method '{self.method}'")

    def iteration_cap(self, size: int) -> int:
        return self.max_iter if self.max_iter is not None else 10 * size


@dataclass(frozen=True)
class LinearSolveInfo:
    iterations: int
    residual: float
    rhs_norm: float
    restarts: int = 0


def shifted_operator(domain: LatticeBox, L: float) -> LinearOperator:
    """−(Δ − L) con frontera nula, como operador sin matriz sobre vectores de Ω."""
    shape = domain.shape
    size = domain.size

    def matvec(x: np.ndarray) -> np.ndarray:
        w = np.asarray(x, dtype=float).reshape(shape)
        return (L * w - laplacian_interior(w)).reshape(-1)

    return LinearOperator((size, size), matvec=matvec, rmatvec=matvec, dtype=float)


def _solve_spd(domain: LatticeBox, L: float, rhs: np.ndarray, params: SolverParams):
    """Resolver −(Δ − L)w = rhs (L ≥ 0) partiendo de cero."""
    b = np.asarray(rhs, dtype=float).reshape(-1)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(domain.shape), LinearSolveInfo(0, 0.0, 0.0)

    op = shifted_operator(domain, L)
    method = METHODS[params.method]
    cap = params.iteration_cap(domain.size)
    counter = {"iterations": 0}

    def callback(_):
        counter["iterations"] += 1

    x = np.zeros_like(b)
    residual = np.inf
    for restart in range(MAX_RESTARTS + 1):
        x, info = method(op, b, x0=x, rtol=params.tol, maxiter=cap, callback=callback)
        residual = float(np.linalg.norm(op.matvec(x) - b))
        if residual <= params.tol * b_norm or info > 0:
            break
        logger.debug(f"Reinicio {restart + 1}: residuo verdadero {residual:.3e}")
    if residual > params.tol * b_norm:
        raise ConvergenceError(
            f"linear solve did not converge: residual {residual:.3e} > {params.tol:.1e}·‖f‖ "
            f"after {counter['iterations']} iterations",
            {"residual": residual, "rhs_norm": b_norm, "iterations": counter["iterations"]},
        )
    info = LinearSolveInfo(counter["iterations"], residual, b_norm, restart)
    logger.debug(f"Krylov {params.method}: {info.iterations} iteraciones, residuo {residual:.2e}")
    return x.reshape(domain.shape), info


def _interior_array(domain: LatticeBox, f: Union[LatticeFunction, np.ndarray]) -> np.ndarray:
    if isinstance(f, LatticeFunction):
        if f.domain != domain:
            raise ParameterError("right-hand side lives on a different domain")
        return f.interior_values
    return np.asarray(f, dtype=float).reshape(domain.shape)


def solve_shifted_with_info(domain: LatticeBox, L: float, f, params: SolverParams = SolverParams()):
    """Como solve_shifted pero devuelve también LinearSolveInfo."""
    if not L > 0:
        raise ParameterError(f"shift L must be positive, got {L}")
    rhs = _interior_array(domain, f)
    # (Δ − L)w = f  ⇔  −(Δ − L)w = −f
    w, info = _solve_spd(domain, L, -rhs, params)
    return LatticeFunction.from_interior(domain, w), info


def solve_shifted(domain: LatticeBox, L: float, f, params: SolverParams = SolverParams()) -> LatticeFunction:
    """
    Resolver (Δ − L)w = f en Ω con w = 0 en δΩ.

    Args:
        domain: caja Ω
        L: desplazamiento, L > 0
        f: lado derecho sobre Ω (LatticeFunction o arreglo con la forma del interior)
        params: tolerancia relativa, tope de iteraciones y método

    Returns:
        w con ‖(Δ − L)w − f‖₂ ≤ tol·‖f‖₂

    Raises:
        ConvergenceError: no converge dentro de max_iter
    """
    w, _ = solve_shifted_with_info(domain, L, f, params)
    return w


def solve_poisson_dirichlet(
    domain: LatticeBox,
    f,
    boundary: Optional[LatticeFunction] = None,
    params: SolverParams = SolverParams(),
) -> LatticeFunction:
    """
    Resolver Δw = f en Ω con w = b en δΩ (caso L = 0).

    −Δ con datos de Dirichlet es definido positivo sobre un Ω finito, de modo
    que se reutiliza el mismo Krylov.
    """
    rhs = _interior_array(domain, f)
    bvals = np.zeros(domain.padded_shape) if boundary is None else boundary.values.copy()
    bvals[domain.interior_slices] = 0.0
    # Δw = Δ₀w_int + (vecinos en δΩ)  ⇒  −Δ₀w_int = −f + Δ(b)|_Ω
    lifted = laplacian_padded(bvals)
    w, _ = _solve_spd(domain, 0.0, lifted - rhs, params)
    values = bvals
    values[domain.interior_slices] = w
    return LatticeFunction(domain, values)
