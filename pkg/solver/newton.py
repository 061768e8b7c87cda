"""
Newton amortiguado para el sistema acoplado sobre una caja, independiente
del esquema monótono. Sirve de oráculo en las pruebas y para la sonda de
unicidad (varios puntos de partida).

Incógnitas: valores interiores de (u, v); frontera nula.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres

from solver.errors import ParameterError
from solver.lattice import LatticeBox
from solver.operators import FieldPair, LatticeFunction, laplacian_interior
from solver.vortex_data import VortexConfig

logger = logging.getLogger(__name__)

# Hasta este número de vértices interiores se factoriza el jacobiano denso
DENSE_LIMIT = 300


@dataclass
class NewtonResult:
    pair: Optional[FieldPair]
    converged: bool
    iterations: int
    residual: float
    message: str = ""
    history: List[float] = field(default_factory=list)


def dirichlet_laplacian(domain: LatticeBox) -> sp.csr_matrix:
    """Δ con frontera nula como matriz dispersa (suma de Kronecker de 1D)."""
    ops = [sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(s, s)) for s in domain.shape]
    eyes = [sp.identity(s) for s in domain.shape]
    total = None
    for axis in range(domain.dim):
        factors = [ops[i] if i == axis else eyes[i] for i in range(domain.dim)]
        term = factors[0]
        for f in factors[1:]:
            term = sp.kron(term, f)
        total = term if total is None else total + term
    return total.tocsr()


class _System:
    """F(u, v) y su jacobiano sobre vectores interiores apilados [u; v]."""

    def __init__(self, domain: LatticeBox, cfg: VortexConfig, lam: float):
        self.domain = domain
        self.lam = lam
        self.size = domain.size
        g, h = cfg.source_arrays(domain)
        sl = domain.interior_slices
        self.g = g[sl].reshape(-1)
        self.h = h[sl].reshape(-1)
        self._A = dirichlet_laplacian(domain) if self.size <= DENSE_LIMIT else None

    def split(self, x: np.ndarray):
        return x[: self.size], x[self.size:]

    def residual(self, x: np.ndarray) -> np.ndarray:
        u, v = self.split(x)
        shape = self.domain.shape
        lu = laplacian_interior(u.reshape(shape)).reshape(-1)
        lv = laplacian_interior(v.reshape(shape)).reshape(-1)
        with np.errstate(over="ignore", invalid="ignore"):
            fu = lu - self.lam * np.exp(v) * np.expm1(u) - self.g
            fv = lv - self.lam * np.exp(u) * np.expm1(v) - self.h
        return np.concatenate([fu, fv])

    def _blocks(self, x: np.ndarray):
        u, v = self.split(x)
        with np.errstate(over="ignore", invalid="ignore"):
            diag = self.lam * np.exp(u + v)
            off_u = self.lam * np.exp(v) * np.expm1(u)
            off_v = self.lam * np.exp(u) * np.expm1(v)
        return diag, off_u, off_v

    def direction(self, x: np.ndarray, fx: np.ndarray, rtol: float) -> np.ndarray:
        """Resolver J(x)·δ = −F(x)."""
        diag, off_u, off_v = self._blocks(x)
        if self._A is not None:
            A = self._A
            J = sp.bmat([
                [A - sp.diags(diag), -sp.diags(off_u)],
                [-sp.diags(off_v), A - sp.diags(diag)],
            ]).toarray()
            return scipy.linalg.solve(J, -fx)

        shape = self.domain.shape
        n = self.size

        def matvec(d: np.ndarray) -> np.ndarray:
            du, dv = d[:n], d[n:]
            lu = laplacian_interior(du.reshape(shape)).reshape(-1)
            lv = laplacian_interior(dv.reshape(shape)).reshape(-1)
            return np.concatenate([lu - diag * du - off_u * dv, lv - off_v * du - diag * dv])

        op = LinearOperator((2 * n, 2 * n), matvec=matvec, dtype=float)
        d, info = gmres(op, -fx, rtol=rtol, restart=100, maxiter=50)
        if info != 0:
            logger.debug(f"GMRES sin converger (info={info})")
        return d


def newton_solve(
    domain: LatticeBox,
    cfg: VortexConfig,
    lam: float,
    start: Optional[FieldPair] = None,
    tol: float = 1e-12,
    max_iter: int = 60,
    label: str = "zero",
) -> NewtonResult:
    """
    Newton con búsqueda lineal por retroceso en norma del máximo del residuo.

    Args:
        domain: caja Ω (todos los vórtices en su interior)
        cfg: fuentes
        lam: λ > 0
        start: par inicial (solo se usan sus valores interiores); cero si None
        tol: objetivo ‖F‖∞
        max_iter: tope de iteraciones
        label: nombre del punto de partida para el log

    Returns:
        NewtonResult; la divergencia se registra (converged=False), no se lanza
    """
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    cfg.check_inside(domain)
    system = _System(domain, cfg, lam)
    if start is None:
        x = np.zeros(2 * system.size)
    else:
        if start.domain != domain:
            start = FieldPair(_transplant(start.u, domain), _transplant(start.v, domain))
        x = np.concatenate([start.u.interior_vector(), start.v.interior_vector()])

    fx = system.residual(x)
    norm = float(np.abs(fx).max(initial=0.0))
    history = [norm]
    message = "max iterations reached"
    for it in range(1, max_iter + 1):
        if norm <= tol:
            message = "converged"
            break
        if not np.isfinite(norm):
            message = "non-finite residual"
            break
        d = system.direction(x, fx, rtol=min(1e-2, max(1e-14, norm * 1e-3)))
        t = 1.0
        while t >= 2.0 ** -30:
            trial = x + t * d
            ft = system.residual(trial)
            trial_norm = float(np.abs(ft).max(initial=0.0))
            if np.isfinite(trial_norm) and trial_norm < (1.0 - 1e-4 * t) * norm:
                break
            t *= 0.5
        else:
            message = "line search failed"
            break
        x, fx, norm = trial, ft, trial_norm
        history.append(norm)
        logger.debug(f"Newton[{label}] it={it} paso={t:g} ‖F‖∞={norm:.3e}")

    converged = norm <= tol
    if converged:
        message = "converged"
    u, v = system.split(x)
    pair = FieldPair(
        LatticeFunction.from_interior(domain, u),
        LatticeFunction.from_interior(domain, v),
    ) if np.all(np.isfinite(x)) else None
    if converged:
        logger.info(f"✅ Newton[{label}] {domain.describe()}: {len(history) - 1} pasos, ‖F‖∞={norm:.2e}")
    else:
        logger.warning(f"⚠️ Newton[{label}] no convergió: {message} (‖F‖∞={norm:.2e})")
    return NewtonResult(pair, converged, len(history) - 1, norm, message, history)


def _transplant(f: LatticeFunction, domain: LatticeBox) -> LatticeFunction:
    """Llevar un punto de partida a la caja del solve (restricción o extensión nula)."""
    if domain.is_subbox(f.domain):
        return f.restrict(domain)
    if f.domain.is_subbox(domain):
        return f.extend_by_zero(domain)
    raise ParameterError("start field does not overlap the solve domain")
