"""
Función de Green del retículo ℤⁿ (n ≥ 3):

    G_n(x) = −1/(2π)ⁿ ∫_{[−π,π]ⁿ} e^{iz·x} / (2n − 2 Σ cos z_j) dz,

la única solución de ΔG = δ₀ que tiende a 0 en el infinito.

Por paridad la integral se pliega a [0, π]ⁿ con integrando
Π cos(z_j x_j) / Σ 4 sin²(z_j/2). La regla del punto medio evita la
singularidad en z = 0; su error es una serie en h^{n−2}, hⁿ, h^{n+2}, …
(singularidad homogénea de grado −2), que se elimina por Richardson con
tres rejillas M, 2M, 4M. Para n ≥ 7 se usa Monte Carlo.
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from scipy.special import gamma

from config import settings
from solver.errors import CertificateError, LatticeError, ParameterError
from solver.lattice import LatticeBox, as_point
from solver.linear_solver import SolverParams, solve_poisson_dirichlet
from solver.operators import LatticeFunction, laplacian_padded
from solver.utils import fail, new_certificate, write_csv_atomic
from solver.vortex_data import FOUR_PI, VortexConfig

logger = logging.getLogger(__name__)

# Rejilla base por dimensión (puntos por eje en [0, π])
BASE_POINTS = {3: 32, 4: 16, 5: 8, 6: 4}

# Tamaño máximo del bloque interior evaluado de una vez
CHUNK_ELEMENTS = 2 ** 21

MC_CHUNK = 2 ** 18

DEFAULT_BOX_RADII = (8, 12, 16)


class GreenMethod(str, Enum):
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte_carlo"
    BOX = "box"


@dataclass(frozen=True)
class GreenValue:
    """Valor de G_n en un representante de su clase de simetría."""
    dim: int
    point: Tuple[int, ...]
    value: float
    err_est: float
    method: GreenMethod
    points: int = 0
    imaginary: float = 0.0


def symmetry_class(x: Sequence[int]) -> Tuple[int, ...]:
    """Clase hiperoctaédrica: |x_i| ordenados."""
    return tuple(sorted(abs(int(c)) for c in x))


def _check_green_dim(n: int) -> None:
    if n <= 2:
        raise ParameterError("Green's function with zero limit exists only for n ≥ 3")
    if n > settings.MAX_DIM:
        raise ParameterError(f"dimension {n} above LCS_MAX_DIM={settings.MAX_DIM}")


# ----------------------------------------------------------------------
# Cuadratura tensorial
# ----------------------------------------------------------------------
def _midpoint_mean(n: int, x: Tuple[int, ...], M: int) -> float:
    """
    −media de Π cos(z_j x_j)/D(z) sobre la rejilla de puntos medios de [0, π]ⁿ.

    Las dimensiones interiores se tabulan una vez (producto exterior); las
    exteriores se recorren en un bucle.
    """
    z = (np.arange(M) + 0.5) * (math.pi / M)
    s = 4.0 * np.sin(0.5 * z) ** 2
    cos_tables = [np.cos(z * xj) for xj in x]

    k = 1
    while k < n and M ** (k + 1) <= CHUNK_ELEMENTS:
        k += 1
    outer = n - k
    s_in = s
    c_in = cos_tables[outer]
    for j in range(outer + 1, n):
        s_in = np.add.outer(s_in, s)
        c_in = np.multiply.outer(c_in, cos_tables[j])

    total = 0.0
    for idx in itertools.product(range(M), repeat=outer):
        s_out = sum(s[i] for i in idx)
        c_out = 1.0
        for j, i in enumerate(idx):
            c_out *= cos_tables[j][i]
        if c_out == 0.0:
            continue
        total += c_out * float(np.sum(c_in / (s_out + s_in)))
    return -total / float(M) ** n


def _imaginary_part(n: int, x: Tuple[int, ...], M: int) -> float:
    """Parte imaginaria sobre la rejilla simétrica completa de [−π, π]ⁿ (2M puntos por eje)."""
    if not any(x):
        return 0.0
    z = -math.pi + (np.arange(2 * M) + 0.5) * (math.pi / M)
    s = 4.0 * np.sin(0.5 * z) ** 2
    phase = z * x[0]
    denom = s
    for xj in x[1:]:
        phase = np.add.outer(phase, z * xj)
        denom = np.add.outer(denom, s)
    return abs(float(np.mean(np.sin(phase) / denom)))


def _richardson(n: int, q1: float, q2: float, q3: float) -> Tuple[float, float]:
    """Eliminar h^{n−2} y hⁿ; el error estimado es el salto del último paso."""
    a = 2.0 ** (n - 2)
    b = 2.0 ** n
    r1a = (a * q2 - q1) / (a - 1.0)
    r1b = (a * q3 - q2) / (a - 1.0)
    r2 = (b * r1b - r1a) / (b - 1.0)
    return r2, abs(r2 - r1b)


def _quadrature(n: int, x: Tuple[int, ...], tol: float) -> GreenValue:
    M = BASE_POINTS[n]
    imaginary = _imaginary_part(n, x, M)
    if imaginary > tol:
        raise CertificateError(
            f"imaginary part {imaginary:.3e} of the Green integral exceeds tol {tol:.1e}",
            {"dim": n, "point": x},
        )
    q = {m: _midpoint_mean(n, x, m) for m in (M, 2 * M, 4 * M)}
    while True:
        value, err = _richardson(n, q[M], q[2 * M], q[4 * M])
        if err <= tol:
            break
        if (8 * M) ** n > settings.GREEN_MAX_POINTS:
            logger.warning(
                f"⚠️ G_{n}{x}: tolerancia {tol:.1e} no alcanzada (err≈{err:.1e}); "
                f"límite de rejilla LCS_GREEN_MAX_POINTS"
            )
            break
        M *= 2
        q[4 * M] = _midpoint_mean(n, x, 4 * M)
    return GreenValue(n, x, value, err, GreenMethod.QUADRATURE, points=4 * M, imaginary=imaginary)


def _monte_carlo(n: int, x: Tuple[int, ...], tol: float, samples: int, seed: int) -> GreenValue:
    """Estimador de la integral con z uniforme en [−π, π]ⁿ; err = 3σ/√N."""
    rng = np.random.default_rng(seed)
    xv = np.asarray(x, dtype=float)
    sums = np.zeros(2)
    squares = np.zeros(2)
    done = 0
    while done < samples:
        m = min(MC_CHUNK, samples - done)
        z = rng.uniform(-math.pi, math.pi, size=(m, n))
        denom = np.sum(4.0 * np.sin(0.5 * z) ** 2, axis=1)
        phase = z @ xv
        re = np.cos(phase) / denom
        im = np.sin(phase) / denom
        sums += (re.sum(), im.sum())
        squares += ((re * re).sum(), (im * im).sum())
        done += m
    mean = sums / samples
    std = np.sqrt(np.maximum(squares / samples - mean ** 2, 0.0))
    err = 3.0 * std / math.sqrt(samples)
    imaginary = abs(float(mean[1]))
    if imaginary > err[1] + tol:
        raise CertificateError(
            f"imaginary part {imaginary:.3e} of the Green integral exceeds its error bar",
            {"dim": n, "point": x},
        )
    if err[0] > tol:
        logger.info(f"🎲 G_{n}{x}: Monte Carlo con err≈{err[0]:.1e} (> tol {tol:.1e})")
    return GreenValue(n, x, -float(mean[0]), float(err[0]), GreenMethod.MONTE_CARLO,
                      points=samples, imaginary=imaginary)


@lru_cache(maxsize=None)
def _green_class(n: int, key: Tuple[int, ...], tol: float, seed: int, samples: int) -> GreenValue:
    if n in BASE_POINTS:
        return _quadrature(n, key, tol)
    return _monte_carlo(n, key, tol, samples, seed)


def green_value(
    n: int,
    x: Sequence[int],
    tol: Optional[float] = None,
    seed: Optional[int] = None,
    samples: Optional[int] = None,
) -> GreenValue:
    """
    G_n(x) con estimación de error.

    Args:
        n: dimensión, n ≥ 3
        x: punto del retículo
        tol: tolerancia objetivo (LCS_GREEN_TOL por defecto)
        seed: semilla del Monte Carlo (n ≥ 7)
        samples: muestras del Monte Carlo

    Returns:
        GreenValue del representante |x_i| ordenado (cacheado por clase)

    Raises:
        ParameterError: n ≤ 2
        CertificateError: parte imaginaria mayor que tol
    """
    _check_green_dim(n)
    x = as_point(x)
    if len(x) != n:
        raise LatticeError(f"point {x} does not have dimension {n}")
    tol = settings.GREEN_TOL if tol is None else float(tol)
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    seed = settings.SEED if seed is None else int(seed)
    samples = settings.MC_SAMPLES if samples is None else int(samples)
    return _green_class(n, symmetry_class(x), tol, seed, samples)


def box_green_value(
    n: int,
    x: Sequence[int],
    radii: Sequence[int] = DEFAULT_BOX_RADII,
    params: SolverParams = SolverParams(tol=1e-12),
) -> GreenValue:
    """
    Oráculo de caja: Δw_R = δ₀ en {|x_i| ≤ R}, w_R = 0 en δΩ, y extrapolación
    en ρ = R + 1 con la base 1, ρ^{−(n−2)}, ρ^{−(n−1)}.

    err_est: mayor salto entre el ajuste de 3 términos y los de 2 términos.
    """
    _check_green_dim(n)
    x = as_point(x)
    radii = sorted(int(r) for r in radii)
    if len(radii) != 3:
        raise ParameterError("box extrapolation needs exactly three radii")
    samples = []
    for R in radii:
        box = LatticeBox.cube(n, R)
        if not box.contains(x):
            raise LatticeError(f"point {x} outside box of radius {R}")
        source = np.zeros(box.shape)
        source[tuple(R for _ in range(n))] = 1.0
        w = solve_poisson_dirichlet(box, source, params=params)
        samples.append(w.at(x))
        logger.debug(f"caja R={R}: w(x)={samples[-1]:.12f}")
    rho = np.array(radii, dtype=float) + 1.0
    y = np.array(samples)
    basis = np.column_stack([np.ones(3), rho ** -(n - 2), rho ** -(n - 1)])
    full = np.linalg.solve(basis, y)[0]
    two_hi = np.linalg.solve(basis[1:, :2], y[1:])[0]
    two_lo = np.linalg.solve(basis[:2, :2], y[:2])[0]
    err = max(abs(full - two_hi), abs(two_hi - two_lo))
    return GreenValue(n, symmetry_class(x), float(full), float(err), GreenMethod.BOX, points=radii[-1])


# ----------------------------------------------------------------------
# Tablas
# ----------------------------------------------------------------------
@dataclass
class GreenTable:
    """G_n sobre las clases de simetría de una ventana centrada en el origen."""
    dim: int
    entries: Dict[Tuple[int, ...], GreenValue] = field(default_factory=dict)
    window: Optional[LatticeBox] = None

    def value(self, x: Sequence[int]) -> float:
        return self.entry(x).value

    def entry(self, x: Sequence[int]) -> GreenValue:
        key = symmetry_class(x)
        if key not in self.entries:
            raise LatticeError(f"point {tuple(x)} not tabulated")
        return self.entries[key]

    def field_on(self, box: LatticeBox, shift: Optional[Sequence[int]] = None) -> Tuple[LatticeFunction, LatticeFunction]:
        """(G(x − shift), err(x − shift)) sobre Ω̄ de una caja."""
        shift = np.zeros(self.dim, dtype=int) if shift is None else np.asarray(shift, dtype=int)
        values = np.zeros(box.padded_shape)
        errors = np.zeros(box.padded_shape)
        coords = box.padded_coords
        for idx in zip(*np.nonzero(box.closure_mask)):
            e = self.entry(coords[idx] - shift)
            values[idx] = e.value
            errors[idx] = e.err_est
        return LatticeFunction(box, values), LatticeFunction(box, errors)

    def stencil_defects(self) -> Tuple[np.ndarray, np.ndarray]:
        """ΔG − δ₀ en los vértices interiores de la ventana y la cota Σ|coef|·err."""
        if self.window is None:
            raise LatticeError("table has no window")
        g, e = self.field_on(self.window)
        defect = laplacian_padded(g.values)
        origin = self.window.padded_index((0,) * self.dim)
        defect[tuple(i - 1 for i in origin)] -= 1.0
        bound = laplacian_padded(e.values) + 4.0 * self.dim * e.interior_values
        return defect, bound

    def certificate(self) -> Dict:
        cert = new_certificate()
        values = {k: v.value for k, v in self.entries.items()}
        errs = {k: v.err_est for k, v in self.entries.items()}
        positive = [k for k, v in values.items() if v > errs[k]]
        if positive:
            fail(cert, f"positive Green values at classes {positive}")
        origin = (0,) * self.dim
        if origin in values:
            above = [k for k, v in values.items() if v < values[origin] - errs[k] - errs[origin]]
            if above:
                fail(cert, f"G_n(0) is not the minimum: {above}")
        if self.window is not None:
            defect, bound = self.stencil_defects()
            worst = float(np.max(np.abs(defect) - 10.0 * bound))
            if worst > 0:
                fail(cert, f"stencil identity ΔG = δ₀ off by {worst:.3e} beyond 10× error estimates")
            cert["stats"]["max_stencil_defect"] = float(np.abs(defect).max())
        cert["stats"]["entries"] = len(self.entries)
        return cert

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "n": self.dim,
                "x": ";".join(str(c) for c in key),
                "value": entry.value,
                "err_est": entry.err_est,
            }
            for key, entry in sorted(self.entries.items())
        ]
        return pd.DataFrame(rows, columns=["n", "x", "value", "err_est"])

    def to_csv(self, path: Path) -> Path:
        return write_csv_atomic(self.to_frame(), path)


def _classes(points: Iterable[Sequence[int]]) -> List[Tuple[int, ...]]:
    return sorted({symmetry_class(p) for p in points})


def _tabulate(
    n: int,
    keys: List[Tuple[int, ...]],
    tol: Optional[float],
    workers: int,
    seed: Optional[int] = None,
    samples: Optional[int] = None,
) -> Dict[Tuple[int, ...], GreenValue]:
    if workers > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(lambda k: green_value(n, k, tol, seed, samples), keys))
    else:
        values = [green_value(n, k, tol, seed, samples) for k in keys]
    return dict(zip(keys, values))


def build_green_table(
    n: int,
    radius: int,
    tol: Optional[float] = None,
    workers: Optional[int] = None,
    seed: Optional[int] = None,
    samples: Optional[int] = None,
) -> GreenTable:
    """Tabular G_n sobre Ω̄ de la caja {|x_i| ≤ radius}, una vez por clase de simetría."""
    _check_green_dim(n)
    window = LatticeBox.cube(n, radius)
    workers = settings.WORKERS if workers is None else int(workers)
    keys = _classes(window.closure)
    logger.info(f"🧮 Tabulando G_{n} en radio {radius}: {len(keys)} clases de simetría")
    table = GreenTable(dim=n, entries=_tabulate(n, keys, tol, workers, seed, samples), window=window)
    return table


def green_combination(
    cfg: VortexConfig,
    which: str,
    window: LatticeBox,
    tol: Optional[float] = None,
    workers: Optional[int] = None,
) -> LatticeFunction:
    """
    ψ_n(x) = 4π Σ m_j G_n(x − p_j) (which="u") o η_n con (n_j, q_j) (which="v"),
    sobre Ω̄ de la ventana.
    """
    n = cfg.dim
    _check_green_dim(n)
    if which not in ("u", "v"):
        raise ParameterError(f"which must be 'u' or 'v', got {which!r}")
    vortices = cfg.u_vortices if which == "u" else cfg.v_vortices
    result = LatticeFunction.zeros(window)
    if not vortices:
        return result
    workers = settings.WORKERS if workers is None else int(workers)
    coords = window.closure
    keys = _classes(c - np.asarray(p) for p, _ in vortices for c in coords)
    table = GreenTable(dim=n, entries=_tabulate(n, keys, tol, workers))
    for p, m in vortices:
        g, _ = table.field_on(window, shift=p)
        result = result + g * (FOUR_PI * m)
    return result


# ----------------------------------------------------------------------
# Barrido en dimensión
# ----------------------------------------------------------------------
def green_sup_bound(n: int) -> float:
    """
    min_{l>0} l^{n−2}/((n−2)·2^{n+1}·π^{n/2−2}·Γ(n/2)) + π²/(4l²).
    """
    if n < 3:
        raise ParameterError("Green's function with zero limit exists only for n ≥ 3")
    denom = (n - 2) * 2.0 ** (n + 1) * math.pi ** (n / 2.0 - 2.0) * gamma(n / 2.0)

    def bound(l: float) -> float:
        return l ** (n - 2) / denom + math.pi ** 2 / (4.0 * l * l)

    result = minimize_scalar(bound, bounds=(1e-3, 1e3), method="bounded", options={"xatol": 1e-10})
    return float(result.fun)


def return_probability(n: int, tol: Optional[float] = None) -> float:
    """Probabilidad de retorno del paseo aleatorio simple: 1 − 1/(2n|G_n(0)|)."""
    g0 = green_value(n, (0,) * n, tol)
    return 1.0 - 1.0 / (2.0 * n * abs(g0.value))


@dataclass(frozen=True)
class SupNormRow:
    dim: int
    sup_norm: float
    err_est: float
    method: GreenMethod
    bound: float
    lower: float
    return_probability: float


def green_sup_norm_sweep(
    dims: Sequence[int],
    tol: Optional[float] = None,
    seed: Optional[int] = None,
    samples: Optional[int] = None,
) -> List[SupNormRow]:
    """‖G_n‖∞ = |G_n(0)| para cada n, con la cota superior y la inferior 1/(2n)."""
    rows = []
    for n in dims:
        g0 = green_value(n, (0,) * n, tol, seed, samples)
        sup = abs(g0.value)
        rows.append(SupNormRow(
            dim=n,
            sup_norm=sup,
            err_est=g0.err_est,
            method=g0.method,
            bound=green_sup_bound(n),
            lower=1.0 / (2.0 * n),
            return_probability=1.0 - 1.0 / (2.0 * n * sup),
        ))
        logger.info(f"📊 n={n}: |G_n(0)|={sup:.7f} ± {g0.err_est:.1e} ({g0.method.value})")
    return rows


def check_sup_norm_sweep(rows: Sequence[SupNormRow]) -> Dict:
    """Decrecimiento estricto, cota superior y cota inferior 1/(2n)."""
    cert = new_certificate()
    ordered = sorted(rows, key=lambda r: r.dim)
    for a, b in zip(ordered, ordered[1:]):
        if not b.sup_norm < a.sup_norm:
            fail(cert, f"|G_{b.dim}(0)| = {b.sup_norm:.6f} not below |G_{a.dim}(0)| = {a.sup_norm:.6f}")
    for r in ordered:
        if r.sup_norm > r.bound:
            fail(cert, f"|G_{r.dim}(0)| = {r.sup_norm:.6f} above bound {r.bound:.6f}")
        if r.sup_norm < r.lower - r.err_est:
            fail(cert, f"|G_{r.dim}(0)| = {r.sup_norm:.6f} below 1/(2n) = {r.lower:.6f}")
    cert["stats"] = {f"n{r.dim}": r.sup_norm for r in ordered}
    return cert


def sweep_frame(rows: Sequence[SupNormRow]) -> pd.DataFrame:
    return pd.DataFrame([
        {
            "n": r.dim,
            "sup_norm": r.sup_norm,
            "err_est": r.err_est,
            "method": r.method.value,
            "bound": r.bound,
            "lower": r.lower,
            "return_probability": r.return_probability,
        }
        for r in rows
    ])
