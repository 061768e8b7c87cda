"""
Operadores sobre funciones del retículo: Laplaciano discreto
Δu(x) = Σ_{y∼x}(u(y) − u(x)), el operador desplazado (Δ − L), la forma de
Dirichlet D_Ω y la derivada normal ∂/∂n̄.

Todo se aplica sin ensamblar matrices: evaluación del stencil con
rebanadas de numpy sobre la rejilla acolchada de Ω̄.
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from solver.errors import LatticeError, ParameterError
from solver.lattice import LatticeBox

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class LatticeFunction:
    """
    Función real sobre Ω̄, almacenada en la rejilla acolchada de la caja.
    Los valores de frontera se guardan explícitamente; las esquinas de la
    rejilla (fuera de Ω̄) valen siempre 0.
    """
    domain: LatticeBox
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.domain.padded_shape:
            raise LatticeError(f"values shape {values.shape} != {self.domain.padded_shape}")
        self.values = np.where(self.domain.closure_mask, values, 0.0)

    @classmethod
    def zeros(cls, domain: LatticeBox) -> "LatticeFunction":
        return cls(domain, np.zeros(domain.padded_shape))

    @classmethod
    def from_interior(cls, domain: LatticeBox, interior: np.ndarray) -> "LatticeFunction":
        """Valores interiores dados (forma domain.shape), frontera nula."""
        values = np.zeros(domain.padded_shape)
        values[domain.interior_slices] = np.asarray(interior, dtype=float).reshape(domain.shape)
        return cls(domain, values)

    @classmethod
    def from_callable(cls, domain: LatticeBox, func) -> "LatticeFunction":
        """Evaluar func(coords) (coords de forma (..., n)) sobre Ω̄."""
        return cls(domain, func(domain.padded_coords))

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.domain.interior_slices]

    def interior_vector(self) -> np.ndarray:
        """Valores sobre Ω en orden lexicográfico."""
        return self.interior_values.reshape(-1).copy()

    def boundary_vector(self) -> np.ndarray:
        """Valores sobre δΩ en orden lexicográfico."""
        return self.values[self.domain.boundary_mask]

    def closure_vector(self) -> np.ndarray:
        return self.values[self.domain.closure_mask]

    def at(self, point: Sequence[int]) -> float:
        return float(self.values[self.domain.padded_index(point)])

    def copy(self) -> "LatticeFunction":
        return LatticeFunction(self.domain, self.values.copy())

    def with_zero_boundary(self) -> "LatticeFunction":
        return LatticeFunction.from_interior(self.domain, self.interior_values)

    def restrict(self, window: LatticeBox) -> "LatticeFunction":
        """Restricción a Ω̄_w ⊂ Ω̄ de una subcaja."""
        if not window.is_subbox(self.domain):
            raise LatticeError(f"window {window.describe()} not inside {self.domain.describe()}")
        offset = [wl - dl for wl, dl in zip(window.lower, self.domain.lower)]
        index = tuple(slice(o, o + s) for o, s in zip(offset, window.padded_shape))
        return LatticeFunction(window, self.values[index].copy())

    def extend_by_zero(self, bigger: LatticeBox) -> "LatticeFunction":
        """Extensión nula a una caja mayor (ũ del agotamiento)."""
        if not self.domain.is_subbox(bigger):
            raise LatticeError(f"{self.domain.describe()} not inside {bigger.describe()}")
        values = np.zeros(bigger.padded_shape)
        offset = [sl - bl for sl, bl in zip(self.domain.lower, bigger.lower)]
        index = tuple(slice(o, o + s) for o, s in zip(offset, self.domain.padded_shape))
        values[index] = self.values
        return LatticeFunction(bigger, values)

    def to_frame(self, name: str = "value", region: str = "closure") -> pd.DataFrame:
        """Filas x1..xn, valor (orden lexicográfico)."""
        mask = {
            "closure": self.domain.closure_mask,
            "interior": self.domain.interior_mask,
            "boundary": self.domain.boundary_mask,
        }[region]
        coords = self.domain.padded_coords[mask]
        frame = pd.DataFrame(coords, columns=[f"x{i + 1}" for i in range(self.domain.dim)])
        frame[name] = self.values[mask]
        return frame

    def __add__(self, other: "LatticeFunction") -> "LatticeFunction":
        _same_domain(self, other)
        return LatticeFunction(self.domain, self.values + other.values)

    def __sub__(self, other: "LatticeFunction") -> "LatticeFunction":
        _same_domain(self, other)
        return LatticeFunction(self.domain, self.values - other.values)

    def __mul__(self, scalar: float) -> "LatticeFunction":
        return LatticeFunction(self.domain, self.values * float(scalar))

    __rmul__ = __mul__


@dataclass(eq=False)
class FieldPair:
    """Par (u, v) con dominio común."""
    u: LatticeFunction
    v: LatticeFunction

    def __post_init__(self):
        _same_domain(self.u, self.v)

    @property
    def domain(self) -> LatticeBox:
        return self.u.domain

    @classmethod
    def zeros(cls, domain: LatticeBox) -> "FieldPair":
        return cls(LatticeFunction.zeros(domain), LatticeFunction.zeros(domain))

    def restrict(self, window: LatticeBox) -> "FieldPair":
        return FieldPair(self.u.restrict(window), self.v.restrict(window))

    def to_frame(self, region: str = "closure") -> pd.DataFrame:
        """Formato CSV del proyecto: x1..xn, u, v."""
        frame = self.u.to_frame("u", region)
        frame["v"] = self.v.to_frame("v", region)["v"].to_numpy()
        return frame


def _same_domain(f: LatticeFunction, g: LatticeFunction) -> None:
    if f.domain != g.domain:
        raise LatticeError("domain mismatch")


def _axis_slices(dim: int, axis: int, sl: slice, inner: Sequence[slice]) -> tuple:
    index = list(inner)
    index[axis] = sl
    return tuple(index)


# ----------------------------------------------------------------------
# Laplaciano
# ----------------------------------------------------------------------
def laplacian_padded(values: np.ndarray) -> np.ndarray:
    """Δ sobre los puntos interiores de un arreglo acolchado (usa su capa externa)."""
    dim = values.ndim
    center = tuple(slice(1, -1) for _ in range(dim))
    result = -2.0 * dim * values[center]
    for axis in range(dim):
        result = result + values[_axis_slices(dim, axis, slice(2, None), center)]
        result = result + values[_axis_slices(dim, axis, slice(None, -2), center)]
    return result


def laplacian_interior(w: np.ndarray) -> np.ndarray:
    """Δw con w = 0 en δΩ; w tiene la forma del interior."""
    return laplacian_padded(np.pad(w, 1))


def laplacian_field(f: LatticeFunction) -> np.ndarray:
    """Δf en todos los vértices interiores (forma domain.shape)."""
    return laplacian_padded(f.values)


def laplacian(f: LatticeFunction, x: Sequence[int]) -> float:
    """
    Δf(x) = Σ_{y∼x}(f(y) − f(x)) en un vértice interior.

    Raises:
        LatticeError: x fuera de Ω (el stencil saldría de Ω̄)
    """
    domain = f.domain
    if not domain.contains(x):
        raise LatticeError("stencil outside domain", {"point": tuple(x)})
    idx = domain.padded_index(x)
    total = 0.0
    for axis in range(domain.dim):
        for step in (-1, 1):
            nb = list(idx)
            nb[axis] += step
            total += f.values[tuple(nb)] - f.values[idx]
    return float(total)


def apply_shifted(f: LatticeFunction, L: float) -> LatticeFunction:
    """(Δ − L)f evaluado en cada vértice interior (frontera del resultado nula)."""
    if L <= 0:
        raise ParameterError(f"shift L must be positive, got {L}")
    result = laplacian_field(f) - L * f.interior_values
    return LatticeFunction.from_interior(f.domain, result)


# ----------------------------------------------------------------------
# Frontera: derivada normal y forma de Dirichlet
# ----------------------------------------------------------------------
def normal_derivative(f: LatticeFunction, x: Sequence[int]) -> float:
    """∂f/∂n̄(x) = Σ_{y∈Ω, y∼x}(f(x) − f(y)) para x ∈ δΩ."""
    domain = f.domain
    if not domain.in_boundary(x):
        raise LatticeError("point not in boundary δΩ", {"point": tuple(x)})
    idx = domain.padded_index(x)
    total = 0.0
    for axis in range(domain.dim):
        for step in (-1, 1):
            nb = list(idx)
            nb[axis] += step
            nb = tuple(nb)
            if 0 <= nb[axis] < domain.padded_shape[axis] and domain.interior_mask[nb]:
                total += f.values[idx] - f.values[nb]
    return float(total)


def normal_derivative_field(f: LatticeFunction) -> np.ndarray:
    """∂f/∂n̄ sobre la rejilla acolchada (no nulo solo en δΩ)."""
    domain = f.domain
    result = np.zeros(domain.padded_shape)
    inner = domain.interior_slices
    # En una caja cada vértice de δΩ tiene un único vecino en Ω
    for axis in range(domain.dim):
        for outer, neighbor in ((0, 1), (-1, -2)):
            face = _axis_slices(domain.dim, axis, outer, inner)
            near = _axis_slices(domain.dim, axis, neighbor, inner)
            result[face] = f.values[face] - f.values[near]
    return result


def flux_sum(f: LatticeFunction) -> float:
    """Σ_{x∈δΩ} ∂f/∂n̄(x)."""
    return float(normal_derivative_field(f)[f.domain.boundary_mask].sum())


def dirichlet_form(f: LatticeFunction, g: LatticeFunction) -> float:
    """
    D_Ω(f, g) = ½ Σ_{x,y∈Ω, x∼y} ∇f∇g + Σ_{x∈Ω, y∈δΩ, x∼y} ∇f∇g.

    Equivale a sumar ∇f∇g una vez por arista con al menos un extremo en Ω.
    """
    _same_domain(f, g)
    domain = f.domain
    inner = domain.interior_slices
    total = 0.0
    for axis in range(domain.dim):
        upper = _axis_slices(domain.dim, axis, slice(1, None), inner)
        lower = _axis_slices(domain.dim, axis, slice(None, -1), inner)
        df = f.values[upper] - f.values[lower]
        dg = g.values[upper] - g.values[lower]
        total += float(np.sum(df * dg))
    return total


# ----------------------------------------------------------------------
# Normas
# ----------------------------------------------------------------------
def lp_norm(f: LatticeFunction, p: float = 2, region: str = "closure") -> float:
    """Norma ℓᵖ sobre Ω̄ (o Ω), p ∈ [1, ∞]."""
    mask = f.domain.closure_mask if region == "closure" else f.domain.interior_mask
    values = np.abs(f.values[mask])
    if np.isinf(p):
        return float(values.max(initial=0.0))
    if p < 1:
        raise ParameterError(f"p must be ≥ 1, got {p}")
    return float(np.sum(values ** p) ** (1.0 / p))


def sup_norm(f: LatticeFunction) -> float:
    return lp_norm(f, np.inf)
