"""
Subretículos finitos de ℤⁿ: cajas alineadas con los ejes, su frontera δΩ,
adyacencia y distancia ℓ¹.

Las cajas se representan sobre una rejilla "acolchada" (una capa extra en
cada dirección) que contiene Ω̄ = Ω ∪ δΩ; las esquinas de esa rejilla no
pertenecen a Ω̄ y se enmascaran.
"""
import logging
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from config import settings
from solver.errors import LatticeError

logger = logging.getLogger(__name__)

LatticePoint = Tuple[int, ...]


def _check_dim(n: int) -> None:
    if n < 2 or n > settings.MAX_DIM:
        raise LatticeError(f"dimension {n} outside supported range [2, {settings.MAX_DIM}]")


def as_point(coords: Iterable[int]) -> LatticePoint:
    """Normalizar coordenadas a una tupla de enteros."""
    return tuple(int(c) for c in coords)


def neighbors(p: Sequence[int], n: int) -> List[LatticePoint]:
    """Los 2n vecinos p ± e_i, en orden lexicográfico."""
    _check_dim(n)
    p = as_point(p)
    if len(p) != n:
        raise LatticeError(f"point {p} does not have dimension {n}")
    result = []
    for i in range(n):
        for step in (-1, 1):
            q = list(p)
            q[i] += step
            result.append(tuple(q))
    return sorted(result)


def l1_distance(x: Sequence[int], y: Sequence[int]) -> int:
    """d(x, y) = Σ |x_i − y_i|."""
    if len(x) != len(y):
        raise LatticeError(f"dimension mismatch: {len(x)} != {len(y)}")
    return int(sum(abs(int(a) - int(b)) for a, b in zip(x, y)))


def boundary(interior: Iterable[Sequence[int]], n: int) -> List[LatticePoint]:
    """
    δΩ = {y ∉ Ω : ∃x ∈ Ω con y ∼ x} para un conjunto finito arbitrario.

    Args:
        interior: vértices de Ω
        n: dimensión del retículo

    Returns:
        Vértices de δΩ en orden lexicográfico
    """
    omega = {as_point(p) for p in interior}
    if not omega:
        raise LatticeError("empty domain")
    for p in omega:
        if len(p) != n:
            raise LatticeError(f"point {p} does not have dimension {n}")
    result = set()
    for p in omega:
        for q in neighbors(p, n):
            if q not in omega:
                result.add(q)
    return sorted(result)


def is_connected(vertices: Iterable[Sequence[int]]) -> bool:
    """Conexidad bajo la adyacencia d(x, y) = 1 (búsqueda en anchura)."""
    omega = {as_point(p) for p in vertices}
    if not omega:
        return False
    n = len(next(iter(omega)))
    start = min(omega)
    seen = {start}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        for q in neighbors(p, n):
            if q in omega and q not in seen:
                seen.add(q)
                queue.append(q)
    return len(seen) == len(omega)


@dataclass(frozen=True)
class LatticeBox:
    """
    Caja Ω = {x : lower_i ≤ x_i ≤ upper_i} ⊂ ℤⁿ.

    Inmutable: los arreglos derivados se calculan una vez y se comparten.
    """
    lower: LatticePoint
    upper: LatticePoint

    def __post_init__(self):
        object.__setattr__(self, "lower", as_point(self.lower))
        object.__setattr__(self, "upper", as_point(self.upper))
        if len(self.lower) != len(self.upper):
            raise LatticeError("corner dimension mismatch")
        _check_dim(len(self.lower))
        if any(lo > up for lo, up in zip(self.lower, self.upper)):
            raise LatticeError("empty domain")

    @classmethod
    def cube(cls, dim: int, radius: int) -> "LatticeBox":
        """Caja {|x_i| ≤ R}."""
        return cls.centered((0,) * dim, radius)

    @classmethod
    def centered(cls, center: Sequence[int], radius: int) -> "LatticeBox":
        """Caja de radio R (norma del máximo) alrededor de un centro."""
        if radius < 0:
            raise LatticeError(f"negative radius {radius}")
        c = as_point(center)
        return cls(tuple(x - radius for x in c), tuple(x + radius for x in c))

    # ------------------------------------------------------------------
    # Geometría
    # ------------------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> Tuple[int, ...]:
        """Forma de la rejilla del interior Ω."""
        return tuple(up - lo + 1 for lo, up in zip(self.lower, self.upper))

    @property
    def padded_shape(self) -> Tuple[int, ...]:
        """Forma de la rejilla que contiene Ω̄."""
        return tuple(s + 2 for s in self.shape)

    @property
    def radius(self) -> int:
        """Radio (semiancho mínimo) de la caja."""
        return min((s - 1) // 2 for s in self.shape)

    @property
    def center(self) -> LatticePoint:
        return tuple((lo + up) // 2 for lo, up in zip(self.lower, self.upper))

    @property
    def size(self) -> int:
        """|Ω|."""
        return int(np.prod(self.shape))

    @property
    def interior_slices(self) -> Tuple[slice, ...]:
        """Rebanadas del interior dentro de la rejilla acolchada."""
        return tuple(slice(1, s + 1) for s in self.shape)

    @cached_property
    def padded_coords(self) -> np.ndarray:
        """Coordenadas de la rejilla acolchada, forma padded_shape + (n,)."""
        axes = [np.arange(lo - 1, up + 2) for lo, up in zip(self.lower, self.upper)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids, axis=-1)

    @cached_property
    def _outside_count(self) -> np.ndarray:
        """Número de coordenadas fuera de [lower, upper] en cada punto acolchado."""
        count = np.zeros(self.padded_shape, dtype=np.int8)
        for i, s in enumerate(self.padded_shape):
            edge = np.zeros(s, dtype=np.int8)
            edge[0] = edge[-1] = 1
            shape = [1] * self.dim
            shape[i] = s
            count = count + edge.reshape(shape)
        return count

    @cached_property
    def interior_mask(self) -> np.ndarray:
        return self._outside_count == 0

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        return self._outside_count == 1

    @cached_property
    def closure_mask(self) -> np.ndarray:
        return self._outside_count <= 1

    @cached_property
    def collar_mask(self) -> np.ndarray:
        """B(Ω) = {x ∈ Ω : ∃y ∈ δΩ, y ∼ x}, sobre la rejilla acolchada."""
        mask = np.zeros(self.padded_shape, dtype=bool)
        inner = np.zeros(self.shape, dtype=bool)
        for i, s in enumerate(self.shape):
            index = [slice(None)] * self.dim
            index[i] = 0
            inner[tuple(index)] = True
            index[i] = s - 1
            inner[tuple(index)] = True
        mask[self.interior_slices] = inner
        return mask

    @cached_property
    def interior(self) -> np.ndarray:
        """Vértices de Ω en orden lexicográfico, forma (|Ω|, n)."""
        return self.padded_coords[self.interior_mask]

    @cached_property
    def boundary(self) -> np.ndarray:
        """Vértices de δΩ en orden lexicográfico."""
        return self.padded_coords[self.boundary_mask]

    @cached_property
    def closure(self) -> np.ndarray:
        """Vértices de Ω̄ en orden lexicográfico."""
        return self.padded_coords[self.closure_mask]

    # ------------------------------------------------------------------
    # Pertenencia e indexado
    # ------------------------------------------------------------------
    def _check_point(self, p: Sequence[int]) -> LatticePoint:
        p = as_point(p)
        if len(p) != self.dim:
            raise LatticeError(f"dimension mismatch: {len(p)} != {self.dim}")
        return p

    def contains(self, p: Sequence[int]) -> bool:
        """x ∈ Ω."""
        p = self._check_point(p)
        return all(lo <= x <= up for x, lo, up in zip(p, self.lower, self.upper))

    def in_boundary(self, p: Sequence[int]) -> bool:
        """x ∈ δΩ."""
        p = self._check_point(p)
        outside = 0
        for x, lo, up in zip(p, self.lower, self.upper):
            if x == lo - 1 or x == up + 1:
                outside += 1
            elif not lo <= x <= up:
                return False
        return outside == 1

    def in_closure(self, p: Sequence[int]) -> bool:
        return self.contains(p) or self.in_boundary(p)

    def padded_index(self, p: Sequence[int]) -> Tuple[int, ...]:
        """Índice de un punto de Ω̄ en la rejilla acolchada."""
        p = self._check_point(p)
        if not self.in_closure(p):
            raise LatticeError(f"point {p} outside closure of domain")
        return tuple(x - lo + 1 for x, lo in zip(p, self.lower))

    def index(self, p: Sequence[int]) -> int:
        """Posición de un vértice interior en el orden lexicográfico."""
        p = self._check_point(p)
        if not self.contains(p):
            raise LatticeError(f"point {p} not in interior")
        return int(np.ravel_multi_index(tuple(x - lo for x, lo in zip(p, self.lower)), self.shape))

    def point(self, i: int) -> LatticePoint:
        """Inversa de index."""
        if not 0 <= i < self.size:
            raise LatticeError(f"index {i} out of range")
        offset = np.unravel_index(int(i), self.shape)
        return tuple(int(o) + lo for o, lo in zip(offset, self.lower))

    def is_subbox(self, other: "LatticeBox") -> bool:
        """self ⊆ other."""
        return self.dim == other.dim and all(
            lo2 <= lo1 and up1 <= up2
            for lo1, up1, lo2, up2 in zip(self.lower, self.upper, other.lower, other.upper)
        )

    def shifted(self, vector: Sequence[int]) -> "LatticeBox":
        v = self._check_point(vector)
        return LatticeBox(
            tuple(a + b for a, b in zip(self.lower, v)),
            tuple(a + b for a, b in zip(self.upper, v)),
        )

    def describe(self) -> str:
        return f"caja n={self.dim} {self.lower}..{self.upper} (|Ω|={self.size})"


@dataclass(frozen=True)
class Exhaustion:
    """Familia encajada Ω₀ ⊂ Ω₁ ⊂ Ω₂ ⊂ … de cajas."""
    base: LatticeBox
    boxes: Tuple[LatticeBox, ...]

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if not self.boxes:
            raise LatticeError("exhaustion needs at least one box")
        if not self.base.is_subbox(self.boxes[0]):
            raise LatticeError("base box Ω₀ not contained in Ω₁")
        for small, big in zip(self.boxes, self.boxes[1:]):
            if not small.is_subbox(big) or small == big:
                raise LatticeError(f"boxes not strictly nested: {small.describe()} ⊄ {big.describe()}")

    @classmethod
    def from_radii(cls, center: Sequence[int], radii: Sequence[int], base: LatticeBox) -> "Exhaustion":
        """Cajas concéntricas de radios crecientes."""
        return cls(base=base, boxes=tuple(LatticeBox.centered(center, r) for r in radii))

    def __iter__(self):
        return iter(self.boxes)

    def __len__(self) -> int:
        return len(self.boxes)
