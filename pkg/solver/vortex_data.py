"""
Datos de vórtices: fuentes g = 4π Σ m_j δ_{p_j}, h = 4π Σ n_j δ_{q_j},
la masa total B y el umbral de λ en escala logarítmica.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from solver.errors import LatticeError, VortexError
from solver.lattice import LatticeBox, LatticePoint, as_point

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi

Vortex = Tuple[LatticePoint, float]


def _merge(vortices: Iterable[Tuple[Sequence[int], float]], dim: int, integer: bool) -> Tuple[Vortex, ...]:
    """Sumar multiplicidades de puntos repetidos; descartar multiplicidad 0."""
    merged: Dict[LatticePoint, float] = {}
    for point, mult in vortices:
        p = as_point(point)
        if len(p) != dim:
            raise VortexError(f"vortex {p} does not have dimension {dim}")
        if mult < 0:
            raise VortexError(f"negative multiplicity {mult} at {p}")
        if integer and int(mult) != mult:
            raise VortexError(f"non-integer multiplicity {mult} at {p}")
        merged[p] = merged.get(p, 0) + (int(mult) if integer else float(mult))
    return tuple(sorted((p, m) for p, m in merged.items() if m > 0))


@dataclass(frozen=True)
class VortexConfig:
    """
    Fuentes de Dirac del sistema.

    `fractional=True` solo lo produce `VortexConfig.fractional`: gancho de
    pruebas con masas no enteras, fuera de la hipótesis m_j ∈ ℕ.
    """
    dim: int
    u_vortices: Tuple[Vortex, ...] = ()
    v_vortices: Tuple[Vortex, ...] = ()
    fractional: bool = False

    def __post_init__(self):
        integer = not self.fractional
        object.__setattr__(self, "u_vortices", _merge(self.u_vortices, self.dim, integer))
        object.__setattr__(self, "v_vortices", _merge(self.v_vortices, self.dim, integer))

    @classmethod
    def fractional_mass(cls, dim: int, u_vortices=(), v_vortices=()) -> "VortexConfig":
        """Gancho de pruebas: multiplicidades reales (B pequeño, umbrales representables)."""
        logger.warning("⚠️ Configuración con masas fraccionarias (fuera de m_j ∈ ℕ)")
        return cls(dim=dim, u_vortices=tuple(u_vortices), v_vortices=tuple(v_vortices), fractional=True)

    @property
    def total_mass_u(self) -> float:
        return FOUR_PI * sum(m for _, m in self.u_vortices)

    @property
    def total_mass_v(self) -> float:
        return FOUR_PI * sum(m for _, m in self.v_vortices)

    @property
    def is_trivial_u(self) -> bool:
        """g ≡ 0."""
        return not self.u_vortices

    @property
    def is_trivial_v(self) -> bool:
        """h ≡ 0."""
        return not self.v_vortices

    @property
    def vortex_points(self) -> List[LatticePoint]:
        return sorted({p for p, _ in self.u_vortices} | {p for p, _ in self.v_vortices})

    def centroid(self) -> LatticePoint:
        """Centroide de los vórtices redondeado con ⌊c + ½⌋ (conmuta con traslaciones); el origen si no hay."""
        points = self.vortex_points
        if not points:
            return (0,) * self.dim
        return tuple(int(c) for c in np.floor(np.mean(np.array(points, dtype=float), axis=0) + 0.5))

    def shifted(self, vector: Sequence[int]) -> "VortexConfig":
        """Trasladar todos los vórtices por un vector del retículo."""
        v = as_point(vector)

        def move(vortices):
            return tuple((tuple(a + b for a, b in zip(p, v)), m) for p, m in vortices)

        return VortexConfig(self.dim, move(self.u_vortices), move(self.v_vortices), self.fractional)

    def source_arrays(self, box: LatticeBox) -> Tuple[np.ndarray, np.ndarray]:
        """g y h sobre la rejilla acolchada de la caja (cero fuera de Ω)."""
        if box.dim != self.dim:
            raise LatticeError(f"dimension mismatch: {box.dim} != {self.dim}")
        g = np.zeros(box.padded_shape)
        h = np.zeros(box.padded_shape)
        for target, vortices in ((g, self.u_vortices), (h, self.v_vortices)):
            for p, m in vortices:
                if not box.contains(p):
                    raise VortexError("source outside Ω", {"point": p, "box": box.describe()})
                target[box.padded_index(p)] += FOUR_PI * m
        return g, h

    def check_inside(self, box: LatticeBox) -> None:
        for p in self.vortex_points:
            if not box.contains(p):
                raise VortexError("source outside Ω", {"point": p, "box": box.describe()})


def _source(vortices: Tuple[Vortex, ...], dim: int, x: Sequence[int]) -> float:
    x = as_point(x)
    if len(x) != dim:
        raise LatticeError(f"dimension mismatch: {len(x)} != {dim}")
    return sum(FOUR_PI * m for p, m in vortices if p == x)


def source_g(cfg: VortexConfig, x: Sequence[int]) -> float:
    """g(x) = 4π m_j si x = p_j, 0 en otro caso."""
    return _source(cfg.u_vortices, cfg.dim, x)


def source_h(cfg: VortexConfig, x: Sequence[int]) -> float:
    """h(x) = 4π n_j si x = q_j, 0 en otro caso."""
    return _source(cfg.v_vortices, cfg.dim, x)


def total_mass_B(cfg: VortexConfig) -> float:
    """B = 4π Σ m_j + 4π Σ n_j."""
    return cfg.total_mass_u + cfg.total_mass_v


@dataclass(frozen=True)
class LambdaThreshold:
    """Umbral 2B(2n + e^{4B}) en escala logarítmica."""
    log_value: float
    representable: bool
    linear_value: Optional[float] = None

    @property
    def vacuous(self) -> bool:
        return self.log_value == -math.inf

    def exceeded_by(self, lam: float) -> bool:
        return not self.vacuous and lam > 0 and math.log(lam) > self.log_value


def lambda_threshold(cfg: VortexConfig, n: Optional[int] = None) -> LambdaThreshold:
    """
    ln(2B) + ln(2n + e^{4B}) calculado con log-sum-exp.

    Para B = 0 el umbral es vacío (−∞).
    """
    n = cfg.dim if n is None else n
    B = total_mass_B(cfg)
    if B <= 0:
        return LambdaThreshold(log_value=-math.inf, representable=True, linear_value=0.0)
    log_value = math.log(2.0 * B) + float(logsumexp([math.log(2.0 * n), 4.0 * B]))
    # El mayor double es ~e^{709.78}
    representable = log_value < math.log(np.finfo(float).max)
    linear = math.exp(log_value) if representable else None
    return LambdaThreshold(log_value=log_value, representable=representable, linear_value=linear)
