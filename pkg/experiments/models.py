"""
Modelos (Pydantic) de la configuración de experimentos.
"""
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator

from config import settings
from solver.monotone_scheme import SchemeParams
from solver.linear_solver import SolverParams
from solver.vortex_data import VortexConfig


class ExperimentKind(str, Enum):
    SOLVE = "solve"
    SWEEP_LAMBDA = "sweep_lambda"
    SMALL_LAMBDA = "small_lambda"
    GREEN_TABLE = "green_table"
    DECAY = "decay"
    UNIQUENESS = "uniqueness"


class VortexSpec(BaseModel):
    """Un vórtice: punto del retículo y multiplicidad."""
    model_config = ConfigDict(extra="forbid")

    point: List[int] = Field(..., description="Coordenadas enteras del vórtice")
    multiplicity: float = Field(1, ge=0, description="Multiplicidad (entera salvo con fractional=true)")


class ExperimentConfig(BaseModel):
    """Configuración validada de un experimento."""
    model_config = ConfigDict(extra="forbid")

    kind: ExperimentKind = Field(..., description="Tipo de experimento")
    dim: int = Field(..., ge=2, description="Dimensión n del retículo")
    u_vortices: List[VortexSpec] = Field(default_factory=list, description="Vórtices de g (p_j, m_j)")
    v_vortices: List[VortexSpec] = Field(default_factory=list, description="Vórtices de h (q_j, n_j)")
    fractional: bool = Field(False, description="Permitir multiplicidades no enteras (solo pruebas)")

    lam: Optional[PositiveFloat] = Field(None, description="Acoplamiento λ")
    lambdas: Optional[List[PositiveFloat]] = Field(None, description="Programa de λ (barridos)")

    radius: Optional[int] = Field(None, ge=0, description="Radio de la caja (solve)")
    radii: List[int] = Field(default_factory=lambda: [4, 6, 9, 13, 19, 28], description="Radios del agotamiento")
    window_radius: int = Field(5, ge=0, description="Radio de la ventana de observación")
    ext_tol: PositiveFloat = Field(1e-8, description="Tolerancia entre radios consecutivos")
    strict: bool = Field(True, description="Fallar si el agotamiento no converge")

    stop_tol: PositiveFloat = Field(1e-10, description="Tolerancia del esquema monótono")
    max_outer: int = Field(100_000, ge=1, description="Tope de iteraciones externas")
    shift_ratio: float = Field(2.5, gt=2.0, description="L = shift_ratio·λ")
    linear_tol: PositiveFloat = Field(1e-13, description="Tolerancia relativa del Krylov")
    linear_method: str = Field("cg", pattern="^(cg|minres)$", description="Método de Krylov")

    dims: Optional[List[int]] = Field(None, description="Dimensiones del barrido de ‖G_n‖∞")
    table_radius: Optional[int] = Field(None, ge=0, description="Radio de la tabla de G_n")
    green_tol: Optional[PositiveFloat] = Field(None, description="Tolerancia de la cuadratura")
    mc_samples: Optional[int] = Field(None, ge=1000, description="Muestras Monte Carlo (n ≥ 7)")

    axis: int = Field(0, ge=0, description="Eje del ajuste de decaimiento")
    newton_tol: PositiveFloat = Field(1e-11, description="Objetivo ‖F‖∞ de Newton")
    agreement_tol: PositiveFloat = Field(1e-7, description="Acuerdo entre arranques de Newton")

    workers: int = Field(1, ge=1, description="Trabajadores del pool interno")
    seed: int = Field(0, ge=0, description="Semilla (Monte Carlo)")
    output_dir: Optional[str] = Field(None, description="Directorio de salida")

    @model_validator(mode="after")
    def check_kind_fields(self) -> "ExperimentConfig":
        kind = self.kind
        if self.dim > settings.MAX_DIM:
            raise ValueError(f"field 'dim' must be ≤ {settings.MAX_DIM} (LCS_MAX_DIM)")
        if kind in (ExperimentKind.SOLVE, ExperimentKind.DECAY, ExperimentKind.UNIQUENESS) and self.lam is None:
            raise ValueError(f"field 'lam' is required for kind '{kind.value}'")
        if kind == ExperimentKind.SOLVE and self.radius is None:
            raise ValueError("field 'radius' is required for kind 'solve'")
        if kind == ExperimentKind.SWEEP_LAMBDA and not self.lambdas:
            raise ValueError("field 'lambdas' is required for kind 'sweep_lambda'")
        if kind == ExperimentKind.GREEN_TABLE:
            if not self.dims and self.table_radius is None:
                raise ValueError("kind 'green_table' needs 'dims' or 'table_radius'")
            if self.table_radius is not None and self.dim < 3:
                raise ValueError("field 'dim' must be ≥ 3 for a Green table")
            if self.dims and min(self.dims) < 3:
                raise ValueError("field 'dims' entries must be ≥ 3")
        if self.lambdas is not None and len(set(self.lambdas)) != len(self.lambdas):
            raise ValueError("field 'lambdas' must have distinct values")
        if not self.radii or any(b <= a for a, b in zip(self.radii, self.radii[1:])) or self.radii[0] < 1:
            raise ValueError("field 'radii' must be positive and strictly increasing")
        if self.axis >= self.dim:
            raise ValueError(f"field 'axis' must be < dim={self.dim}")
        for name in ("u_vortices", "v_vortices"):
            for spec in getattr(self, name):
                if len(spec.point) != self.dim:
                    raise ValueError(f"field '{name}': point {spec.point} does not have dimension {self.dim}")
                if not self.fractional and int(spec.multiplicity) != spec.multiplicity:
                    raise ValueError(f"field '{name}': non-integer multiplicity {spec.multiplicity}")
        return self

    def vortex_config(self) -> VortexConfig:
        u = [(tuple(s.point), s.multiplicity) for s in self.u_vortices]
        v = [(tuple(s.point), s.multiplicity) for s in self.v_vortices]
        if self.fractional:
            return VortexConfig.fractional_mass(self.dim, u, v)
        return VortexConfig(self.dim, tuple(u), tuple(v))

    def scheme_params(self, lam: Optional[float] = None) -> SchemeParams:
        lam = self.lam if lam is None else lam
        if lam is None:
            lam = min(self.lambdas) if self.lambdas else 1.0
        return SchemeParams(
            lam=lam,
            stop_tol=self.stop_tol,
            max_outer=self.max_outer,
            linear=SolverParams(tol=self.linear_tol, method=self.linear_method),
            shift_ratio=self.shift_ratio,
        )
