"""
Excepciones del solver. Todas heredan de SolverError para que la CLI
pueda mapearlas a un único código de salida.
"""
from typing import Any, Dict, Optional


class SolverError(Exception):
    """Error base de la librería."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics: Dict[str, Any] = diagnostics or {}


class LatticeError(SolverError, ValueError):
    """Dominio vacío, dimensiones incompatibles o vértices fuera del dominio."""


class VortexError(SolverError, ValueError):
    """Datos de vórtices inválidos o fuentes fuera de Ω."""


class ParameterError(SolverError, ValueError):
    """Parámetros numéricos fuera de rango."""


class ConvergenceError(SolverError, RuntimeError):
    """Una iteración no alcanzó la tolerancia pedida."""


class CertificateError(SolverError, RuntimeError):
    """Un certificado (monotonía, subsolución, ...) falló."""
