"""Configuración central del solver de vórtices Chern–Simons en retículos ℤⁿ."""
import os
from pathlib import Path
from dotenv import load_dotenv

# Cargar variables de entorno
load_dotenv()


class Settings:
    """Configuración de la aplicación."""

    # Salidas de experimentos
    OUTPUT_DIR: Path = Path(os.getenv("LCS_OUTPUT_DIR", "./data/runs"))

    # Logging
    LOG_LEVEL: str = os.getenv("LCS_LOG_LEVEL", "INFO").upper()

    # Límite de dimensión: las cajas crecen como (2R+1)ⁿ
    MAX_DIM: int = int(os.getenv("LCS_MAX_DIM", "8"))

    # Paralelismo y reproducibilidad
    WORKERS: int = int(os.getenv("LCS_WORKERS", "1"))
    SEED: int = int(os.getenv("LCS_SEED", "0"))

    # Función de Green
    GREEN_TOL: float = float(os.getenv("LCS_GREEN_TOL", "1e-6"))
    MC_SAMPLES: int = int(os.getenv("LCS_MC_SAMPLES", "2000000"))
    # Máximo de puntos de la rejilla más fina de la cuadratura tensorial
    GREEN_MAX_POINTS: int = int(os.getenv("LCS_GREEN_MAX_POINTS", str(2 ** 25)))

    def ensure_output_dir(self, path: Path | None = None) -> Path:
        """Crear el directorio de salida si no existe."""
        target = Path(path) if path is not None else self.OUTPUT_DIR
        target.mkdir(parents=True, exist_ok=True)
        return target


# Instancia global de configuración
settings = Settings()
