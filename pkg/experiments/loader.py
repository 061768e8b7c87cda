"""
Lectura de configuraciones JSON con diagnósticos de línea y campo.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError

from experiments.models import ExperimentConfig

logger = logging.getLogger(__name__)

# Campos escalares que la CLI puede sobrescribir
OVERRIDABLE = ("seed", "workers", "output_dir")


class ConfigError(Exception):
    """Configuración ilegible o inválida (la CLI sale con estado 2)."""


def _format_validation(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        loc = ".".join(str(p) for p in item["loc"]) or "config"
        parts.append(f"{loc}: {item['msg']}")
    return "; ".join(parts)


def parse_config(data: Any, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Validar un diccionario ya decodificado aplicando las sobrescrituras de la CLI."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    for key, value in (overrides or {}).items():
        if key not in OVERRIDABLE:
            raise ConfigError(f"field '{key}' cannot be overridden from the command line")
        if value is not None:
            data[key] = value
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_format_validation(e)}") from e


def load_config(path: Path, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Leer y validar un archivo de configuración.

    Raises:
        ConfigError: archivo ausente, JSON mal formado (línea:columna) o
            campos inválidos (ruta del campo)
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    config = parse_config(data, overrides)
    logger.info(f"📋 Configuración {path.name}: experimento '{config.kind.value}', n={config.dim}")
    return config
