"""
Utilidades comunes: logging, escritura atómica de CSV/JSON y certificados.
"""
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# 17 cifras significativas: ida y vuelta exacta de un double
CSV_FLOAT_FORMAT = "%.17g"


def setup_logging(level: str = "INFO") -> None:
    """Configurar logging a stdout con el formato del proyecto."""
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stdout)],
        force=True,
    )


def new_certificate() -> Dict[str, Any]:
    """Estructura estándar de un certificado de validación."""
    return {
        "valid": True,
        "errors": [],
        "warnings": [],
        "stats": {}
    }


def fail(certificate: Dict[str, Any], message: str) -> None:
    """Registrar un error en el certificado y marcarlo como inválido."""
    certificate["errors"].append(message)
    certificate["valid"] = False


def to_jsonable(obj: Any) -> Any:
    """Convertir tipos numpy, dataclasses y Path a tipos JSON nativos."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        # JSON no admite inf/nan
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def _atomic_write_text(path: Path, text: str) -> None:
    """Escribir en un temporal del mismo directorio y renombrar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_csv_atomic(df: pd.DataFrame, path: Path) -> Path:
    """CSV con cabecera, UTF-8, fin de línea LF y 17 cifras significativas."""
    text = df.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    _atomic_write_text(Path(path), text)
    return Path(path)


def write_json_atomic(payload: Dict[str, Any], path: Path) -> Path:
    """JSON determinista (claves ordenadas) escrito de forma atómica."""
    text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True, ensure_ascii=False)
    _atomic_write_text(Path(path), text + "\n")
    return Path(path)


def log_sweep_header(logger: logging.Logger, title: str, rows: Optional[List[str]] = None) -> None:
    """Bloque de resumen en el log."""
    logger.info("=" * 60)
    logger.info(title)
    logger.info("=" * 60)
    for row in rows or []:
        logger.info(row)
