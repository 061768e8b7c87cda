#!/usr/bin/env python3
"""
CLI de experimentos del sistema de Chern–Simons en el retículo.

    python main.py solve --config configs/solve_trivial.json --out data/runs/solve
    python main.py sweep --config configs/sweep_lambda.json --workers 4
    python main.py green --config configs/green_table.json --seed 7
"""
import argparse
import logging
import sys
from pathlib import Path

from config import settings
from experiments.runner import SUBCOMMAND_KINDS, run_experiment
from solver.utils import setup_logging

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Soluciones topológicas de Chern–Simons en ℤⁿ")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Nivel de logging")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "Resolver en una caja finita",
        "sweep": "Barridos en λ (sweep_lambda, small_lambda)",
        "green": "Tablas de G_n y barrido de ‖G_n‖∞",
        "decay": "Solución maximal y tasa de decaimiento",
        "uniqueness": "Sonda de unicidad con arranques de Newton",
    }
    for name in SUBCOMMAND_KINDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, type=Path, help="Archivo JSON del experimento")
        p.add_argument("--out", type=Path, default=None,
                       help="Directorio de salida (por defecto LCS_OUTPUT_DIR)")
        p.add_argument("--seed", type=int, default=None, help="Semilla (u64)")
        p.add_argument("--workers", type=int, default=None, help="Trabajadores del pool interno")
    return parser


def main(argv=None) -> int:
    """Función principal"""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    return run_experiment(args.command, args.config, out=args.out, seed=args.seed, workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
