"""
Ejecución de experimentos: despacho por tipo, escritura atómica de CSV y
del resumen JSON con certificados.
"""
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import pandas as pd

from config import settings
from experiments.loader import ConfigError, load_config
from experiments.models import ExperimentConfig, ExperimentKind
from solver import __version__
from solver.asymptotics import (
    check_large_lambda_bound,
    check_small_lambda_limit,
    sweep_lambda,
    uniqueness_probe,
)
from solver.errors import ConvergenceError, SolverError
from solver.exhaustion import estimate_decay_rate, solve_maximal
from solver.green_function import (
    GreenTable,
    build_green_table,
    check_sup_norm_sweep,
    green_sup_norm_sweep,
    green_value,
)
from solver.lattice import LatticeBox
from solver.monotone_scheme import solve_on_box
from solver.utils import fail, log_sweep_header, new_certificate, to_jsonable, write_csv_atomic, write_json_atomic
from solver.vortex_data import total_mass_B

logger = logging.getLogger(__name__)

# Subcomando de la CLI → tipos de experimento aceptados
SUBCOMMAND_KINDS = {
    "solve": {ExperimentKind.SOLVE},
    "sweep": {ExperimentKind.SWEEP_LAMBDA, ExperimentKind.SMALL_LAMBDA},
    "green": {ExperimentKind.GREEN_TABLE},
    "decay": {ExperimentKind.DECAY},
    "uniqueness": {ExperimentKind.UNIQUENESS},
}

DECAY_MIN_R2 = 0.98


@dataclass
class RunResult:
    passed: bool
    files: List[Path] = field(default_factory=list)
    certificates: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    results: Dict[str, Any] = field(default_factory=dict)


class ExperimentRunner:
    """Ejecuta una configuración validada y escribe sus salidas en out_dir."""

    def __init__(self, config: ExperimentConfig, out_dir: Path):
        self.config = config
        self.out_dir = Path(out_dir)
        self.cfg = config.vortex_config()
        self._files: List[Path] = []
        self._certificates: Dict[str, Dict[str, Any]] = {}
        self._results: Dict[str, Any] = {}
        self._handlers: Dict[ExperimentKind, Callable[[], None]] = {
            ExperimentKind.SOLVE: self._run_solve,
            ExperimentKind.SWEEP_LAMBDA: self._run_sweep,
            ExperimentKind.SMALL_LAMBDA: self._run_small_lambda,
            ExperimentKind.GREEN_TABLE: self._run_green,
            ExperimentKind.DECAY: self._run_decay,
            ExperimentKind.UNIQUENESS: self._run_uniqueness,
        }

    # ------------------------------------------------------------------
    def _write_csv(self, frame: pd.DataFrame, name: str) -> None:
        self._files.append(write_csv_atomic(frame, self.out_dir / name))
        logger.info(f"💾 {name}: {len(frame)} filas")

    def _window(self) -> LatticeBox:
        radius = min(self.config.window_radius, self.config.radii[0])
        return LatticeBox.centered(self.cfg.centroid(), radius)

    # ------------------------------------------------------------------
    def _run_solve(self) -> None:
        c = self.config
        box = LatticeBox.centered(self.cfg.centroid(), c.radius)
        pair, report = solve_on_box(box, self.cfg, c.scheme_params())
        self._write_csv(pair.to_frame(), "solution.csv")
        self._certificates["solve"] = report.certificate()
        self._results["report"] = report

    def _run_sweep(self) -> None:
        c = self.config
        try:
            sweep = sweep_lambda(
                self.cfg, c.lambdas, self._window(), c.scheme_params(), c.radii, c.ext_tol, c.strict, c.workers
            )
        except ConvergenceError as e:
            sweep = e.diagnostics.get("sweep")
            if sweep is None:
                raise
            logger.error(f"❌ {e}")
        self._write_csv(sweep.to_frame(), "sweep.csv")
        self._write_csv(sweep.summary_frame(), "sweep_summary.csv")
        self._certificates["sweep_lambda"] = sweep.certificate()
        self._results["diagnostics"] = sweep.diagnostics

        B = total_mass_B(self.cfg)
        bounds = []
        for lam, sol in sorted(sweep.solutions.items()):
            if lam <= 2.0 * B:
                continue
            report = check_large_lambda_bound(sol, self.cfg)
            self._certificates[f"large_lambda[{lam:g}]"] = report.certificate()
            bounds.append(report)
        self._results["large_lambda"] = bounds

    def _run_small_lambda(self) -> None:
        c = self.config
        kwargs = {"lambdas": c.lambdas} if c.lambdas else {}
        report = check_small_lambda_limit(
            self.cfg, self._window(), c.scheme_params(), radii=c.radii, ext_tol=c.ext_tol,
            green_tol=c.green_tol, **kwargs
        )
        self._write_csv(report.to_frame(), "small_lambda.csv")
        self._certificates["small_lambda"] = report.certificate()
        self._results["rows"] = report.rows

    def _run_green(self) -> None:
        c = self.config
        frames = []
        if c.table_radius is not None:
            table = build_green_table(c.dim, c.table_radius, c.green_tol, c.workers, c.seed, c.mc_samples)
            frames.append(table.to_frame())
            self._certificates["green_table"] = table.certificate()
        if c.dims:
            rows = green_sup_norm_sweep(c.dims, c.green_tol, c.seed, c.mc_samples)
            for r in rows:
                origin = (0,) * r.dim
                # valor cacheado por clase: no recalcula
                entry = green_value(r.dim, origin, c.green_tol, c.seed, c.mc_samples)
                frames.append(GreenTable(dim=r.dim, entries={origin: entry}).to_frame())
            self._certificates["sup_norm_sweep"] = check_sup_norm_sweep(rows)
            self._results["sup_norm_sweep"] = rows
        frame = pd.concat(frames, ignore_index=True).drop_duplicates(subset=["n", "x"], keep="first")
        self._write_csv(frame, "green.csv")

    def _run_decay(self) -> None:
        c = self.config
        sol = solve_maximal(self.cfg, c.scheme_params(), c.radii, self._window(), c.ext_tol, c.strict)
        self._write_csv(sol.pair.to_frame(), "maximal.csv")
        self._write_csv(pd.DataFrame(sol.records()), "exhaustion.csv")
        self._certificates["exhaustion"] = sol.certificate()
        estimate_decay_rate(sol, c.axis)
        fit = sol.decay_fit
        cert = new_certificate()
        if not fit.passes:
            fail(cert, f"decay rate {fit.rate:.5f} below 0.8·m = {0.8 * fit.floor:.5f}")
        if fit.r2 < DECAY_MIN_R2:
            fail(cert, f"fit R² = {fit.r2:.5f} below {DECAY_MIN_R2}")
        cert["stats"] = {"rate": fit.rate, "floor": fit.floor, "r2": fit.r2}
        self._certificates["decay"] = cert
        self._results["decay_fit"] = fit
        self._results["decay_constant"] = fit.constant

    def _run_uniqueness(self) -> None:
        c = self.config
        report = uniqueness_probe(
            self.cfg, c.lam, self._window(), c.scheme_params(), c.radii, c.ext_tol,
            newton_tol=c.newton_tol, tolerance=c.agreement_tol, green_tol=c.green_tol,
        )
        self._write_csv(report.to_frame(), "uniqueness.csv")
        self._certificates["uniqueness"] = report.certificate()
        self._results["distances"] = report.distances
        self._results["flagged"] = report.flagged

    # ------------------------------------------------------------------
    def run(self) -> RunResult:
        """
        Ejecutar el experimento y escribir summary.json.

        Raises:
            SolverError: fallo del solver (la CLI sale con estado 1)
        """
        started = datetime.now(timezone.utc)
        t0 = time.perf_counter()
        settings.ensure_output_dir(self.out_dir)
        log_sweep_header(logger, f"🚀 Experimento {self.config.kind.value}", [
            f"n={self.config.dim}, B={total_mass_B(self.cfg):.6f}",
            f"salida: {self.out_dir}",
        ])
        self._handlers[self.config.kind]()
        passed = all(cert["valid"] for cert in self._certificates.values())
        summary = {
            "kind": self.config.kind.value,
            "config": self.config.model_dump(mode="json"),
            "version": __version__,
            "started_at": started.isoformat(),
            "elapsed_seconds": round(time.perf_counter() - t0, 3),
            "certificates": self._certificates,
            "results": self._results,
            "files": [p.name for p in self._files],
            "passed": passed,
        }
        write_json_atomic(to_jsonable(summary), self.out_dir / "summary.json")
        status = "✅ certificados válidos" if passed else "❌ certificados con errores"
        log_sweep_header(logger, status, [f"{k}: {'ok' if v['valid'] else v['errors']}"
                                          for k, v in self._certificates.items()])
        return RunResult(passed, self._files + [self.out_dir / "summary.json"], self._certificates, self._results)


def run_experiment(
    subcommand: str,
    config_path: Path,
    out: Optional[Path] = None,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> int:
    """
    Punto de entrada de la CLI: 0 si todos los certificados pasan, 1 ante
    fallo del solver o certificados inválidos, 2 ante errores de configuración.
    """
    overrides = {"seed": seed, "workers": workers, "output_dir": str(out) if out is not None else None}
    try:
        config = load_config(config_path, overrides)
    except ConfigError as e:
        logger.error(f"❌ {e}")
        print(f"config error: {e}")
        return 2
    if config.kind not in SUBCOMMAND_KINDS[subcommand]:
        message = f"config kind '{config.kind.value}' cannot run under subcommand '{subcommand}'"
        logger.error(f"❌ {message}")
        print(f"config error: field 'kind': {message}")
        return 2

    out_dir = Path(config.output_dir) if config.output_dir else settings.OUTPUT_DIR
    try:
        result = ExperimentRunner(config, out_dir).run()
    except SolverError as e:
        logger.error(f"❌ Fallo del solver: {e}")
        print(f"solver error: {e}")
        return 1
    return 0 if result.passed else 1
