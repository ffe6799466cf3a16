#!/usr/bin/env python3
"""
Solver Bench
Races the pressure solvers on one fixed Poisson problem, sweeps the
relaxation parameter of the relaxed methods, and writes the comparison
table with one convergence trace per method.

Timings are wall-clock medians over repetitions, measured inside `solve`
so no I/O or logging lands in the timed region.
"""

import asyncio
import logging
import re
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from case_config import chamber_mask, CHAMBER_SPACING
from errors import ConfigurationError
from field_io import ensure_dir, read_table, write_table
from grid import BoundarySpec, build_grid, initial_state
from ns_core import TimeStepParams, corner_products, intermediate_velocities, poisson_rhs, stable_dt
from solvers import (
    ConvergenceTrace,
    Method,
    PoissonProblem,
    SolverConfig,
    manufactured_dirichlet,
    manufactured_neumann,
    parse_method,
    solve,
    warm_up,
)

log = logging.getLogger(__name__)

RELAXED = (Method.SOR, Method.SLORA, Method.SLORB, Method.ADI)
REPORT_COLUMNS = ("method", "omega", "iterations", "work_units", "wall_clock_s", "converged")
TRACE_COLUMNS = ("iteration", "error", "residual_l2", "elapsed_s")


# -----------------------------
#          Experiment
# -----------------------------

class ExperimentSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: Literal["cavity-first-step", "chamber-first-step", "manufactured"] = "cavity-first-step"
    nx: int = Field(60, ge=1)
    ny: Optional[int] = Field(None, ge=1)
    re: float = Field(100.0, gt=0.0)
    bc: Literal["neumann", "dirichlet"] = "neumann"
    configs: List[SolverConfig] = Field(default_factory=list)
    sweep_start: float = 1.0
    sweep_stop: float = 1.95
    sweep_step: float = Field(0.05, gt=0.0)
    repetitions: int = Field(1, ge=1)
    workers: Optional[int] = Field(None, ge=1, description="Threads for the relaxation sweep")

    @model_validator(mode="after")
    def _sweep_range(self) -> "ExperimentSpec":
        if not (0.0 < self.sweep_start <= self.sweep_stop < 2.0):
            raise ValueError("sweep range must satisfy 0 < start <= stop < 2")
        return self

    def omegas(self) -> List[float]:
        count = int(np.floor((self.sweep_stop - self.sweep_start) / self.sweep_step + 1e-9)) + 1
        return [round(self.sweep_start + k * self.sweep_step, 12) for k in range(count)]


def build_problem(spec: ExperimentSpec) -> PoissonProblem:
    """The fixed Poisson problem every method of an experiment solves."""
    if spec.source == "manufactured":
        build = manufactured_dirichlet if spec.bc == "dirichlet" else manufactured_neumann
        return build(spec.nx, spec.ny)[0]

    if spec.source == "cavity-first-step":
        grid = build_grid((1.0, 1.0), (spec.nx, spec.ny or spec.nx))
        bcs = BoundarySpec.cavity(1.0)
    else:
        mask = chamber_mask()
        grid = build_grid(
            ((mask.shape[0] - 2) * CHAMBER_SPACING, (mask.shape[1] - 2) * CHAMBER_SPACING),
            (mask.shape[0] - 2, mask.shape[1] - 2),
            mask,
        )
        bcs = BoundarySpec(wall_speed=0.0, inflow_speed=1.0)
    state = initial_state(grid, bcs)
    params = TimeStepParams(re=spec.re, dt=stable_dt(spec.re, grid))
    inter = intermediate_velocities(state, corner_products(state), params, grid)
    return PoissonProblem(rhs=poisson_rhs(inter, params, grid), grid=grid, bc="neumann")


# -----------------------------
#            Report
# -----------------------------

@dataclass
class ReportRow:
    method: str
    omega: float
    iterations: int
    work_units: float
    wall_clock_s: float
    converged: bool
    trace: Optional[ConvergenceTrace] = field(default=None, compare=False, repr=False)


@dataclass
class SweepResult:
    method: str
    omegas: List[float]
    iterations: List[int]
    best_omega: float
    best_iterations: int


@dataclass
class ComparisonReport:
    rows: List[ReportRow] = field(default_factory=list)
    sweeps: Dict[str, SweepResult] = field(default_factory=dict)

    def row(self, method: str) -> ReportRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


def _run_timed(problem: PoissonProblem, config: SolverConfig, repetitions: int, p0=None) -> ReportRow:
    times = []
    trace: Optional[ConvergenceTrace] = None
    for _ in range(repetitions):
        _, trace = solve(problem, config, p0)
        times.append(trace.wall_clock)
    if not trace.converged:
        log.warning("%s did not converge within %d iterations", config.label, config.max_iter)
    return ReportRow(
        method=config.method.value,
        omega=config.omega,
        iterations=trace.iterations,
        work_units=trace.work_units,
        wall_clock_s=statistics.median(times),
        converged=trace.converged,
        trace=trace,
    )


def race(spec: ExperimentSpec, problem: Optional[PoissonProblem] = None, p0: Optional[np.ndarray] = None) -> ComparisonReport:
    """Solve one problem with every configured method from the same initial guess.

    Methods run one after another on the calling thread. Rows come back
    sorted by work units.
    """
    problem = problem or build_problem(spec)
    warm_up()
    rows = []
    for config in spec.configs:
        row = _run_timed(problem, config, spec.repetitions, p0)
        log.info(
            "%-16s %6d iterations %9.1f work units %8.4f s converged=%s",
            config.label, row.iterations, row.work_units, row.wall_clock_s, row.converged,
        )
        rows.append(row)
    rows.sort(key=lambda r: r.work_units)
    return ComparisonReport(rows=rows)


# -----------------------------
#       Relaxation sweep
# -----------------------------

def _iterations(problem: PoissonProblem, config: SolverConfig) -> int:
    _, trace = solve(problem, config)
    return trace.iterations if trace.converged else config.max_iter


async def _sweep(problem: PoissonProblem, configs: Sequence[SolverConfig], workers: Optional[int]) -> List[int]:
    gate = asyncio.Semaphore(workers) if workers else None

    async def one(config: SolverConfig) -> int:
        if gate is None:
            return await asyncio.to_thread(_iterations, problem, config)
        async with gate:
            return await asyncio.to_thread(_iterations, problem, config)

    return await asyncio.gather(*(one(c) for c in configs))


def relaxation_sweep(
    spec: ExperimentSpec,
    method: Union[str, Method],
    problem: Optional[PoissonProblem] = None,
    base: Optional[SolverConfig] = None,
) -> SweepResult:
    """Iterations for every omega of the sweep; the minimum wins, ties go to the smaller omega.

    Runs that do not converge count as max_iter.
    """
    method = parse_method(method) if isinstance(method, str) else method
    if method not in RELAXED:
        raise ConfigurationError(f"{method.value} has no relaxation parameter to sweep", ["solver"])
    problem = problem or build_problem(spec)
    base = base or next((c for c in spec.configs if c.method is method), SolverConfig(method=method))
    omegas = spec.omegas()
    configs = [base.model_copy(update={"method": method, "omega": w}) for w in omegas]
    warm_up()
    iterations = asyncio.run(_sweep(problem, configs, spec.workers))

    best = 0
    for k in range(1, len(omegas)):
        if iterations[k] < iterations[best]:
            best = k
    log.info("%s: best omega %.3g with %d iterations", method.value, omegas[best], iterations[best])
    return SweepResult(
        method=method.value,
        omegas=omegas,
        iterations=list(iterations),
        best_omega=omegas[best],
        best_iterations=iterations[best],
    )


def optimal_race(spec: ExperimentSpec, problem: Optional[PoissonProblem] = None) -> ComparisonReport:
    """Race with every relaxed method at the omega its own sweep found best."""
    problem = problem or build_problem(spec)
    sweeps: Dict[str, SweepResult] = {}
    configs = []
    for config in spec.configs:
        if config.method in RELAXED:
            sweep = sweeps.get(config.method.value) or relaxation_sweep(spec, config.method, problem, config)
            sweeps[config.method.value] = sweep
            config = config.model_copy(update={"omega": sweep.best_omega})
        configs.append(config)
    report = race(spec.model_copy(update={"configs": configs}), problem)
    report.sweeps = sweeps
    return report


# -----------------------------
#            Output
# -----------------------------

def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", text).strip("_")


def trace_filename(row: ReportRow) -> str:
    return f"trace_{_slug(row.method)}_w{row.omega:g}.csv"


def emit_report(report: ComparisonReport, out_dir: Union[str, Path], fmt: str = "csv") -> List[Path]:
    """Write report.csv, one trace CSV per row, and one CSV per omega sweep."""
    if fmt != "csv":
        raise ConfigurationError(f"unsupported report format {fmt!r}", ["format"])
    out = ensure_dir(out_dir)
    written = [
        write_table(
            out / "report.csv",
            REPORT_COLUMNS,
            ([r.method, r.omega, r.iterations, r.work_units, r.wall_clock_s, r.converged] for r in report.rows),
        )
    ]
    for r in report.rows:
        if r.trace is None:
            continue
        t = r.trace
        written.append(
            write_table(
                out / trace_filename(r),
                TRACE_COLUMNS,
                ((k + 1, t.errors[k], t.residual_l2[k], t.elapsed[k]) for k in range(t.iterations)),
            )
        )
    for sweep in report.sweeps.values():
        written.append(write_sweep(sweep, out))
    return written


def write_sweep(sweep: SweepResult, out_dir: Union[str, Path]) -> Path:
    return write_table(
        Path(out_dir) / f"omega_sweep_{_slug(sweep.method)}.csv",
        ("omega", "iterations"),
        zip(sweep.omegas, sweep.iterations),
    )


def read_report(path: Union[str, Path]) -> List[ReportRow]:
    rows = []
    for rec in read_table(path):
        try:
            rows.append(
                ReportRow(
                    method=rec["method"],
                    omega=float(rec["omega"]),
                    iterations=int(rec["iterations"]),
                    work_units=float(rec["work_units"]),
                    wall_clock_s=float(rec["wall_clock_s"]),
                    converged=rec["converged"] == "True",
                )
            )
        except (KeyError, ValueError) as ex:
            raise ConfigurationError(f"malformed report row in {path}: {ex}", ["report"]) from ex
    return rows


# -----------------------------
#              CLI
# -----------------------------
if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Solver Bench - race every method on the cavity first step.")
    parser.add_argument("--nx", type=int, default=60)
    parser.add_argument("--out-dir", default="results/bench")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    experiment = ExperimentSpec(
        nx=args.nx, configs=[SolverConfig(method=m, omega=1.5 if m in RELAXED else 1.0) for m in Method]
    )
    for path in emit_report(race(experiment), args.out_dir):
        print(f"📁 {path}")
