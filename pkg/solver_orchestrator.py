#!/usr/bin/env python3
"""
Solver Orchestrator
Command-line entry point. Routes each subcommand to the module that serves it:
  run          time-march a case (ns_core) and write snapshots (field_io)
  race         race pressure solvers on one problem (bench)
  sweep-omega  sweep the relaxation parameter (bench)
  mms          manufactured-solution verification (solvers)

Exit status: 0 on success, 1 on any solver/config/output error, 2 on usage errors.
"""

import os
import sys
import logging
from typing import Any, Dict, List, Optional, Sequence

# --- Optional .env loader (safe if python-dotenv isn't installed) ---
try:
    if os.path.exists(".env"):
        from dotenv import load_dotenv  # type: ignore
        load_dotenv()
except Exception:
    pass

import bench
from case_config import CaseConfig, case_boundaries, case_grid, env_default, load_config, save_config
from errors import ConfigurationError, NSBenchError, validated
from field_io import FieldSnapshot, MonitorWriter, ensure_dir, write_snapshot
from grid import format_mask, initial_state
from ns_core import derived_fields, march, monitor_cell, stability_check
from solvers import manufactured_dirichlet, manufactured_neumann, max_error, parse_method, solve, warm_up

log = logging.getLogger("nsbench")


# -----------------------------
#         Flag handling
# -----------------------------

def _pair(text: str, sep: str, kind=float) -> tuple:
    parts = text.split(sep)
    if len(parts) != 2:
        raise ConfigurationError(f"expected two values separated by {sep!r}, got {text!r}", ["flags"])
    try:
        return tuple(kind(p) for p in parts)
    except ValueError as ex:
        raise ConfigurationError(f"cannot parse {text!r}: {ex}", ["flags"]) from ex


def _solver_names(args) -> List[str]:
    """Methods named by --solvers or --solver; empty when neither is given."""
    raw = args.solvers or args.solver or ""
    names = [name.strip() for name in raw.split(",") if name.strip()]
    for name in names:
        parse_method(name)
    return names


def _solver_flags(args, method: Optional[str] = None) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    if method is not None:
        values["method"] = method
    for key, attr in (("omega", "omega"), ("tol", "tol"), ("max_iter", "max_iter"), ("norm", "norm")):
        value = getattr(args, attr)
        if value is not None:
            values[key] = value
    multigrid: Dict[str, Any] = {}
    if args.mg_levels is not None:
        multigrid["levels"] = args.mg_levels
    if args.mg_smooth:
        multigrid["pre_smooth"], multigrid["post_smooth"] = _pair(args.mg_smooth, ":", int)
    if multigrid:
        values["multigrid"] = multigrid
    return values


def config_from_args(args) -> CaseConfig:
    names = _solver_names(args)
    monitor = _pair(args.monitor, ",", int) if args.monitor else None
    return load_config(
        args.config,
        case=args.case,
        nx=args.nx,
        ny=args.ny,
        re=args.re,
        vw=args.vw,
        dt=args.dt,
        cycles=args.cycles,
        anim_freq=args.anim_freq,
        solver=_solver_flags(args, names[0] if names else None),
        out_dir=args.out_dir,
        mask=args.mask,
        monitor=monitor,
        force=args.force or None,
        legacy_diffusion=args.legacy_diffusion or None,
        steady_tol=args.steady_tol,
        steady_window=args.steady_window,
        mms_bc=args.bc,
    )


def experiment_from_args(args, config: CaseConfig) -> bench.ExperimentSpec:
    source = {"cavity": "cavity-first-step", "chamber": "chamber-first-step", "poisson-mms": "manufactured"}[config.case]
    names = _solver_names(args) or [config.solver.method.value]
    configs = [config.solver.model_copy(update={"method": parse_method(name)}) for name in names]
    sweep: Dict[str, float] = {}
    if args.omega_sweep:
        parts = args.omega_sweep.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"--omega-sweep expects start:stop:step, got {args.omega_sweep!r}", ["omega_sweep"])
        try:
            sweep = dict(zip(("sweep_start", "sweep_stop", "sweep_step"), (float(p) for p in parts)))
        except ValueError as ex:
            raise ConfigurationError(f"cannot parse --omega-sweep: {ex}", ["omega_sweep"]) from ex
    bc = config.mms_bc if config.mms_bc != "auto" else ("dirichlet" if config.nx % 2 else "neumann")
    return validated(
        bench.ExperimentSpec,
        source=source,
        nx=config.nx,
        ny=config.ny,
        re=config.re,
        bc=bc,
        configs=configs,
        repetitions=args.repetitions,
        **sweep,
    )


# -----------------------------
#          Subcommands
# -----------------------------

def run_case(config: CaseConfig) -> int:
    grid = case_grid(config)
    bcs = case_boundaries(config)
    params = config.time_step()
    report = stability_check(params, grid)
    out = ensure_dir(config.out_dir)
    save_config(config, out / "case.json")
    if config.case == "chamber":
        (out / "mask.txt").write_text(format_mask(grid.mask), encoding="utf-8")

    print(f"🧮 {config.case}: {grid.mx}x{grid.my} cells, {grid.active_count} active, Re={config.re:g}, "
          f"dt={params.dt:.4g}, dt/(Re h^2)={report.ratio:.4g}, CFL={report.cfl:.4g}, solver={config.solver.label}")
    warm_up()
    state = initial_state(grid, bcs)
    for name, field in (("p", state.p), ("u", state.u), ("v", state.v)):
        write_snapshot(FieldSnapshot.from_field(name, field, 0), out)

    mi, mj = monitor_cell(grid, config.monitor)
    last = None
    with MonitorWriter(out) as monitor:
        for record in march(state, params, grid, bcs, config.solver, config.monitor, config.steady_tol, config.steady_window):
            monitor.append(record.time, record.monitor_u)
            log.debug(
                "cycle %d t=%.5g u[%d,%d]=%.6g poisson iterations=%d",
                record.cycle, record.time, mi + 1, mj + 1, record.monitor_u, record.trace.iterations,
            )
            if record.cycle % config.anim_freq == 0:
                log.info("cycle %d t=%.5g monitor u=%.6g", record.cycle, record.time, record.monitor_u)
                for name, field in (("p", record.state.p), ("u", record.state.u), ("v", record.state.v)):
                    write_snapshot(FieldSnapshot.from_field(name, field, record.cycle), out)
            last = record

    state = last.state if last is not None else state
    psi, vor = derived_fields(state, grid)
    for name, field in (("p", state.p), ("u", state.u), ("v", state.v), ("stream", psi), ("vorticity", vor)):
        write_snapshot(FieldSnapshot.from_field(name, field), out)
    cycles = last.cycle if last is not None else 0
    print(f"✅ {cycles} cycles done, results in {out}")
    return 0


def run_race(args, config: CaseConfig) -> int:
    experiment = experiment_from_args(args, config)
    report = bench.race(experiment)
    paths = bench.emit_report(report, config.out_dir)
    for row in report.rows:
        flag = "✅" if row.converged else "❌"
        print(f"{flag} {row.method:<10} w={row.omega:<5g} {row.iterations:>7d} it "
              f"{row.work_units:>10.1f} wu {row.wall_clock_s:>9.4f} s")
    print(f"📁 {paths[0]}")
    return 0


def run_sweep(args, config: CaseConfig) -> int:
    experiment = experiment_from_args(args, config)
    problem = bench.build_problem(experiment)
    for cfg in experiment.configs:
        result = bench.relaxation_sweep(experiment, cfg.method, problem, cfg)
        path = bench.write_sweep(result, ensure_dir(config.out_dir))
        print(f"🧮 {result.method}: best w={result.best_omega:g} ({result.best_iterations} iterations) -> {path}")
    return 0


def run_mms(config: CaseConfig) -> int:
    bc = config.mms_bc if config.mms_bc != "auto" else ("dirichlet" if config.nx % 2 else "neumann")
    build = manufactured_dirichlet if bc == "dirichlet" else manufactured_neumann
    warm_up()
    errors = []
    for nx in (config.nx, 2 * config.nx + 1 if bc == "dirichlet" else 2 * config.nx):
        problem, exact = build(nx)
        p, trace = solve(problem, config.solver)
        errors.append(max_error(p, exact, problem))
        factors = ", ".join(f"{f:.3f}" for f in trace.reduction_factors()[:12])
        flag = "✅" if trace.converged else "❌"
        print(f"{flag} {bc} {nx}x{nx} {config.solver.label}: {trace.iterations} iterations, "
              f"max error {errors[-1]:.4e}")
        print(f"   reduction factors: {factors}")
    print(f"🧮 error ratio on refinement: {errors[0] / errors[1]:.3f}")
    return 0


# -----------------------------
#              CLI
# -----------------------------

def build_parser():
    import argparse

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON case file; flags override its keys")
    common.add_argument("--case", choices=("cavity", "chamber", "poisson-mms"))
    common.add_argument("--nx", type=int)
    common.add_argument("--ny", type=int)
    common.add_argument("--re", type=float)
    common.add_argument("--vw", type=float, help="Lid speed")
    common.add_argument("--dt", type=float)
    common.add_argument("--cycles", type=int)
    common.add_argument("--anim-freq", type=int)
    common.add_argument("--solver", help="Pressure solver name")
    common.add_argument("--solvers", help="Comma-separated solver names")
    common.add_argument("--omega", type=float)
    common.add_argument("--omega-sweep", help="start:stop:step")
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", type=int)
    common.add_argument("--norm", choices=("max-change", "residual-l2", "residual-max"))
    common.add_argument("--mg-levels", type=int)
    common.add_argument("--mg-smooth", help="pre:post smoothing sweeps")
    common.add_argument("--out-dir", default=None)
    common.add_argument("--mask", help="Mask file for the chamber case")
    common.add_argument("--monitor", help="Monitor cell i,j (1-based)")
    common.add_argument("--repetitions", type=int, default=1)
    common.add_argument("--force", action="store_true", help="Run even when dt breaks the stability bound")
    common.add_argument("--paper-code-compat", "--legacy-diffusion", dest="legacy_diffusion", action="store_true",
                        help="Scale the x-diffusion of v by 1/dy^2 as older solvers did")
    common.add_argument("--steady-tol", type=float)
    common.add_argument("--steady-window", type=int)
    common.add_argument("--bc", choices=("auto", "neumann", "dirichlet"), help="Boundary type for mms")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default from NSBENCH_LOG_LEVEL)")

    parser = argparse.ArgumentParser(
        prog="solver_orchestrator",
        description="Solver Orchestrator - projection-method runs and pressure-solver benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="Time-march a case")
    sub.add_parser("race", parents=[common], help="Race solvers on one Poisson problem")
    sub.add_parser("sweep-omega", parents=[common], help="Sweep the relaxation parameter")
    sub.add_parser("mms", parents=[common], help="Manufactured-solution verification")
    return parser


_DEFAULT_CASE = {"run": "cavity", "race": "cavity", "sweep-omega": "cavity", "mms": "poisson-mms"}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as ex:
        return int(ex.code or 0)

    level = (args.log_level or env_default("LOG_LEVEL", "INFO")).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(name)s: %(message)s")
    if args.case is None and args.config is None:
        args.case = _DEFAULT_CASE[args.command]

    print(f"🤖 Orchestrator: routing to {args.command}...")
    try:
        config = config_from_args(args)
        if args.command == "run":
            return run_mms(config) if config.case == "poisson-mms" else run_case(config)
        if args.command == "race":
            return run_race(args, config)
        if args.command == "sweep-omega":
            return run_sweep(args, config)
        return run_mms(config)
    except NSBenchError as ex:
        print(f"❌ Error: {ex}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
