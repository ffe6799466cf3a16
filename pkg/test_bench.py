#!/usr/bin/env python3
"""
Tests for the solver bench: problem sources, races, relaxation sweeps and reports
"""

import numpy as np
import pytest

import bench
from bench import ComparisonReport, ExperimentSpec, build_problem, emit_report, race, read_report, relaxation_sweep
from errors import ConfigurationError, validated
from field_io import read_table
from solvers import ConvergenceTrace, Method, SolverConfig, solve


def spec(**values):
    return validated(ExperimentSpec, **values)


# -----------------------------
#          Experiments
# -----------------------------

def test_default_sweep_grid():
    omegas = ExperimentSpec().omegas()
    assert omegas[0] == 1.0
    assert omegas[-1] == pytest.approx(1.95)
    assert len(omegas) == 20


def test_sweep_range_must_stay_below_two():
    with pytest.raises(ConfigurationError):
        spec(sweep_start=1.0, sweep_stop=2.0)
    with pytest.raises(ConfigurationError):
        spec(sweep_start=1.5, sweep_stop=1.2)


def test_cavity_first_step_problem():
    problem = build_problem(spec(source="cavity-first-step", nx=8))
    assert problem.bc == "neumann"
    assert np.abs(problem.rhs).max() > 0.0
    assert abs(problem.rhs[problem.active].sum()) < 1e-9


def test_chamber_first_step_problem():
    problem = build_problem(spec(source="chamber-first-step"))
    assert problem.grid.active_count == 429
    assert problem.grid.is_masked
    assert abs(problem.rhs[problem.active].sum()) < 1e-8 * np.abs(problem.rhs).max()


def test_manufactured_source_honours_bc():
    assert build_problem(spec(source="manufactured", nx=7, bc="dirichlet")).dirichlet
    assert not build_problem(spec(source="manufactured", nx=8)).dirichlet


# -----------------------------
#             Race
# -----------------------------

def test_race_rows_are_sorted_by_work():
    experiment = spec(
        source="manufactured",
        nx=16,
        configs=[SolverConfig(method=m, omega=1.5, tol=1e-6) for m in (Method.JACOBI, Method.SOR, Method.MULTIGRID)],
    )
    report = race(experiment)
    assert [r.method for r in report.rows] == ["multigrid", "sor", "jacobi"]
    assert all(r.converged for r in report.rows)
    assert report.row("sor").omega == 1.5
    with pytest.raises(KeyError):
        report.row("adi")


def test_exact_initial_guess_needs_at_most_one_iteration():
    experiment = spec(source="cavity-first-step", nx=16, configs=[SolverConfig(method=Method.GS, tol=1e-6)])
    problem = build_problem(experiment)
    p, trace = solve(problem, SolverConfig(method=Method.GS, tol=1e-10))
    assert trace.converged
    report = race(experiment, problem, p0=p)
    assert report.rows[0].iterations <= 1


def test_reported_time_is_the_median(monkeypatch):
    times = iter([5.0, 1.0, 4.0, 2.0, 3.0])

    def fake_solve(problem, config, p0=None):
        trace = ConvergenceTrace(method=config.method.value, omega=config.omega, norm="max-change", tol=config.tol)
        trace.errors.append(1e-9)
        trace.work.append(1.0)
        trace.converged = True
        trace.wall_clock = next(times)
        return np.zeros(problem.grid.shape), trace

    experiment = spec(source="manufactured", nx=4, repetitions=5, configs=[SolverConfig(method=Method.GS)])
    problem = build_problem(experiment)
    monkeypatch.setattr(bench, "solve", fake_solve)
    report = race(experiment, problem)
    assert report.rows[0].wall_clock_s == 3.0


def test_gauss_seidel_halves_jacobi_iterations():
    experiment = spec(
        source="cavity-first-step",
        nx=60,
        configs=[SolverConfig(method=m, tol=1e-6, max_iter=100000) for m in (Method.JACOBI, Method.GS)],
    )
    report = race(experiment)
    jacobi, gs = report.row("jacobi"), report.row("gs")
    assert jacobi.converged and gs.converged
    assert 1.7 <= jacobi.iterations / gs.iterations <= 2.3


# -----------------------------
#        Relaxation sweep
# -----------------------------

def test_single_omega_sweep_returns_it():
    experiment = spec(source="manufactured", nx=8, sweep_start=1.3, sweep_stop=1.3)
    result = relaxation_sweep(experiment, "sor")
    assert result.omegas == [1.3]
    assert result.best_omega == 1.3


def test_sweeping_a_method_without_omega_fails():
    with pytest.raises(ConfigurationError):
        relaxation_sweep(spec(source="manufactured", nx=8), Method.MULTIGRID)


def test_ties_go_to_the_smaller_omega(monkeypatch):
    monkeypatch.setattr(bench, "_iterations", lambda problem, config: 10)
    experiment = spec(source="manufactured", nx=4, sweep_start=1.2, sweep_stop=1.4, sweep_step=0.1)
    result = relaxation_sweep(experiment, Method.ADI)
    assert result.iterations == [10, 10, 10]
    assert result.best_omega == 1.2


def test_coarse_sor_sweep_finds_the_fine_optimum():
    problem = build_problem(spec(source="manufactured", nx=16, bc="dirichlet"))
    base = SolverConfig(method=Method.SOR, tol=1e-10)
    coarse = relaxation_sweep(spec(source="manufactured", nx=16, bc="dirichlet"), Method.SOR, problem, base)
    fine = relaxation_sweep(
        spec(source="manufactured", nx=16, bc="dirichlet", sweep_step=0.005, workers=4), Method.SOR, problem, base
    )
    assert len(fine.omegas) == 191
    assert abs(coarse.best_omega - fine.best_omega) <= 0.05 + 1e-9


def test_point_sor_wants_more_relaxation_than_line_sor():
    experiment = spec(source="manufactured", nx=15, bc="dirichlet")
    problem = build_problem(experiment)
    sor = relaxation_sweep(experiment, Method.SOR, problem, SolverConfig(method=Method.SOR, tol=1e-8))
    slorb = relaxation_sweep(experiment, Method.SLORB, problem, SolverConfig(method=Method.SLORB, tol=1e-8))
    assert sor.best_omega > slorb.best_omega


def test_chamber_point_sor_relaxes_more_than_line_sor():
    experiment = spec(source="chamber-first-step")
    problem = build_problem(experiment)
    sor = relaxation_sweep(experiment, Method.SOR, problem)
    slorb = relaxation_sweep(experiment, Method.SLORB, problem)
    assert 1.0 < slorb.best_omega < sor.best_omega < 1.95


def test_cavity_point_sor_relaxes_more_than_line_sor():
    experiment = spec(source="cavity-first-step", nx=32)
    problem = build_problem(experiment)
    sor = relaxation_sweep(experiment, Method.SOR, problem)
    slorb = relaxation_sweep(experiment, Method.SLORB, problem)
    assert sor.best_omega > slorb.best_omega


@pytest.mark.parametrize("method", [Method.SOR, Method.SLORA, Method.SLORB, Method.ADI])
def test_cavity_relaxation_curve_has_an_interior_minimum(method):
    result = relaxation_sweep(spec(source="cavity-first-step", nx=32), method)
    assert 1.0 < result.best_omega < 1.95
    assert result.best_iterations < result.iterations[0]
    assert result.best_iterations < result.iterations[-1]


def test_work_ordering_at_unit_omega_on_the_cavity_step():
    methods = (Method.JACOBI, Method.GS, Method.SLORB, Method.MULTIGRID)
    experiment = spec(
        source="cavity-first-step",
        nx=32,
        configs=[SolverConfig(method=m, omega=1.0, tol=1e-6, max_iter=100000) for m in methods],
    )
    report = race(experiment)
    assert all(r.converged for r in report.rows)
    jacobi, gs, slorb, mg = (report.row(m.value) for m in methods)
    assert jacobi.iterations > gs.iterations
    assert gs.work_units >= slorb.work_units >= mg.work_units


@pytest.mark.slow
def test_method_ordering_on_the_cavity():
    methods = (Method.JACOBI, Method.GS, Method.SOR, Method.SLORB, Method.ADI, Method.MULTIGRID)
    experiment = spec(
        source="cavity-first-step",
        nx=64,
        configs=[SolverConfig(method=m, tol=1e-6, max_iter=100000 if m in (Method.JACOBI, Method.GS) else 20000)
                 for m in methods],
    )
    report = bench.optimal_race(experiment)
    work = {r.method: r.work_units for r in report.rows}
    assert work["multigrid"] < min(work["slorb"], work["adi"])
    assert min(work["slorb"], work["adi"]) < work["sor"] < work["gs"] < work["jacobi"]
    assert set(report.sweeps) == {"sor", "slorb", "adi"}


# -----------------------------
#            Reports
# -----------------------------

def test_empty_report_has_only_a_header(tmp_path):
    paths = emit_report(ComparisonReport(), tmp_path)
    assert len(paths) == 1
    assert paths[0].read_text(encoding="utf-8").strip() == ",".join(bench.REPORT_COLUMNS)
    assert read_report(paths[0]) == []


def test_report_and_traces_round_trip(tmp_path):
    experiment = spec(
        source="manufactured",
        nx=8,
        configs=[SolverConfig(method=Method.JACOBI, tol=1e-5), SolverConfig(method=Method.GS, tol=1e-5)],
    )
    report = race(experiment)
    paths = emit_report(report, tmp_path)
    assert sorted(p.name for p in paths) == ["report.csv", "trace_gs_w1.csv", "trace_jacobi_w1.csv"]
    assert read_report(tmp_path / "report.csv") == report.rows
    trace = read_table(tmp_path / "trace_gs_w1.csv")
    assert len(trace) == report.row("gs").iterations
    assert list(trace[0]) == list(bench.TRACE_COLUMNS)


def test_unknown_report_format(tmp_path):
    with pytest.raises(ConfigurationError):
        emit_report(ComparisonReport(), tmp_path, fmt="xlsx")
