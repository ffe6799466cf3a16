#!/usr/bin/env python3
"""
Tests for the pressure solvers: sweep identities, the tridiagonal solver,
agreement with dense elimination and second-order manufactured solutions
"""

import numpy as np
import pytest

from errors import ConfigurationError, InvalidArgumentError, SingularLineError
from grid import build_grid
from solvers import (
    Method,
    Norm,
    PoissonProblem,
    SolverConfig,
    adi_sweep,
    dense_solve,
    gauss_seidel_sweep,
    jacobi_sweep,
    manufactured_dirichlet,
    manufactured_neumann,
    max_error,
    parse_method,
    residual,
    slor_sweep,
    solve,
    solver_config,
    sor_sweep,
    thomas_solve,
)


def random_dirichlet(rng, nx, ny):
    grid = build_grid((float(nx), float(ny)), (nx, ny))
    rhs = np.where(grid.active, rng.uniform(-1.0, 1.0, grid.shape), 0.0)
    boundary = np.where(grid.active, 0.0, rng.uniform(-1.0, 1.0, grid.shape))
    return PoissonProblem(rhs=rhs, grid=grid, bc="dirichlet", boundary=boundary)


# -----------------------------
#        Configuration
# -----------------------------

def test_parse_method_accepts_aliases():
    assert parse_method("Gauss-Seidel") is Method.GS
    assert parse_method("mg") is Method.MULTIGRID
    assert solver_config(method="slorb").method is Method.SLORB


def test_unknown_method_lists_valid_solvers():
    with pytest.raises(ConfigurationError, match="valid solvers"):
        parse_method("conjugate-gradient")


def test_omega_outside_open_interval_is_rejected():
    with pytest.raises(ConfigurationError) as info:
        solver_config(method="sor", omega=2.0)
    assert "omega" in info.value.keys
    problem, _ = manufactured_neumann(4)
    with pytest.raises(ConfigurationError):
        sor_sweep(np.zeros(problem.grid.shape), problem, 0.0)


def test_problem_shape_must_match_grid():
    grid = build_grid((1.0, 1.0), (3, 3))
    with pytest.raises(InvalidArgumentError):
        PoissonProblem(rhs=np.zeros((3, 3)), grid=grid)


# -----------------------------
#        Sweep identities
# -----------------------------

def test_jacobi_sweep_leaves_input_untouched():
    problem, _ = manufactured_neumann(6)
    p = np.random.default_rng(1).standard_normal(problem.grid.shape)
    before = p.copy()
    out = jacobi_sweep(p, problem)
    np.testing.assert_array_equal(p, before)
    assert not np.array_equal(out, p)


@pytest.mark.parametrize("build, n", [(manufactured_neumann, 8), (manufactured_dirichlet, 7)])
def test_sor_at_unit_omega_is_gauss_seidel(build, n):
    problem, _ = build(n)
    gs_p, gs_trace = solve(problem, SolverConfig(method=Method.GS, tol=1e-14, max_iter=25))
    sor_p, sor_trace = solve(problem, SolverConfig(method=Method.SOR, omega=1.0, tol=1e-14, max_iter=25))
    np.testing.assert_array_equal(gs_p, sor_p)
    assert gs_trace.errors == sor_trace.errors


@pytest.mark.parametrize("build, n", [(manufactured_neumann, 8), (manufactured_dirichlet, 7)])
def test_line_variants_agree_at_unit_omega(build, n):
    problem, _ = build(n)
    a_p, a_trace = solve(problem, SolverConfig(method=Method.SLORA, omega=1.0, tol=1e-14, max_iter=25))
    b_p, b_trace = solve(problem, SolverConfig(method=Method.SLORB, omega=1.0, tol=1e-14, max_iter=25))
    np.testing.assert_array_equal(a_p, b_p)
    assert a_trace.errors == b_trace.errors


def test_gauss_seidel_sweep_uses_fresh_values():
    problem = random_dirichlet(np.random.default_rng(3), 3, 2)
    p = problem.initial_guess()
    expected = p.copy()
    for j in range(1, 3):
        for i in range(1, 4):
            expected[i, j] = (expected[i - 1, j] + expected[i + 1, j] + expected[i, j - 1] + expected[i, j + 1]
                              - problem.rhs[i, j]) / 4.0
    out = gauss_seidel_sweep(p, problem)
    assert out is p
    np.testing.assert_allclose(out, expected, rtol=0.0, atol=1e-14)


@pytest.mark.parametrize("sweep", [
    lambda p, prob: slor_sweep(p, prob, 1.0, "A"),
    lambda p, prob: slor_sweep(p, prob, 1.0, "B"),
    lambda p, prob: adi_sweep(p, prob, 1.0),
])
def test_line_sweeps_solve_a_single_row_exactly(sweep):
    problem = random_dirichlet(np.random.default_rng(8), 6, 1)
    p = sweep(problem.initial_guess(), problem)
    np.testing.assert_allclose(p, dense_solve(problem), rtol=0.0, atol=1e-12)


def test_unknown_line_variant():
    problem, _ = manufactured_neumann(4)
    with pytest.raises(ConfigurationError):
        slor_sweep(np.zeros(problem.grid.shape), problem, 1.0, "C")


def test_residual_of_constant_neumann_field_is_rhs():
    problem, _ = manufactured_neumann(6)
    r = residual(np.full(problem.grid.shape, 3.0), problem)
    np.testing.assert_allclose(r, problem.rhs, atol=1e-12)


def test_neumann_sweeps_fold_the_wall_into_the_diagonal():
    grid = build_grid((3.0, 2.0), (3, 2))
    rng = np.random.default_rng(5)
    problem = PoissonProblem(rhs=np.where(grid.active, rng.uniform(-1.0, 1.0, grid.shape), 0.0), grid=grid)
    p = np.where(grid.active, rng.standard_normal(grid.shape), 0.0)

    def coupled(q, i, j):
        near = [(a, b) for a, b in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)) if grid.active[a, b]]
        return sum(q[a, b] for a, b in near), len(near)

    expected = p.copy()
    for j in range(1, 3):
        for i in range(1, 4):
            total, count = coupled(expected, i, j)
            expected[i, j] = (total - problem.rhs[i, j]) / count
    np.testing.assert_allclose(gauss_seidel_sweep(p.copy(), problem), expected, rtol=0.0, atol=1e-14)

    jac = jacobi_sweep(p, problem)
    r = residual(p, problem)
    for i, j in zip(*np.nonzero(grid.active)):
        total, count = coupled(p, i, j)
        # Jacobi keeps the full diagonal and reads the missing neighbours as the old value
        assert jac[i, j] == pytest.approx((total + (4 - count) * p[i, j] - problem.rhs[i, j]) / 4.0, abs=1e-14)
        assert r[i, j] == pytest.approx(problem.rhs[i, j] - (total - count * p[i, j]), abs=1e-14)


# -----------------------------
#        Thomas algorithm
# -----------------------------

def test_thomas_matches_dense_solve():
    a = np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]])
    b = np.array([1.0, 2.0, 3.0])
    expected = np.linalg.solve(a, b)
    np.testing.assert_allclose(thomas_solve([1.0, 1.0], [2.0, 2.0, 2.0], [1.0, 1.0], b), expected)
    np.testing.assert_allclose(thomas_solve([0.0, 1.0, 1.0], [2.0, 2.0, 2.0], [1.0, 1.0, 0.0], b), expected)


def test_thomas_single_unknown():
    np.testing.assert_allclose(thomas_solve([], [4.0], [], [2.0]), [0.5])


def test_thomas_reports_zero_pivot_row():
    with pytest.raises(SingularLineError) as info:
        thomas_solve([1.0], [0.0, 1.0], [1.0], [1.0, 1.0])
    assert info.value.row == 0
    with pytest.raises(SingularLineError) as info:
        thomas_solve([1.0], [1.0, 1.0], [1.0], [1.0, 1.0])
    assert info.value.row == 1


def test_thomas_rejects_mismatched_bands():
    with pytest.raises(InvalidArgumentError):
        thomas_solve([1.0, 1.0, 1.0, 1.0], [2.0, 2.0], [1.0], [1.0, 1.0])


# -----------------------------
#         Solve driver
# -----------------------------

@pytest.mark.parametrize("method", list(Method))
def test_methods_agree_with_dense_elimination(method):
    rng = np.random.default_rng(2024)
    config = SolverConfig(method=method, omega=1.2, tol=1e-11, norm=Norm.RESIDUAL_MAX, max_iter=100000)
    for _ in range(10):
        nx, ny = rng.integers(2, 6, size=2)
        problem = random_dirichlet(rng, int(nx), int(ny))
        p, trace = solve(problem, config)
        assert trace.converged
        exact = dense_solve(problem)
        act = problem.active
        np.testing.assert_allclose(p[act], exact[act], rtol=0.0, atol=1e-9)
        np.testing.assert_array_equal(p[~act], problem.boundary[~act])


def test_neumann_solution_has_zero_mean():
    problem, _ = manufactured_neumann(8)
    p, trace = solve(problem, SolverConfig(method=Method.GS, tol=1e-8))
    assert trace.converged
    assert abs(p[problem.active].mean()) < 1e-12


def test_incompatible_neumann_rhs_still_converges():
    problem, _ = manufactured_neumann(8)
    shifted = PoissonProblem(rhs=np.where(problem.active, problem.rhs + 5.0, 0.0), grid=problem.grid)
    p, trace = solve(shifted, SolverConfig(method=Method.SOR, omega=1.5, tol=1e-8))
    q, _ = solve(problem, SolverConfig(method=Method.SOR, omega=1.5, tol=1e-8))
    assert trace.converged
    np.testing.assert_allclose(p, q, atol=1e-6)


@pytest.mark.parametrize("method", [Method.GS, Method.SLORB, Method.MULTIGRID])
def test_neumann_solution_ignores_a_constant_shift_of_the_guess(method):
    problem, _ = manufactured_neumann(16)
    p0 = np.random.default_rng(4).standard_normal(problem.grid.shape)
    config = SolverConfig(method=method, omega=1.2, tol=1e-10)
    p, _ = solve(problem, config, p0=p0)
    q, _ = solve(problem, config, p0=p0 + 7.0)
    act = problem.active
    np.testing.assert_allclose(q[act], p[act], rtol=0.0, atol=1e-9)


def test_line_sor_needs_fewer_iterations_than_gauss_seidel():
    problem, _ = manufactured_dirichlet(16)
    _, gs = solve(problem, SolverConfig(method=Method.GS, tol=1e-8))
    _, slor = solve(problem, SolverConfig(method=Method.SLORB, omega=1.0, tol=1e-8))
    assert gs.converged and slor.converged
    assert slor.iterations < gs.iterations


@pytest.mark.parametrize("omega", [1.0, 1.5])
def test_adi_needs_no_more_iterations_than_line_sor(omega):
    problem, _ = manufactured_dirichlet(16)
    _, adi = solve(problem, SolverConfig(method=Method.ADI, omega=omega, tol=1e-8))
    _, slorb = solve(problem, SolverConfig(method=Method.SLORB, omega=omega, tol=1e-8))
    assert adi.converged and slorb.converged
    assert adi.iterations <= slorb.iterations


def test_non_convergence_is_reported_not_raised():
    problem, _ = manufactured_neumann(16)
    _, trace = solve(problem, SolverConfig(method=Method.JACOBI, tol=1e-12, max_iter=3))
    assert not trace.converged
    assert trace.iterations == 3
    assert len(trace.residual_l2) == len(trace.elapsed) == 3


def test_exact_initial_guess_converges_at_once():
    problem, _ = manufactured_dirichlet(9)
    exact = dense_solve(problem)
    _, trace = solve(problem, SolverConfig(method=Method.SOR, omega=1.5, tol=1e-6), p0=exact)
    assert trace.iterations == 1
    assert trace.converged


def test_work_units_per_method():
    problem, _ = manufactured_neumann(8)
    _, adi = solve(problem, SolverConfig(method=Method.ADI, omega=1.0, max_iter=5, tol=1e-14))
    _, gs = solve(problem, SolverConfig(method=Method.GS, max_iter=5, tol=1e-14))
    assert adi.work_units == pytest.approx(2.0 * adi.iterations)
    assert gs.work_units == pytest.approx(gs.iterations)


def test_dense_solve_needs_dirichlet():
    problem, _ = manufactured_neumann(4)
    with pytest.raises(ConfigurationError):
        dense_solve(problem)


# -----------------------------
#    Manufactured solutions
# -----------------------------

@pytest.mark.parametrize("method", list(Method))
def test_neumann_error_is_second_order(method):
    config = SolverConfig(method=method, omega=1.0, tol=1e-7, norm=Norm.RESIDUAL_MAX, max_iter=40000)
    errors = []
    for n in (16, 32):
        problem, exact = manufactured_neumann(n)
        p, trace = solve(problem, config)
        assert trace.converged
        errors.append(max_error(p, exact, problem))
    assert 3.4 <= errors[0] / errors[1] <= 4.6


def test_dirichlet_error_is_second_order():
    config = SolverConfig(method=Method.MULTIGRID, tol=1e-9, norm=Norm.RESIDUAL_MAX)
    errors = []
    for n in (15, 31):
        problem, exact = manufactured_dirichlet(n)
        p, trace = solve(problem, config)
        assert trace.converged
        errors.append(max_error(p, exact, problem))
    assert 3.4 <= errors[0] / errors[1] <= 4.6
