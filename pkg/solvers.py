#!/usr/bin/env python3
"""
Pressure Solvers
Six interchangeable iterative methods for the discrete pressure Poisson
equation behind one `solve` driver: Jacobi, Gauss-Seidel, SOR, line SOR in
two relaxation placements (SLORA / SLORB), ADI, and geometric multigrid.

Usage:
  python solvers.py --method sor --omega 1.7 --nx 32
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

import poisson_kernels as kernels
from errors import ConfigurationError, InvalidArgumentError, SingularLineError, validated
from grid import StaggeredGrid, build_grid

log = logging.getLogger(__name__)


# -----------------------------
#        Configuration
# -----------------------------

class Method(str, Enum):
    JACOBI = "jacobi"
    GS = "gs"
    SOR = "sor"
    SLORA = "slora"
    SLORB = "slorb"
    ADI = "adi"
    MULTIGRID = "multigrid"


class Norm(str, Enum):
    MAX_CHANGE = "max-change"
    RESIDUAL_L2 = "residual-l2"
    RESIDUAL_MAX = "residual-max"


_ALIASES = {
    "gauss-seidel": Method.GS,
    "gaussseidel": Method.GS,
    "mg": Method.MULTIGRID,
}


def parse_method(name: str) -> Method:
    key = name.strip().lower()
    if key in _ALIASES:
        return _ALIASES[key]
    try:
        return Method(key)
    except ValueError:
        valid = ", ".join(m.value for m in Method)
        raise ConfigurationError(f"unknown solver {name!r}; valid solvers: {valid}", ["solver"]) from None


class MultigridConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    levels: Optional[int] = Field(None, ge=1, description="Grids in the hierarchy; None coarsens as far as possible")
    pre_smooth: int = Field(2, ge=0)
    post_smooth: int = Field(2, ge=0)
    coarse_sweeps: int = Field(50, ge=1)


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: Method = Method.ADI
    omega: float = Field(1.0, gt=0.0, lt=2.0)
    tol: float = Field(1e-6, gt=0.0)
    max_iter: int = Field(20000, ge=1)
    norm: Norm = Norm.MAX_CHANGE
    multigrid: MultigridConfig = MultigridConfig()

    @model_validator(mode="before")
    @classmethod
    def _method_alias(cls, data):
        if isinstance(data, dict) and isinstance(data.get("method"), str):
            data = dict(data, method=parse_method(data["method"]))
        return data

    @property
    def label(self) -> str:
        if self.method in (Method.SOR, Method.SLORA, Method.SLORB, Method.ADI):
            return f"{self.method.value}(w={self.omega:g})"
        return self.method.value


def solver_config(**values) -> SolverConfig:
    return validated(SolverConfig, **values)


def _check_omega(omega: float) -> None:
    if not 0.0 < omega < 2.0:
        raise ConfigurationError(f"relaxation parameter {omega} outside (0, 2)", ["omega"])


# -----------------------------
#          The problem
# -----------------------------

@dataclass
class PoissonProblem:
    """Lap(p) = rhs on the active cells of `grid`.

    bc="neumann": zero normal gradient on every boundary (ghost copy).
    bc="dirichlet": non-active cells of `boundary` hold fixed values.
    """

    rhs: np.ndarray
    grid: StaggeredGrid
    bc: Literal["neumann", "dirichlet"] = "neumann"
    boundary: Optional[np.ndarray] = None

    def __post_init__(self):
        self.rhs = np.ascontiguousarray(self.rhs, dtype=float)
        if self.rhs.shape != self.grid.shape:
            raise InvalidArgumentError(f"rhs shape {self.rhs.shape} does not match grid {self.grid.shape}")
        if self.bc not in ("neumann", "dirichlet"):
            raise ConfigurationError(f"unknown boundary condition {self.bc!r}", ["bc"])
        if self.boundary is not None:
            self.boundary = np.ascontiguousarray(self.boundary, dtype=float)
            if self.boundary.shape != self.grid.shape:
                raise InvalidArgumentError("boundary values do not match the grid")
        self.active = np.ascontiguousarray(self.grid.active)

    @property
    def dirichlet(self) -> bool:
        return self.bc == "dirichlet"

    @property
    def idx2(self) -> float:
        return 1.0 / self.grid.dx ** 2

    @property
    def idy2(self) -> float:
        return 1.0 / self.grid.dy ** 2

    def compatible(self) -> "PoissonProblem":
        """Neumann problems lose the RHS mean so a solution exists; Dirichlet ones are returned as is."""
        if self.dirichlet:
            return self
        mean = float(self.rhs[self.active].mean()) if self.active.any() else 0.0
        if mean == 0.0:
            return self
        log.debug("removing RHS mean %.3e from a pure Neumann problem", mean)
        rhs = np.where(self.active, self.rhs - mean, 0.0)
        return PoissonProblem(rhs=rhs, grid=self.grid, bc=self.bc, boundary=self.boundary)

    def initial_guess(self, p0: Optional[np.ndarray] = None) -> np.ndarray:
        p = np.zeros(self.grid.shape) if p0 is None else np.array(p0, dtype=float, copy=True)
        if p.shape != self.grid.shape:
            raise InvalidArgumentError(f"initial guess shape {p.shape} does not match grid {self.grid.shape}")
        if self.dirichlet and self.boundary is not None:
            p = np.where(self.active, p, self.boundary)
        return np.ascontiguousarray(p)


def _field(p: np.ndarray, problem: PoissonProblem) -> np.ndarray:
    if p.shape != problem.grid.shape:
        raise InvalidArgumentError(f"field shape {p.shape} does not match grid {problem.grid.shape}")
    if p.dtype != np.float64 or not p.flags.c_contiguous:
        return np.ascontiguousarray(p, dtype=np.float64)
    return p


def residual(p: np.ndarray, problem: PoissonProblem) -> np.ndarray:
    """rhs - Lap(p) on active cells, zero elsewhere."""
    p = _field(p, problem)
    r = np.zeros_like(p)
    kernels.residual_kernel(p, problem.rhs, problem.active, problem.dirichlet, problem.idx2, problem.idy2, r)
    return r


def remove_mean(p: np.ndarray, problem: PoissonProblem) -> np.ndarray:
    if problem.active.any():
        p[problem.active] -= p[problem.active].mean()
    return p


# -----------------------------
#            Sweeps
# -----------------------------

def jacobi_sweep(p: np.ndarray, problem: PoissonProblem) -> np.ndarray:
    """One Jacobi sweep; every read comes from `p`, which is left untouched."""
    p = _field(p, problem)
    out = np.empty_like(p)
    kernels.jacobi_kernel(p, out, problem.rhs, problem.active, problem.dirichlet, problem.idx2, problem.idy2)
    return out


def gauss_seidel_sweep(p: np.ndarray, problem: PoissonProblem) -> np.ndarray:
    """One lexicographic Gauss-Seidel sweep (rows bottom to top), in place."""
    p = _field(p, problem)
    kernels.gauss_seidel_kernel(p, problem.rhs, problem.active, problem.dirichlet, problem.idx2, problem.idy2)
    return p


def sor_sweep(p: np.ndarray, problem: PoissonProblem, omega: float) -> np.ndarray:
    _check_omega(omega)
    p = _field(p, problem)
    kernels.sor_kernel(p, problem.rhs, problem.active, problem.dirichlet, problem.idx2, problem.idy2, omega)
    return p


def thomas_solve(lower, diag, upper, rhs_line) -> np.ndarray:
    """Solve a tridiagonal system.

    `diag` and `rhs_line` have length n. `lower`/`upper` hold the sub- and
    super-diagonal either as n-1 entries or as n entries with lower[0] and
    upper[-1] ignored.
    """
    diag = np.asarray(diag, dtype=float)
    rhs_line = np.asarray(rhs_line, dtype=float)
    size = diag.shape[0]
    if size < 1 or rhs_line.shape[0] != size:
        raise InvalidArgumentError("tridiagonal system needs matching diagonal and right-hand side of length >= 1")

    def band(values, pad_front: bool) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[0] == size:
            return values
        if values.shape[0] == size - 1:
            return np.concatenate(([0.0], values)) if pad_front else np.concatenate((values, [0.0]))
        raise InvalidArgumentError(f"off-diagonal of length {values.shape[0]} for a system of size {size}")

    lo = band(lower, pad_front=True)
    up = band(upper, pad_front=False)
    x = np.zeros(size)
    bad = kernels.thomas_kernel(lo, diag, up, rhs_line, x, np.zeros(size), np.zeros(size), size)
    if bad >= 0:
        raise SingularLineError(int(bad))
    return x


def _line_sweep(p: np.ndarray, problem: PoissonProblem, omega: float, inside: bool, along_x: bool) -> None:
    if along_x:
        line, row = kernels.line_sweep_kernel(
            p, problem.rhs, problem.active, problem.dirichlet, problem.idx2, problem.idy2, omega, inside
        )
    else:
        line, row = kernels.line_sweep_kernel(
            p.T, problem.rhs.T, problem.active.T, problem.dirichlet, problem.idy2, problem.idx2, omega, inside
        )
    if line >= 0:
        raise SingularLineError(int(row), int(line))


def slor_sweep(p: np.ndarray, problem: PoissonProblem, omega: float, variant: str = "B") -> np.ndarray:
    """Line SOR over x-lines, j ascending, in place.

    Variant "A" relaxes inside the line system (diagonal / omega); variant "B"
    solves the plain line system and then blends with the old values.
    """
    _check_omega(omega)
    variant = variant.upper()
    if variant not in ("A", "B"):
        raise ConfigurationError(f"unknown line-SOR variant {variant!r}", ["variant"])
    p = _field(p, problem)
    _line_sweep(p, problem, omega, inside=(variant == "A"), along_x=True)
    return p


def adi_sweep(p: np.ndarray, problem: PoissonProblem, omega: float) -> np.ndarray:
    """x-line half-sweep over all rows, then y-line half-sweep over all columns."""
    _check_omega(omega)
    p = _field(p, problem)
    _line_sweep(p, problem, omega, inside=False, along_x=True)
    _line_sweep(p, problem, omega, inside=False, along_x=False)
    return p


# -----------------------------
#         Convergence trace
# -----------------------------

@dataclass
class ConvergenceTrace:
    method: str
    omega: float
    norm: str
    tol: float
    errors: List[float] = field(default_factory=list)
    residual_l2: List[float] = field(default_factory=list)
    residual_max: List[float] = field(default_factory=list)
    elapsed: List[float] = field(default_factory=list)
    work: List[float] = field(default_factory=list)
    converged: bool = False
    wall_clock: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.errors)

    @property
    def work_units(self) -> float:
        return float(sum(self.work))

    @property
    def last_error(self) -> float:
        return self.errors[-1] if self.errors else float("nan")

    def reduction_factors(self) -> List[float]:
        """Ratio of successive residual L2 norms."""
        r = self.residual_l2
        return [r[k] / r[k - 1] for k in range(1, len(r)) if r[k - 1] > 0.0]


# -----------------------------
#            Driver
# -----------------------------

Sweep = Callable[[np.ndarray, PoissonProblem], Tuple[np.ndarray, float]]


def _sweeper(config: SolverConfig) -> Sweep:
    method, omega = config.method, config.omega
    if method is Method.JACOBI:
        return lambda p, prob: (jacobi_sweep(p, prob), 1.0)
    if method is Method.GS:
        return lambda p, prob: (gauss_seidel_sweep(p, prob), 1.0)
    if method is Method.SOR:
        return lambda p, prob: (sor_sweep(p, prob, omega), 1.0)
    if method is Method.SLORA:
        return lambda p, prob: (slor_sweep(p, prob, omega, "A"), 1.0)
    if method is Method.SLORB:
        return lambda p, prob: (slor_sweep(p, prob, omega, "B"), 1.0)
    if method is Method.ADI:
        return lambda p, prob: (adi_sweep(p, prob, omega), 2.0)

    from multigrid import v_cycle

    mg = config.multigrid
    return lambda p, prob: v_cycle(p, prob, mg.levels, mg.pre_smooth, mg.post_smooth, mg.coarse_sweeps)


def _norms(p: np.ndarray, prev: np.ndarray, problem: PoissonProblem) -> Tuple[float, float, float]:
    act = problem.active
    change = float(np.max(np.abs(p[act] - prev[act]))) if act.any() else 0.0
    r = residual(p, problem)[act]
    if r.size == 0:
        return change, 0.0, 0.0
    return change, float(np.sqrt(np.mean(r * r))), float(np.max(np.abs(r)))


def solve(
    problem: PoissonProblem,
    config: SolverConfig,
    p0: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, ConvergenceTrace]:
    """Iterate the configured method until the chosen norm drops to tol or max_iter is hit.

    Non-convergence is reported through trace.converged, never raised.
    Pure Neumann solutions come back with zero mean over the active cells.
    """
    prob = problem.compatible()
    sweep = _sweeper(config)
    p = prob.initial_guess(p0)
    if not prob.dirichlet:
        remove_mean(p, prob)
    trace = ConvergenceTrace(method=config.method.value, omega=config.omega, norm=config.norm.value, tol=config.tol)
    pick = {Norm.MAX_CHANGE: 0, Norm.RESIDUAL_L2: 1, Norm.RESIDUAL_MAX: 2}[config.norm]

    start = time.perf_counter()
    for _ in range(config.max_iter):
        prev = p.copy()
        p, work = sweep(p, prob)
        if not prob.dirichlet:
            remove_mean(p, prob)
        norms = _norms(p, prev, prob)
        trace.errors.append(norms[pick])
        trace.residual_l2.append(norms[1])
        trace.residual_max.append(norms[2])
        trace.work.append(work)
        trace.elapsed.append(time.perf_counter() - start)
        if not np.isfinite(norms[pick]):
            log.warning("%s diverged after %d iterations", config.label, trace.iterations)
            break
        if norms[pick] <= config.tol:
            trace.converged = True
            break
    trace.wall_clock = time.perf_counter() - start

    log.debug(
        "%s: %d iterations, %.1f work units, converged=%s, error=%.3e",
        config.label, trace.iterations, trace.work_units, trace.converged, trace.last_error,
    )
    return p, trace


def dense_solve(problem: PoissonProblem) -> np.ndarray:
    """Direct solve of a small Dirichlet problem by dense elimination."""
    if not problem.dirichlet:
        raise ConfigurationError("dense elimination is only defined for Dirichlet problems", ["bc"])
    grid, act = problem.grid, problem.active
    cells = list(zip(*np.nonzero(act)))
    index = {c: k for k, c in enumerate(cells)}
    a = np.zeros((len(cells), len(cells)))
    b = np.zeros(len(cells))
    bnd = problem.boundary if problem.boundary is not None else np.zeros(grid.shape)
    for k, (i, j) in enumerate(cells):
        a[k, k] = -2.0 * (problem.idx2 + problem.idy2)
        b[k] = problem.rhs[i, j]
        for (a_i, a_j), coef in (((i - 1, j), problem.idx2), ((i + 1, j), problem.idx2),
                                 ((i, j - 1), problem.idy2), ((i, j + 1), problem.idy2)):
            if act[a_i, a_j]:
                a[k, index[(a_i, a_j)]] = coef
            else:
                b[k] -= coef * bnd[a_i, a_j]
    x = np.linalg.solve(a, b)
    p = np.array(bnd, copy=True)
    for k, (i, j) in enumerate(cells):
        p[i, j] = x[k]
    return p


# -----------------------------
#      Manufactured problems
# -----------------------------

def manufactured_neumann(nx: int, ny: Optional[int] = None) -> Tuple[PoissonProblem, np.ndarray]:
    """cos(pi x) cos(pi y) on the unit square with zero normal gradient."""
    grid = build_grid((1.0, 1.0), (nx, ny or nx))
    x, y = grid.cell_centers()
    xx, yy = np.meshgrid(x, y, indexing="ij")
    exact = np.cos(np.pi * xx) * np.cos(np.pi * yy)
    rhs = np.where(grid.active, -2.0 * np.pi ** 2 * exact, 0.0)
    return PoissonProblem(rhs=rhs, grid=grid, bc="neumann"), exact


def manufactured_dirichlet(nx: int, ny: Optional[int] = None) -> Tuple[PoissonProblem, np.ndarray]:
    """sin(pi x) sin(pi y) on a square whose ghost nodes carry the boundary.

    The ghost layer sits one spacing outside the unknowns, so nodes are at
    k*h for k = 0 .. nx+1 with h = 1/(nx+1).
    """
    ny = ny or nx
    hx, hy = 1.0 / (nx + 1), 1.0 / (ny + 1)
    grid = build_grid((nx * hx, ny * hy), (nx, ny))
    xx, yy = np.meshgrid(np.arange(nx + 2) * hx, np.arange(ny + 2) * hy, indexing="ij")
    exact = np.sin(np.pi * xx) * np.sin(np.pi * yy)
    rhs = np.where(grid.active, -2.0 * np.pi ** 2 * exact, 0.0)
    return PoissonProblem(rhs=rhs, grid=grid, bc="dirichlet", boundary=np.where(grid.active, 0.0, exact)), exact


def max_error(p: np.ndarray, exact: np.ndarray, problem: PoissonProblem) -> float:
    """Max error over active cells; Neumann fields are compared after removing both means."""
    act = problem.active
    diff = p[act] - exact[act]
    if not problem.dirichlet:
        diff = diff - diff.mean()
    return float(np.max(np.abs(diff)))


def warm_up() -> None:
    """Compile every kernel once so no timed region pays for JIT compilation."""
    for build in (manufactured_neumann, manufactured_dirichlet):
        problem, _ = build(4)
        for method in Method:
            solve(problem, SolverConfig(method=method, omega=1.5, max_iter=1))
    thomas_solve([1.0], [2.0, 2.0], [1.0], [3.0, 3.0])


# -----------------------------
#              CLI
# -----------------------------
if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Pressure Solvers - solve the manufactured Neumann problem once.")
    parser.add_argument("--method", default="multigrid", help="jacobi, gs, sor, slora, slorb, adi or multigrid")
    parser.add_argument("--omega", type=float, default=1.0)
    parser.add_argument("--nx", type=int, default=32)
    parser.add_argument("--tol", type=float, default=1e-6)
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    prob, exact = manufactured_neumann(args.nx)
    cfg = solver_config(method=args.method, omega=args.omega, tol=args.tol)
    sol, tr = solve(prob, cfg)
    print(f"🧮 {cfg.label}: {tr.iterations} iterations, {tr.work_units:g} work units, "
          f"converged={tr.converged}, max error={max_error(sol, exact, prob):.3e}")
