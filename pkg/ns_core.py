#!/usr/bin/env python3
"""
Projection Core
Explicit projection-method time stepping on the staggered grid: corner
products, intermediate velocities, pressure right-hand side, velocity
correction, the explicit stability bound and the derived stream function
and vorticity fields.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import ConfigurationError, InconsistentStateError, StabilityError, StepFailureError
from grid import (
    BoundarySpec,
    FlowState,
    StaggeredGrid,
    apply_boundary_conditions,
    apply_pressure_ghosts,
    check_shapes,
    faces_synced,
    sync_faces,
)
from solvers import ConvergenceTrace, PoissonProblem, SolverConfig, solve

log = logging.getLogger(__name__)

STABILITY_LIMIT = 0.25

# interior block and its four shifted neighbours
_C = (slice(1, -1), slice(1, -1))
_E = (slice(2, None), slice(1, -1))
_W = (slice(None, -2), slice(1, -1))
_N = (slice(1, -1), slice(2, None))
_S = (slice(1, -1), slice(None, -2))


# -----------------------------
#            Types
# -----------------------------

class TimeStepParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    re: float = Field(..., gt=0.0, description="Reynolds number")
    dt: float = Field(..., gt=0.0, description="Time step")
    cycles: int = Field(1, ge=0)
    sigma: float = Field(0.0025, gt=0.0, le=STABILITY_LIMIT, description="Safety factor used to derive dt")
    force: bool = False
    legacy_diffusion: bool = False


@dataclass
class CornerProducts:
    uv_ff: np.ndarray
    uv_fb: np.ndarray
    uv_bf: np.ndarray
    uv_bb: np.ndarray


@dataclass
class IntermediateFields:
    F_f: np.ndarray
    F_b: np.ndarray
    G_f: np.ndarray
    G_b: np.ndarray


@dataclass(frozen=True)
class StabilityReport:
    ratio: float
    limit: float
    passed: bool
    cfl: float

    @property
    def margin(self) -> float:
        return self.limit - self.ratio


def stable_dt(re: float, grid: StaggeredGrid, sigma: float = 0.0025) -> float:
    """dt = sigma * Re * h^2 with h = min(dx, dy)."""
    h = min(grid.dx, grid.dy)
    return sigma * re * h * h


# -----------------------------
#        Explicit momentum
# -----------------------------

def corner_products(state: FlowState) -> CornerProducts:
    """u*v at the four corners of every interior cell."""
    u_f, u_b, v_f, v_b = state.u_f, state.u_b, state.v_f, state.v_b
    out = [np.zeros_like(u_f) for _ in range(4)]
    out[0][_C] = 0.5 * (u_f[_C] + u_f[_N]) * 0.5 * (v_f[_C] + v_f[_E])
    out[1][_C] = 0.5 * (u_f[_C] + u_f[_S]) * 0.5 * (v_b[_C] + v_b[_E])
    out[2][_C] = 0.5 * (u_b[_C] + u_b[_N]) * 0.5 * (v_f[_C] + v_f[_W])
    out[3][_C] = 0.5 * (u_b[_S] + u_b[_C]) * 0.5 * (v_b[_C] + v_b[_W])
    return CornerProducts(*out)


def intermediate_velocities(
    state: FlowState,
    corners: CornerProducts,
    params: TimeStepParams,
    grid: StaggeredGrid,
) -> IntermediateFields:
    """Predict face velocities from convection and diffusion, pressure left out.

    Faces between a fluid cell and a boundary cell keep the boundary velocity.
    Non-fluid cells and the ghost ring are zero.
    """
    check_shapes(state, grid)
    if not faces_synced(state):
        raise InconsistentStateError("backward faces differ from the forward faces they mirror; sync the state first")

    dt, re, dx, dy = params.dt, params.re, grid.dx, grid.dy
    kx = dt / (re * dx * dx)
    ky = dt / (re * dy * dy)
    # legacy mode scales the x-diffusion of v by 1/dy^2
    kgx = ky if params.legacy_diffusion else kx
    u_f, u_b, v_f, v_b, u, v = state.u_f, state.u_b, state.v_f, state.v_b, state.u, state.v
    ff, fb, bf, bb = corners.uv_ff, corners.uv_fb, corners.uv_bf, corners.uv_bb

    F_f, F_b, G_f, G_b = (np.zeros_like(u_f) for _ in range(4))
    F_f[_C] = (
        u_f[_C]
        + kx * (u_f[_E] - 2.0 * u_f[_C] + u_b[_C])
        + ky * (u_f[_S] - 2.0 * u_f[_C] + u_f[_N])
        - dt / dx * (u[_E] ** 2 - u[_C] ** 2)
        - dt / dy * (ff[_C] - fb[_C])
    )
    G_f[_C] = (
        v_f[_C]
        + kgx * (v_f[_E] - 2.0 * v_f[_C] + v_f[_W])
        + ky * (v_f[_N] - 2.0 * v_f[_C] + v_b[_C])
        - dt / dx * (ff[_C] - bf[_C])
        - dt / dy * (v[_N] ** 2 - v[_C] ** 2)
    )
    F_b[_C] = (
        u_b[_C]
        + kx * (u_f[_C] - 2.0 * u_b[_C] + u_b[_W])
        + ky * (u_b[_S] - 2.0 * u_b[_C] + u_b[_N])
        - dt / dx * (u[_C] ** 2 - u[_W] ** 2)
        - dt / dy * (bf[_C] - bb[_C])
    )
    G_b[_C] = (
        v_b[_C]
        + kgx * (v_b[_E] - 2.0 * v_b[_C] + v_b[_W])
        + ky * (v_f[_C] - 2.0 * v_b[_C] + v_b[_S])
        - dt / dx * (fb[_C] - bb[_C])
        - dt / dy * (v[_C] ** 2 - v[_S] ** 2)
    )

    act = grid.active
    east, west, north, south = (np.ones_like(act) for _ in range(4))
    east[:-1, :] = act[1:, :]
    west[1:, :] = act[:-1, :]
    north[:, :-1] = act[:, 1:]
    south[:, 1:] = act[:, :-1]
    F_f = np.where(act & ~east, u_f, F_f)
    F_b = np.where(act & ~west, u_b, F_b)
    G_f = np.where(act & ~north, v_f, G_f)
    G_b = np.where(act & ~south, v_b, G_b)
    return IntermediateFields(*(np.where(act, a, 0.0) for a in (F_f, F_b, G_f, G_b)))


def poisson_rhs(inter: IntermediateFields, params: TimeStepParams, grid: StaggeredGrid) -> np.ndarray:
    if not params.dt > 0.0:
        raise ConfigurationError(f"time step must be positive, got {params.dt}", ["dt"])
    rhs = ((inter.F_f - inter.F_b) / grid.dx + (inter.G_f - inter.G_b) / grid.dy) / params.dt
    return np.where(grid.active, rhs, 0.0)


def velocity_correction(
    state: FlowState,
    inter: IntermediateFields,
    p: np.ndarray,
    params: TimeStepParams,
    grid: StaggeredGrid,
    bcs: BoundarySpec,
) -> FlowState:
    """Subtract the pressure gradient on faces between two fluid cells, then re-apply BCs and sync."""
    act = grid.active
    both_x = np.zeros_like(act)
    both_x[:-1, :] = act[:-1, :] & act[1:, :]
    both_y = np.zeros_like(act)
    both_y[:, :-1] = act[:, :-1] & act[:, 1:]

    grad_x = np.zeros_like(p)
    grad_x[:-1, :] = p[1:, :] - p[:-1, :]
    grad_y = np.zeros_like(p)
    grad_y[:, :-1] = p[:, 1:] - p[:, :-1]

    out = state.copy()
    out.p = np.array(p, dtype=float, copy=True)
    out.u_f = np.where(both_x, inter.F_f - params.dt / grid.dx * grad_x, np.where(act, inter.F_f, state.u_f))
    out.v_f = np.where(both_y, inter.G_f - params.dt / grid.dy * grad_y, np.where(act, inter.G_f, state.v_f))
    out = apply_boundary_conditions(out, grid, bcs)
    return sync_faces(out)


def stability_check(params: TimeStepParams, grid: StaggeredGrid) -> StabilityReport:
    """dt / (Re h^2) against the explicit diffusion bound, h = min(dx, dy)."""
    h = min(grid.dx, grid.dy)
    ratio = params.dt / (params.re * h * h)
    return StabilityReport(
        ratio=ratio,
        limit=STABILITY_LIMIT,
        passed=ratio <= STABILITY_LIMIT * (1.0 + 1e-12),
        cfl=params.dt / grid.dx,
    )


# -----------------------------
#          Time stepping
# -----------------------------

def advance_step(
    state: FlowState,
    params: TimeStepParams,
    grid: StaggeredGrid,
    bcs: BoundarySpec,
    solver: SolverConfig,
    cycle: int = 1,
) -> Tuple[FlowState, ConvergenceTrace]:
    """One projection step: corners, F/G, RHS, pressure solve, correction, BCs, sync."""
    report = stability_check(params, grid)
    if not report.passed:
        if not params.force:
            raise StabilityError(report.ratio, report.limit)
        log.warning("running past the stability bound: ratio %.4g > %g", report.ratio, report.limit)

    corners = corner_products(state)
    inter = intermediate_velocities(state, corners, params, grid)
    rhs = poisson_rhs(inter, params, grid)
    problem = PoissonProblem(rhs=rhs, grid=grid, bc="neumann")
    p, trace = solve(problem, solver, p0=state.p)
    if not trace.converged:
        raise StepFailureError(cycle, trace)
    p = apply_pressure_ghosts(p, grid)
    return velocity_correction(state, inter, p, params, grid, bcs), trace


def monitor_cell(grid: StaggeredGrid, point: Optional[Tuple[int, int]] = None) -> Tuple[int, int]:
    """0-based array index of the monitor cell; `point` is 1-based, Fortran style.

    The default is (nint(m/2), nint(n/4)).
    """
    if point is None:
        point = (int(np.floor(grid.m / 2 + 0.5)), int(np.floor(grid.n / 4 + 0.5)))
    i, j = point[0] - 1, point[1] - 1
    if not (0 <= i < grid.m and 0 <= j < grid.n):
        raise ConfigurationError(f"monitor point {point} lies outside the {grid.m}x{grid.n} grid", ["monitor"])
    return i, j


def is_steady(series: Sequence[float], tol: float, window: int) -> bool:
    """True when the last `window` changes of the series all stay below tol."""
    if window < 1 or len(series) <= window:
        return False
    tail = np.asarray(series[-(window + 1):], dtype=float)
    return bool(np.max(np.abs(np.diff(tail))) < tol)


@dataclass
class StepRecord:
    cycle: int
    time: float
    state: FlowState
    trace: ConvergenceTrace
    monitor_u: float


def march(
    state: FlowState,
    params: TimeStepParams,
    grid: StaggeredGrid,
    bcs: BoundarySpec,
    solver: SolverConfig,
    monitor: Optional[Tuple[int, int]] = None,
    steady_tol: Optional[float] = None,
    steady_window: int = 100,
) -> Iterator[StepRecord]:
    """Advance up to params.cycles steps, yielding after each one.

    The monitored velocity is read at the start of each cycle, before the
    step runs. With steady_tol set, marching stops once the
    monitor series has been flat for steady_window cycles.
    """
    mi, mj = monitor_cell(grid, monitor)
    history: List[float] = []
    time = 0.0
    for cycle in range(1, params.cycles + 1):
        time += params.dt
        u_mon = float(state.u[mi, mj])
        state, trace = advance_step(state, params, grid, bcs, solver, cycle)
        history.append(u_mon)
        yield StepRecord(cycle=cycle, time=time, state=state, trace=trace, monitor_u=u_mon)
        if steady_tol is not None and is_steady(history, steady_tol, steady_window):
            log.info("monitor velocity steady after %d cycles (t=%.4g)", cycle, time)
            return


# -----------------------------
#        Derived fields
# -----------------------------

def derived_fields(state: FlowState, grid: StaggeredGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Stream function and vorticity on the interior cells; ghost entries are zero.

    psi is zero at the bottom-left interior cell, integrated up the first
    column with +u dy and along each row with -v dx.
    """
    u, v = state.u, state.v
    psi = np.zeros_like(u)
    first = grid.dy * np.cumsum(u[1, 1:-1])
    psi[1, 1:-1] = first - first[0]
    psi[1:-1, 1:-1] = psi[1, 1:-1][None, :] - grid.dx * np.vstack(
        (np.zeros((1, grid.n - 2)), np.cumsum(v[2:-1, 1:-1], axis=0))
    )
    vor = np.zeros_like(u)
    vor[_C] = (v[_E] - v[_C]) / grid.dx - (u[_N] - u[_C]) / grid.dy
    return psi, vor


def centerline_profile(state: FlowState, grid: StaggeredGrid) -> Tuple[np.ndarray, np.ndarray]:
    """u along the vertical line x = Lx/2, at the interior cell-center heights."""
    x_faces = np.arange(grid.m - 1) * grid.dx
    _, y = grid.cell_centers()
    target = 0.5 * grid.lx
    k = min(int(np.floor(target / grid.dx)), grid.m - 3)
    w = (target - x_faces[k]) / grid.dx
    line = (1.0 - w) * state.u_f[k, 1:-1] + w * state.u_f[k + 1, 1:-1]
    return y[1:-1], line


def profile_difference(coarse: Tuple[np.ndarray, np.ndarray], fine: Tuple[np.ndarray, np.ndarray]) -> float:
    """Max |difference| after interpolating the fine profile onto the coarse heights."""
    y_c, u_c = coarse
    y_f, u_f = fine
    return float(np.max(np.abs(u_c - np.interp(y_c, y_f, u_f))))
