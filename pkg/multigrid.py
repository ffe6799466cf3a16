#!/usr/bin/env python3
"""
Multigrid
Geometric V-cycle for the pressure Poisson problem with a Gauss-Seidel smoother.

Two grid families are supported:
  - dirichlet problems coarsen vertex style, N -> (N-1)/2 (N odd), with
    9-point full weighting and bilinear interpolation;
  - neumann problems coarsen cell style, N -> ceil(N/2), averaging the four
    children and interpolating with 9/16, 3/16, 3/16, 1/16 weights. An odd
    N is padded with one non-active row or column, and a coarse cell is
    active when any of its children is, so masked geometries such as the
    chamber keep their full hierarchy.
Fields are ghost-padded on every level.
"""

import logging
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import numpy as np

from errors import InvalidHierarchyError
from grid import CellKind, StaggeredGrid, _default_mask
from solvers import PoissonProblem, gauss_seidel_sweep, remove_mean, residual

log = logging.getLogger(__name__)

Layout = Literal["vertex", "cell"]


def layout_for(problem: PoissonProblem) -> Layout:
    return "vertex" if problem.dirichlet else "cell"


def coarse_size(size: int, layout: Layout) -> int:
    """Interior size of the next coarser grid, or raise when `size` cannot be coarsened."""
    if layout == "vertex":
        if size < 3 or size % 2 == 0:
            raise InvalidHierarchyError(f"vertex coarsening needs an odd size >= 3, got {size}")
        return (size - 1) // 2
    if size < 2:
        raise InvalidHierarchyError(f"cell coarsening needs a size >= 2, got {size}")
    return (size + 1) // 2


def _pair_blocks(interior: np.ndarray, cx: int, cy: int) -> np.ndarray:
    """Interior padded to 2cx x 2cy and viewed as (cx, 2, cy, 2) child blocks."""
    padded = np.zeros((2 * cx, 2 * cy), dtype=interior.dtype)
    padded[: interior.shape[0], : interior.shape[1]] = interior
    return padded.reshape(cx, 2, cy, 2)


# -----------------------------
#     Grid transfer operators
# -----------------------------

def restrict(fine: np.ndarray, layout: Layout) -> np.ndarray:
    """Transfer a ghost-padded fine field to the ghost-padded coarse grid (ghosts zero).

    layout="vertex" is 9-point full weighting (1/16 [1 2 1; 2 4 2; 1 2 1]) onto
    every second node. layout="cell" is the four-child sum divided by four;
    children beyond an odd edge count as zero.
    """
    nx, ny = fine.shape[0] - 2, fine.shape[1] - 2
    cx, cy = coarse_size(nx, layout), coarse_size(ny, layout)
    coarse = np.zeros((cx + 2, cy + 2))
    if layout == "cell":
        coarse[1:-1, 1:-1] = 0.25 * _pair_blocks(fine[1:-1, 1:-1], cx, cy).sum(axis=(1, 3))
        return coarse

    # coarse node I sits on fine index 2I
    ic = 2 * np.arange(1, cx + 1)
    jc = 2 * np.arange(1, cy + 1)

    def at(di: int, dj: int) -> np.ndarray:
        return fine[np.ix_(ic + di, jc + dj)]

    coarse[1:-1, 1:-1] = (
        4.0 * at(0, 0)
        + 2.0 * (at(-1, 0) + at(1, 0) + at(0, -1) + at(0, 1))
        + at(-1, -1) + at(1, -1) + at(-1, 1) + at(1, 1)
    ) / 16.0
    return coarse


def _prolong_axis(c: np.ndarray, layout: Layout) -> np.ndarray:
    """Interpolate along axis 0 from a ghost-padded coarse axis to the fine interior."""
    cn = c.shape[0] - 2
    if layout == "cell":
        out = np.empty((2 * cn,) + c.shape[1:])
        out[0::2] = 0.75 * c[1:-1] + 0.25 * c[:-2]
        out[1::2] = 0.75 * c[1:-1] + 0.25 * c[2:]
        return out
    out = np.empty((2 * cn + 1,) + c.shape[1:])
    out[1::2] = c[1:-1]
    out[0::2] = 0.5 * (c[:-1] + c[1:])
    return out


def prolong(coarse: np.ndarray, layout: Layout, shape: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Interpolate a ghost-padded coarse field to the fine grid; fine ghosts come back zero.

    The coarse ghost ring is read, so callers fill it for their boundary type first.
    `shape` is the fine interior size; cell fields are cropped to it when the
    fine grid had an odd size.
    """
    along_x = _prolong_axis(coarse, layout)
    both = _prolong_axis(along_x.T, layout).T
    if shape is not None:
        both = both[: shape[0], : shape[1]]
    fine = np.zeros((both.shape[0] + 2, both.shape[1] + 2))
    fine[1:-1, 1:-1] = both
    return fine


def _extend(e: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Zero-gradient extension: the two rings of non-active cells around the
    active ones take the mean of their already filled 4-neighbours."""
    e = np.where(active, e, 0.0)
    filled = active.copy()
    for _ in range(2):
        vals = np.pad(np.where(filled, e, 0.0), 1)
        have = np.pad(filled.astype(float), 1)
        total = vals[:-2, 1:-1] + vals[2:, 1:-1] + vals[1:-1, :-2] + vals[1:-1, 2:]
        count = have[:-2, 1:-1] + have[2:, 1:-1] + have[1:-1, :-2] + have[1:-1, 2:]
        new = ~filled & (count > 0)
        e[new] = total[new] / count[new]
        filled |= new
    return e


def _fill_ghosts(e: np.ndarray, layout: Layout, active: np.ndarray) -> np.ndarray:
    if layout == "vertex":
        return np.where(active, e, 0.0)
    return _extend(e, active)


# -----------------------------
#          Hierarchy
# -----------------------------

@dataclass(frozen=True)
class Level:
    grid: StaggeredGrid
    weight: float  # work of one sweep here, in finest-grid sweeps


def coarsen(grid: StaggeredGrid, layout: Layout) -> StaggeredGrid:
    """Next coarser grid; cell coarsening keeps a cell active when any child is."""
    cx, cy = coarse_size(grid.mx, layout), coarse_size(grid.my, layout)
    mask = _default_mask(cx + 2, cy + 2)
    if layout == "cell":
        children = _pair_blocks(grid.active[1:-1, 1:-1], cx, cy)
        mask[1:-1, 1:-1][~children.any(axis=(1, 3))] = CellKind.SOLID
    dx, dy = 2.0 * grid.dx, 2.0 * grid.dy
    return StaggeredGrid(m=cx + 2, n=cy + 2, dx=dx, dy=dy, lx=cx * dx, ly=cy * dy, mask=mask)


def build_hierarchy(problem: PoissonProblem, levels: Optional[int] = None) -> List[Level]:
    """Grids from finest to coarsest.

    levels=None coarsens while both directions allow it and the coarse grid
    keeps at least two cells per side. Masked Dirichlet grids only support
    one level.
    """
    grid = problem.grid
    layout = layout_for(problem)
    if grid.is_masked and layout == "vertex":
        if levels not in (None, 1):
            raise InvalidHierarchyError("vertex multigrid on a masked grid supports a single level only")
        return [Level(grid, 1.0)]

    hierarchy = [Level(grid, 1.0)]
    fine_cells = max(grid.active_count, 1)
    while levels is None or len(hierarchy) < levels:
        g = hierarchy[-1].grid
        try:
            cx, cy = coarse_size(g.mx, layout), coarse_size(g.my, layout)
        except InvalidHierarchyError:
            if levels is None:
                break
            raise
        if levels is None and min(cx, cy) < 2:
            break
        coarse = coarsen(g, layout)
        hierarchy.append(Level(coarse, coarse.active_count / fine_cells))
    log.debug("multigrid hierarchy: %s", " -> ".join(f"{lv.grid.mx}x{lv.grid.my}" for lv in hierarchy))
    return hierarchy


# -----------------------------
#           V-cycle
# -----------------------------

def v_cycle(
    p: np.ndarray,
    problem: PoissonProblem,
    levels: Optional[int] = None,
    pre_smooth: int = 2,
    post_smooth: int = 2,
    coarse_sweeps: int = 50,
) -> Tuple[np.ndarray, float]:
    """One V-cycle; returns the updated field and the work spent, in finest-grid sweeps."""
    hierarchy = build_hierarchy(problem, levels)
    layout = layout_for(problem)
    work = [0.0]

    def smooth(x: np.ndarray, prob: PoissonProblem, sweeps: int, weight: float) -> np.ndarray:
        for _ in range(sweeps):
            x = gauss_seidel_sweep(x, prob)
        work[0] += sweeps * weight
        return x

    def cycle(depth: int, x: np.ndarray, prob: PoissonProblem) -> np.ndarray:
        level = hierarchy[depth]
        if depth == len(hierarchy) - 1:
            x = smooth(x, prob, coarse_sweeps, level.weight)
            return x if prob.dirichlet else remove_mean(x, prob)

        x = smooth(x, prob, pre_smooth, level.weight)
        coarse_grid = hierarchy[depth + 1].grid
        rc = np.where(coarse_grid.active, restrict(residual(x, prob), layout), 0.0)
        coarse = PoissonProblem(rhs=rc, grid=coarse_grid, bc=prob.bc).compatible()
        e = cycle(depth + 1, np.zeros(rc.shape), coarse)
        correction = prolong(_fill_ghosts(e, layout, coarse_grid.active), layout, (level.grid.mx, level.grid.my))
        x[prob.active] += correction[prob.active]
        return smooth(x, prob, post_smooth, level.weight)

    p = cycle(0, p, problem)
    return p, work[0]
