#!/usr/bin/env python3
"""
Staggered Grid
Mesh layout, ghost-cell boundary conditions and face bookkeeping shared by
the flow core and the pressure solvers.

Fields are dense m x n arrays that include the ghost ring. Index [i, j] runs
with i along x and j along y; array index 0 is the ghost layer, so the
Fortran-style 1-based (i, j) is [i-1, j-1] here. u_f[i, j] is the x-velocity on
the right face of cell (i, j), v_f[i, j] the y-velocity on its top face.
"""

import logging
from dataclasses import dataclass, replace
from enum import IntEnum
from functools import lru_cache
from pathlib import Path
from typing import Literal, Optional, Tuple, Union

import numpy as np
from numba import njit
from pydantic import BaseModel, ConfigDict, Field

from errors import ConfigurationError, InvalidArgumentError

log = logging.getLogger(__name__)


# -----------------------------
#         Cell kinds
# -----------------------------

class CellKind(IntEnum):
    INTERIOR = 0
    SOLID = 1
    INLET = 2
    OUTLET = 3
    WALL = 4


MASK_CHARS = {
    ".": CellKind.INTERIOR,
    "#": CellKind.SOLID,
    "i": CellKind.INLET,
    "o": CellKind.OUTLET,
    "w": CellKind.WALL,
}
_KIND_CHARS = {int(kind): char for char, kind in MASK_CHARS.items()}

MaskSource = Union[np.ndarray, str, Path, None]


def parse_mask(text: str) -> np.ndarray:
    """Parse a mask drawing (rows top-to-bottom) into an [i, j] kind array."""
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if not rows:
        raise ConfigurationError("mask is empty", ["mask"])
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise ConfigurationError("mask rows have different lengths", ["mask"])
    bad = sorted({c for row in rows for c in row if c not in MASK_CHARS})
    if bad:
        raise ConfigurationError(f"unknown mask characters {bad!r}", ["mask"])
    drawing = np.array([[int(MASK_CHARS[c]) for c in row] for row in rows], dtype=np.int8)
    # top row of the drawing is the highest j
    return np.ascontiguousarray(drawing[::-1, :].T)


def format_mask(mask: np.ndarray) -> str:
    rows = []
    for j in range(mask.shape[1] - 1, -1, -1):
        rows.append("".join(_KIND_CHARS[int(k)] for k in mask[:, j]))
    return "\n".join(rows) + "\n"


def read_mask_file(path: Union[str, Path]) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as ex:
        raise ConfigurationError(f"cannot read mask file {path}: {ex}", ["mask"]) from ex
    return parse_mask(text)


def _names_a_file(text: str) -> bool:
    """Single-line text is a path when the file exists or the text is no mask drawing."""
    if "\n" in text:
        return False
    stripped = text.strip()
    return Path(stripped).is_file() or not stripped or any(c not in MASK_CHARS for c in stripped)


# -----------------------------
#            Grid
# -----------------------------

@dataclass(frozen=True, eq=False)
class StaggeredGrid:
    """Rectangular staggered mesh; m x n cells including one ghost layer per side."""

    m: int
    n: int
    dx: float
    dy: float
    lx: float
    ly: float
    mask: np.ndarray

    @property
    def beta(self) -> float:
        return self.dx / self.dy

    @property
    def mx(self) -> int:
        return self.m - 2

    @property
    def my(self) -> int:
        return self.n - 2

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.m, self.n)

    @property
    def active(self) -> np.ndarray:
        """Cells whose pressure and velocities are unknowns."""
        return self.mask == CellKind.INTERIOR

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.active))

    @property
    def is_masked(self) -> bool:
        """True when the interior block holds anything but interior cells."""
        return bool(np.any(self.mask[1:-1, 1:-1] != CellKind.INTERIOR))

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates, ghost cells included (they sit outside [0, L])."""
        x = (np.arange(self.m) - 0.5) * self.dx
        y = (np.arange(self.n) - 0.5) * self.dy
        return x, y

    def zeros(self) -> np.ndarray:
        return np.zeros((self.m, self.n))


def _default_mask(m: int, n: int) -> np.ndarray:
    mask = np.full((m, n), CellKind.WALL, dtype=np.int8)
    mask[1:-1, 1:-1] = CellKind.INTERIOR
    return mask


def build_grid(
    physical_lengths: Tuple[float, float],
    interior_counts: Tuple[int, int],
    mask_source: MaskSource = None,
) -> StaggeredGrid:
    """Lay out an (mx+2) x (my+2) staggered mesh over an Lx x Ly box."""
    lx, ly = (float(v) for v in physical_lengths)
    mx, my = interior_counts
    bad = [name for name, v in (("Lx", lx), ("Ly", ly)) if not v > 0]
    bad += [name for name, v in (("nx", mx), ("ny", my)) if int(v) != v or v < 1]
    if bad:
        raise ConfigurationError("lengths and interior counts must be positive", bad)
    mx, my = int(mx), int(my)
    m, n = mx + 2, my + 2

    if mask_source is None:
        mask = _default_mask(m, n)
    else:
        if isinstance(mask_source, np.ndarray):
            mask = np.asarray(mask_source, dtype=np.int8)
        elif isinstance(mask_source, Path) or (isinstance(mask_source, str) and _names_a_file(mask_source)):
            mask = read_mask_file(mask_source)
        else:
            mask = parse_mask(mask_source)
        if mask.shape != (m, n):
            raise ConfigurationError(
                f"mask covers {mask.shape[0]}x{mask.shape[1]} cells but the spacing gives {m}x{n}",
                ["mask", "nx", "ny"],
            )
        mask = np.ascontiguousarray(mask)
        ring = np.concatenate((mask[0, :], mask[-1, :], mask[:, 0], mask[:, -1]))
        if np.any(ring == CellKind.INTERIOR):
            raise ConfigurationError("the outer ring of the mask must not hold interior cells", ["mask"])

    grid = StaggeredGrid(m=m, n=n, dx=lx / mx, dy=ly / my, lx=lx, ly=ly, mask=mask)
    log.debug("grid %dx%d dx=%g dy=%g active=%d", m, n, grid.dx, grid.dy, grid.active_count)
    return grid


# -----------------------------
#       Boundary settings
# -----------------------------

class SideCondition(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["no-slip", "moving-wall", "inflow", "outflow"] = "no-slip"
    value: float = 0.0  # inflow speed into the domain


class BoundarySpec(BaseModel):
    """Velocity conditions per side of the box; pressure is zero-gradient on solids."""

    model_config = ConfigDict(frozen=True)

    wall_speed: float = Field(1.0, description="Tangential speed of a moving wall")
    inflow_speed: float = Field(1.0, description="Inflow speed of inlet cells drawn in a mask")
    left: SideCondition = SideCondition()
    right: SideCondition = SideCondition()
    bottom: SideCondition = SideCondition()
    top: SideCondition = SideCondition()
    pressure: Literal["zero-gradient"] = "zero-gradient"

    @classmethod
    def cavity(cls, wall_speed: float = 1.0) -> "BoundarySpec":
        return cls(wall_speed=wall_speed, top=SideCondition(kind="moving-wall"))

    @classmethod
    def duct(cls, inflow: float = 1.0) -> "BoundarySpec":
        return cls(
            wall_speed=0.0,
            inflow_speed=inflow,
            left=SideCondition(kind="inflow", value=inflow),
            right=SideCondition(kind="outflow"),
        )


@dataclass(frozen=True, eq=False)
class BoundaryLayout:
    """Per-cell boundary data painted from a grid mask and a BoundarySpec."""

    kind: np.ndarray
    tangential: np.ndarray
    inflow: np.ndarray
    # rows of (axis, i, j, outward sign, face length)
    inlet_faces: np.ndarray
    outlet_faces: np.ndarray


def _paint_side(kind, tang, inflow, cells, side: SideCondition, wall_speed: float):
    ring = kind[cells] == CellKind.WALL
    if side.kind == "no-slip":
        return
    if side.kind == "moving-wall":
        tang[cells] = np.where(ring, wall_speed, tang[cells])
    elif side.kind == "inflow":
        kind[cells] = np.where(ring, CellKind.INLET, kind[cells])
        inflow[cells] = np.where(ring, side.value, inflow[cells])
    else:
        kind[cells] = np.where(ring, CellKind.OUTLET, kind[cells])


def _boundary_faces(kind: np.ndarray, dx: float, dy: float, which: int) -> np.ndarray:
    m, n = kind.shape
    rows = []
    for i, j in zip(*np.nonzero(kind == which)):
        for di, dj, axis, length in ((1, 0, 0, dy), (-1, 0, 0, dy), (0, 1, 1, dx), (0, -1, 1, dx)):
            a, b = i + di, j + dj
            if 0 <= a < m and 0 <= b < n and kind[a, b] == CellKind.INTERIOR:
                # the shared face is stored on the lower-index cell; the outward
                # normal of the fluid region points from (a, b) back to (i, j)
                fi, fj = (min(i, a), j) if axis == 0 else (i, min(j, b))
                rows.append((axis, fi, fj, -float(di + dj), length))
    if not rows:
        return np.zeros((0, 5))
    return np.array(rows, dtype=float)


@lru_cache(maxsize=64)
def boundary_layout(grid: StaggeredGrid, bcs: BoundarySpec) -> BoundaryLayout:
    kind = grid.mask.astype(np.int8).copy()
    tang = np.zeros(grid.shape)
    inflow = np.where(kind == CellKind.INLET, bcs.inflow_speed, 0.0)
    m, n = grid.shape
    # bottom/top first, then left/right so the sides own the corners
    _paint_side(kind, tang, inflow, (slice(None), 0), bcs.bottom, bcs.wall_speed)
    _paint_side(kind, tang, inflow, (slice(None), n - 1), bcs.top, bcs.wall_speed)
    _paint_side(kind, tang, inflow, (0, slice(None)), bcs.left, bcs.wall_speed)
    _paint_side(kind, tang, inflow, (m - 1, slice(None)), bcs.right, bcs.wall_speed)
    return BoundaryLayout(
        kind=kind,
        tangential=tang,
        inflow=inflow,
        inlet_faces=_boundary_faces(kind, grid.dx, grid.dy, CellKind.INLET),
        outlet_faces=_boundary_faces(kind, grid.dx, grid.dy, CellKind.OUTLET),
    )


# -----------------------------
#          Flow state
# -----------------------------

@dataclass
class FlowState:
    """Cell pressure, forward/backward face velocities and cell-center averages."""

    p: np.ndarray
    u_f: np.ndarray
    u_b: np.ndarray
    v_f: np.ndarray
    v_b: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, grid: StaggeredGrid) -> "FlowState":
        return cls(*(grid.zeros() for _ in range(7)))

    def copy(self) -> "FlowState":
        return FlowState(*(a.copy() for a in self.arrays()))

    def arrays(self) -> Tuple[np.ndarray, ...]:
        return (self.p, self.u_f, self.u_b, self.v_f, self.v_b, self.u, self.v)


def check_shapes(state: FlowState, grid: StaggeredGrid) -> None:
    names = ("p", "u_f", "u_b", "v_f", "v_b", "u", "v")
    wrong = [name for name, a in zip(names, state.arrays()) if a.shape != grid.shape]
    if wrong:
        raise InvalidArgumentError(f"fields {wrong} do not match the {grid.m}x{grid.n} grid")


# -----------------------------
#     Ghost-cell conditions
# -----------------------------

@njit(cache=True)
def _velocity_ghosts(kind, tang, inflow, u_f, v_f):
    m, n = kind.shape

    # normal faces: one side fluid, the other a boundary cell
    for i in range(m - 1):
        for j in range(n):
            lf = kind[i, j] == 0
            rf = kind[i + 1, j] == 0
            if lf and rf:
                continue
            if not lf and not rf:
                u_f[i, j] = 0.0
            elif lf:
                k = kind[i + 1, j]
                if k == 2:
                    u_f[i, j] = -inflow[i + 1, j]
                elif k == 3:
                    u_f[i, j] = u_f[i - 1, j] if i >= 1 else 0.0
                else:
                    u_f[i, j] = 0.0
            else:
                k = kind[i, j]
                if k == 2:
                    u_f[i, j] = inflow[i, j]
                elif k == 3:
                    u_f[i, j] = u_f[i + 1, j] if i + 1 < m - 1 else 0.0
                else:
                    u_f[i, j] = 0.0
    for i in range(m):
        for j in range(n - 1):
            bf = kind[i, j] == 0
            tf = kind[i, j + 1] == 0
            if bf and tf:
                continue
            if not bf and not tf:
                v_f[i, j] = 0.0
            elif bf:
                k = kind[i, j + 1]
                if k == 2:
                    v_f[i, j] = -inflow[i, j + 1]
                elif k == 3:
                    v_f[i, j] = v_f[i, j - 1] if j >= 1 else 0.0
                else:
                    v_f[i, j] = 0.0
            else:
                k = kind[i, j]
                if k == 2:
                    v_f[i, j] = inflow[i, j]
                elif k == 3:
                    v_f[i, j] = v_f[i, j + 1] if j + 1 < n - 1 else 0.0
                else:
                    v_f[i, j] = 0.0

    # tangential ghosts: mirror the adjacent fluid-side face about the wall
    for i in range(m - 1):
        for j in range(n):
            if kind[i, j] == 0 or kind[i + 1, j] == 0:
                continue
            s = -1
            if j >= 1 and (kind[i, j - 1] == 0 or kind[i + 1, j - 1] == 0):
                s = j - 1
            elif j + 1 < n and (kind[i, j + 1] == 0 or kind[i + 1, j + 1] == 0):
                s = j + 1
            if s < 0:
                continue
            if kind[i, j] == 3 or kind[i + 1, j] == 3:
                u_f[i, j] = u_f[i, s]
            elif kind[i, s] == 0 and kind[i + 1, s] == 0:
                ut = 0.5 * (tang[i, j] + tang[i + 1, j])
                u_f[i, j] = 2.0 * ut - u_f[i, s]
            else:
                u_f[i, j] = -u_f[i, s]
    for i in range(m):
        for j in range(n - 1):
            if kind[i, j] == 0 or kind[i, j + 1] == 0:
                continue
            s = -1
            if i >= 1 and (kind[i - 1, j] == 0 or kind[i - 1, j + 1] == 0):
                s = i - 1
            elif i + 1 < m and (kind[i + 1, j] == 0 or kind[i + 1, j + 1] == 0):
                s = i + 1
            if s < 0:
                continue
            if kind[i, j] == 3 or kind[i, j + 1] == 3:
                v_f[i, j] = v_f[s, j]
            elif kind[s, j] == 0 and kind[s, j + 1] == 0:
                vt = 0.5 * (tang[i, j] + tang[i, j + 1])
                v_f[i, j] = 2.0 * vt - v_f[s, j]
            else:
                v_f[i, j] = -v_f[s, j]


@njit(cache=True)
def _pressure_ghosts(kind, p):
    m, n = kind.shape
    side_i = (-1, 1, 0, 0)
    side_j = (0, 0, -1, 1)
    diag_i = (-1, 1, -1, 1)
    diag_j = (-1, -1, 1, 1)
    for i in range(m):
        for j in range(n):
            if kind[i, j] == 0:
                continue
            total = 0.0
            count = 0
            for k in range(4):
                a = i + side_i[k]
                b = j + side_j[k]
                if 0 <= a < m and 0 <= b < n and kind[a, b] == 0:
                    total += p[a, b]
                    count += 1
            if count == 0:
                # ring corners copy the diagonal fluid cell
                for k in range(4):
                    a = i + diag_i[k]
                    b = j + diag_j[k]
                    if 0 <= a < m and 0 <= b < n and kind[a, b] == 0:
                        total += p[a, b]
                        count += 1
            p[i, j] = total / count if count > 0 else 0.0


def apply_pressure_ghosts(p: np.ndarray, grid: StaggeredGrid) -> np.ndarray:
    """Zero-gradient pressure: every boundary cell copies its fluid neighbour(s)."""
    out = np.array(p, dtype=float, copy=True)
    _pressure_ghosts(grid.mask, out)
    return out


def _balance_outflow(layout: BoundaryLayout, u_f: np.ndarray, v_f: np.ndarray) -> None:
    if layout.outlet_faces.shape[0] == 0:
        return
    fields = (u_f, v_f)

    def flux(faces):
        return sum(sign * fields[int(axis)][int(i), int(j)] * length
                   for axis, i, j, sign, length in faces)

    inflow = -flux(layout.inlet_faces)
    outflow = flux(layout.outlet_faces)
    if abs(outflow) > 1e-14:
        scale = inflow / outflow
        for axis, i, j, _, _ in layout.outlet_faces:
            fields[int(axis)][int(i), int(j)] *= scale
    else:
        total = layout.outlet_faces[:, 4].sum()
        for axis, i, j, sign, _ in layout.outlet_faces:
            fields[int(axis)][int(i), int(j)] = sign * inflow / total


def apply_boundary_conditions(state: FlowState, grid: StaggeredGrid, bcs: BoundarySpec) -> FlowState:
    """Fill ghost and boundary faces; interior values are left untouched."""
    check_shapes(state, grid)
    layout = boundary_layout(grid, bcs)
    out = state.copy()
    _velocity_ghosts(layout.kind, layout.tangential, layout.inflow, out.u_f, out.v_f)
    _balance_outflow(layout, out.u_f, out.v_f)
    _pressure_ghosts(layout.kind, out.p)
    return out


# -----------------------------
#        Face bookkeeping
# -----------------------------

def sync_faces(state: FlowState) -> FlowState:
    """Copy shared faces into the backward arrays and refresh the cell averages."""
    out = state.copy()
    out.u_b[1:, :] = out.u_f[:-1, :]
    out.v_b[:, 1:] = out.v_f[:, :-1]
    out.u = 0.5 * (out.u_f + out.u_b)
    out.v = 0.5 * (out.v_f + out.v_b)
    return out


def faces_synced(state: FlowState) -> bool:
    return bool(
        np.array_equal(state.u_b[1:, :], state.u_f[:-1, :])
        and np.array_equal(state.v_b[:, 1:], state.v_f[:, :-1])
    )


def divergence(state: FlowState, grid: StaggeredGrid) -> np.ndarray:
    """Discrete continuity residual per active cell, zero elsewhere."""
    div = (state.u_f - state.u_b) / grid.dx + (state.v_f - state.v_b) / grid.dy
    return np.where(grid.active, div, 0.0)


def initial_state(grid: StaggeredGrid, bcs: BoundarySpec) -> FlowState:
    """Fluid at rest with the boundary conditions applied and faces synced."""
    return sync_faces(apply_boundary_conditions(FlowState.zeros(grid), grid, bcs))


def with_pressure(state: FlowState, p: np.ndarray) -> FlowState:
    return replace(state, p=p)
