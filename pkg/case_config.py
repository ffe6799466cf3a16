#!/usr/bin/env python3
"""
Case Configuration
Validated run settings for the cavity, chamber and manufactured-Poisson cases,
loaded from JSON case files and/or command-line flags, plus the chamber
geometry builder.
"""

import os
import json
import logging
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

# --- Optional .env loader (safe if python-dotenv isn't installed) ---
try:
    if os.path.exists(".env"):
        from dotenv import load_dotenv  # type: ignore
        load_dotenv()
except Exception:
    pass

from errors import ConfigurationError, validated
from grid import BoundarySpec, CellKind, StaggeredGrid, build_grid, format_mask, read_mask_file
from ns_core import TimeStepParams, stability_check, stable_dt
from solvers import SolverConfig

log = logging.getLogger(__name__)

CHAMBER_SPACING = 0.25
CASES = ("cavity", "chamber", "poisson-mms")


def env_default(name: str, fallback: str) -> str:
    return os.getenv(f"NSBENCH_{name}", fallback)


# -----------------------------
#          Case model
# -----------------------------

class CaseConfig(BaseModel):
    """Everything one run needs. Unset lengths, counts and dt are filled by load_config."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    case: Literal["cavity", "chamber", "poisson-mms"]
    lx: Optional[float] = Field(None, gt=0.0)
    ly: Optional[float] = Field(None, gt=0.0)
    nx: Optional[int] = Field(None, ge=1)
    ny: Optional[int] = Field(None, ge=1)
    re: float = Field(100.0, gt=0.0, description="Reynolds number")
    vw: float = Field(1.0, description="Lid speed")
    dt: Optional[float] = Field(None, gt=0.0)
    sigma: float = Field(0.0025, gt=0.0, le=0.25, description="dt = sigma * Re * h^2 when dt is unset")
    cycles: int = Field(1000, ge=0)
    anim_freq: int = Field(500, ge=1)
    solver: SolverConfig = SolverConfig()
    out_dir: str = "results"
    mask: Optional[str] = None
    monitor: Optional[Tuple[int, int]] = None
    force: bool = False
    legacy_diffusion: bool = False
    steady_tol: Optional[float] = Field(None, gt=0.0)
    steady_window: int = Field(100, ge=1)
    mms_bc: Literal["auto", "neumann", "dirichlet"] = "auto"

    def time_step(self) -> TimeStepParams:
        return validated(
            TimeStepParams,
            re=self.re,
            dt=self.dt,
            cycles=self.cycles,
            sigma=self.sigma,
            force=self.force,
            legacy_diffusion=self.legacy_diffusion,
        )

    def to_json(self) -> str:
        return self.model_dump_json(indent=2, exclude_none=True)


_CASE_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "cavity": {"lx": 1.0, "ly": 1.0, "nx": 60},
    "poisson-mms": {"lx": 1.0, "ly": 1.0, "nx": 32},
}


def _read_case_file(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as ex:
        raise ConfigurationError(f"cannot read case file {path}: {ex}", ["config"]) from ex
    except json.JSONDecodeError as ex:
        raise ConfigurationError(f"case file {path} is not valid JSON: {ex.msg} (line {ex.lineno})", ["config"]) from ex
    if not isinstance(data, dict):
        raise ConfigurationError(f"case file {path} must hold a JSON object", ["config"])
    return data


def _merge_solver(base: Dict[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if key == "multigrid" and isinstance(value, Mapping):
            merged["multigrid"] = {**merged.get("multigrid", {}), **value}
        else:
            merged[key] = value
    return merged


def load_config(source: Union[str, Path, Mapping[str, Any], None] = None, **flags: Any) -> CaseConfig:
    """Validate a case from a JSON file (or mapping) and flags; flags win over the file.

    Flags left as None are ignored. The returned config has lengths, counts
    and dt filled in, and dt has passed the stability gate unless force is set.
    """
    if source is None:
        values: Dict[str, Any] = {}
    elif isinstance(source, Mapping):
        values = dict(source)
    else:
        values = _read_case_file(source)

    solver_values = dict(values.pop("solver", None) or {})
    solver_values = _merge_solver(solver_values, flags.pop("solver", None) or {})
    values.update({k: v for k, v in flags.items() if v is not None})
    if "tol" not in solver_values and os.getenv("NSBENCH_TOL"):
        solver_values["tol"] = os.getenv("NSBENCH_TOL")
    values["solver"] = validated(SolverConfig, **solver_values)
    values.setdefault("out_dir", env_default("OUT_DIR", "results"))

    if "case" not in values:
        raise ConfigurationError("no case given; required keys: case", ["case"])
    if values["case"] not in CASES:
        raise ConfigurationError(f"unknown case {values['case']!r}; valid cases: {', '.join(CASES)}", ["case"])

    config = validated(CaseConfig, **values)
    config = _fill_geometry(config)
    return _fill_time_step(config)


def _fill_geometry(config: CaseConfig) -> CaseConfig:
    update: Dict[str, Any] = {}
    if config.case == "chamber":
        grid, _ = build_chamber_case(config)
        update = {"lx": grid.lx, "ly": grid.ly, "nx": grid.mx, "ny": grid.my}
    else:
        defaults = _CASE_DEFAULTS[config.case]
        nx = config.nx or defaults["nx"]
        update = {
            "lx": config.lx or defaults["lx"],
            "ly": config.ly or defaults["ly"],
            "nx": nx,
            "ny": config.ny or nx,
        }
    return config.model_copy(update=update)


def case_grid(config: CaseConfig) -> StaggeredGrid:
    if config.case == "chamber":
        return build_chamber_case(config)[0]
    return build_grid((config.lx, config.ly), (config.nx, config.ny))


def _fill_time_step(config: CaseConfig) -> CaseConfig:
    if config.case == "poisson-mms":
        return config
    grid = case_grid(config)
    if config.dt is None:
        config = config.model_copy(update={"dt": stable_dt(config.re, grid, config.sigma)})
    report = stability_check(config.time_step(), grid)
    if not report.passed and not config.force:
        raise ConfigurationError(
            f"dt={config.dt:g} gives dt/(Re*h^2) = {report.ratio:.4g} above {report.limit:g}; pass --force to run anyway",
            ["dt"],
        )
    return config


def save_config(config: CaseConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(config.to_json() + "\n", encoding="utf-8")
    return path


# -----------------------------
#        Case geometry
# -----------------------------

def chamber_mask(box: Tuple[int, int] = (25, 17), channel: int = 2) -> np.ndarray:
    """Default chamber outline as an [i, j] kind array over the full lattice.

    A box of box[0] x box[1] cells is fed by a one-cell-high channel of
    `channel` cells entering at the top of the left wall and drained by one
    leaving at the bottom of the right wall.
    """
    bx, by = box
    m, n = bx + 2 * channel + 2, by + 2
    mask = np.full((m, n), CellKind.WALL, dtype=np.int8)
    mask[1:-1, 1:-1] = CellKind.SOLID
    mask[1 + channel:1 + channel + bx, 1:-1] = CellKind.INTERIOR
    top, bottom = n - 2, 1
    mask[1:1 + channel, top] = CellKind.INTERIOR
    mask[m - 1 - channel:m - 1, bottom] = CellKind.INTERIOR
    mask[0, top] = CellKind.INLET
    mask[m - 1, bottom] = CellKind.OUTLET
    return mask


def build_chamber_case(config: CaseConfig) -> Tuple[StaggeredGrid, BoundarySpec]:
    """Masked chamber grid at 0.25 m spacing with unit inflow and zero-gradient outflow.

    A mask without inlet or outlet cells is treated as a plain duct: inflow
    through the left side, outflow through the right.
    """
    if config.case != "chamber":
        raise ConfigurationError(f"build_chamber_case needs case 'chamber', got {config.case!r}", ["case"])
    if config.mask:
        mask = read_mask_file(config.mask)
    else:
        mask = chamber_mask()
    mx, my = mask.shape[0] - 2, mask.shape[1] - 2
    nx, ny = config.nx or mx, config.ny or my
    lx = config.lx if config.lx is not None else nx * CHAMBER_SPACING
    ly = config.ly if config.ly is not None else ny * CHAMBER_SPACING
    grid = build_grid((lx, ly), (nx, ny), mask)
    if not (np.isclose(grid.dx, CHAMBER_SPACING) and np.isclose(grid.dy, CHAMBER_SPACING)):
        raise ConfigurationError(
            f"chamber spacing must be {CHAMBER_SPACING} m, got dx={grid.dx:g} dy={grid.dy:g}", ["lx", "ly", "nx", "ny"]
        )

    if np.any(mask == CellKind.INLET) or np.any(mask == CellKind.OUTLET):
        bcs = BoundarySpec(wall_speed=0.0, inflow_speed=1.0)
    else:
        bcs = BoundarySpec.duct(1.0)
    log.info("chamber: %dx%d cells, %d active", grid.mx, grid.my, grid.active_count)
    return grid, bcs


def case_boundaries(config: CaseConfig) -> BoundarySpec:
    if config.case == "chamber":
        return build_chamber_case(config)[1]
    return BoundarySpec.cavity(config.vw)


# -----------------------------
#              CLI
# -----------------------------
if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Case Configuration - validate a case and print it as JSON.")
    parser.add_argument("--config", help="JSON case file")
    parser.add_argument("--case", choices=CASES)
    parser.add_argument("--print-mask", action="store_true", help="Print the chamber mask drawing")
    args = parser.parse_args()

    cfg = load_config(args.config, case=args.case)
    print(cfg.to_json())
    if args.print_mask and cfg.case == "chamber":
        print(format_mask(case_grid(cfg).mask))
