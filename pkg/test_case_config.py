#!/usr/bin/env python3
"""
Tests for case loading, the stability gate and the chamber geometry
"""

import json

import numpy as np
import pytest

from case_config import (
    CHAMBER_SPACING,
    build_chamber_case,
    case_boundaries,
    case_grid,
    chamber_mask,
    load_config,
    save_config,
)
from errors import ConfigurationError
from grid import CellKind
from solvers import Method


def write_mask(path, mx, my):
    rows = ["w" * (mx + 2)] + ["w" + "." * mx + "w" for _ in range(my)] + ["w" * (mx + 2)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


def test_cavity_defaults_and_stable_dt():
    config = load_config(case="cavity", nx=60, re=100.0)
    assert (config.nx, config.ny, config.lx, config.ly) == (60, 60, 1.0, 1.0)
    assert config.dt == pytest.approx(0.0025 * 100.0 * (1.0 / 60.0) ** 2)
    assert config.solver.method is Method.ADI


def test_missing_case_names_the_key():
    with pytest.raises(ConfigurationError) as info:
        load_config()
    assert "case" in info.value.keys


def test_unknown_case_is_rejected():
    with pytest.raises(ConfigurationError, match="valid cases"):
        load_config(case="pipe")


def test_unknown_file_key_is_rejected(tmp_path):
    path = tmp_path / "case.json"
    path.write_text(json.dumps({"case": "cavity", "viscosity": 0.01}), encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_config(path)


def test_malformed_json_is_a_configuration_error(tmp_path):
    path = tmp_path / "case.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="not valid JSON"):
        load_config(path)


def test_flags_override_file(tmp_path):
    path = tmp_path / "case.json"
    path.write_text(json.dumps({"case": "cavity", "nx": 20, "solver": {"method": "sor", "omega": 1.7}}), encoding="utf-8")
    config = load_config(path, nx=30, solver={"tol": 1e-8})
    assert config.nx == 30
    assert config.solver.method is Method.SOR
    assert config.solver.omega == 1.7
    assert config.solver.tol == 1e-8


def test_unstable_dt_needs_force():
    dt = 0.3 * 100.0 * 0.1 ** 2
    with pytest.raises(ConfigurationError) as info:
        load_config(case="cavity", nx=10, dt=dt)
    assert info.value.keys == ("dt",)
    assert load_config(case="cavity", nx=10, dt=dt, force=True).dt == dt


def test_bad_solver_settings_are_configuration_errors():
    with pytest.raises(ConfigurationError):
        load_config(case="cavity", solver={"method": "sor", "omega": 2.5})
    with pytest.raises(ConfigurationError, match="valid solvers"):
        load_config(case="cavity", solver={"method": "cg"})


def test_tolerance_from_environment(monkeypatch):
    monkeypatch.setenv("NSBENCH_TOL", "1e-4")
    assert load_config(case="cavity", nx=8).solver.tol == pytest.approx(1e-4)


def test_save_and_reload_round_trip(tmp_path):
    config = load_config(case="cavity", nx=12, re=400.0, monitor=(3, 4), solver={"method": "multigrid"})
    path = save_config(config, tmp_path / "case.json")
    assert load_config(path) == config


def test_default_chamber_geometry():
    mask = chamber_mask()
    assert mask.shape == (31, 19)
    assert np.count_nonzero(mask == CellKind.INLET) == 1
    assert np.count_nonzero(mask == CellKind.OUTLET) == 1

    config = load_config(case="chamber")
    grid = case_grid(config)
    assert grid.dx == pytest.approx(CHAMBER_SPACING)
    assert grid.dy == pytest.approx(CHAMBER_SPACING)
    assert abs(grid.active_count - 425) <= 0.15 * 425
    assert (config.nx, config.ny) == (29, 17)
    bcs = case_boundaries(config)
    assert bcs.inflow_speed == 1.0 and bcs.wall_speed == 0.0


def test_all_interior_mask_is_a_plain_duct(tmp_path):
    path = write_mask(tmp_path / "duct.txt", 8, 4)
    config = load_config(case="chamber", mask=str(path))
    grid, bcs = build_chamber_case(config)
    assert not grid.is_masked
    assert grid.active_count == 32
    assert bcs.left.kind == "inflow"
    assert bcs.right.kind == "outflow"


def test_mask_must_agree_with_the_spacing(tmp_path):
    path = write_mask(tmp_path / "duct.txt", 8, 4)
    with pytest.raises(ConfigurationError):
        load_config(case="chamber", mask=str(path), nx=10)
    with pytest.raises(ConfigurationError, match="spacing"):
        load_config(case="chamber", mask=str(path), lx=4.0)


def test_cavity_lid_speed_reaches_boundaries():
    config = load_config(case="cavity", nx=8, vw=2.0)
    assert case_boundaries(config).wall_speed == 2.0
