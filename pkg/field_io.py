#!/usr/bin/env python3
"""
Field I/O
CSV snapshots of interior fields in the classic Fortran layout, the
monitor-point time series, and the small CSV tables used by the benchmark
reports.

Snapshot layout: one text row per interior i, the interior j values joined
by commas with no trailing comma. Numbers use the shortest representation
that parses back exactly.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, TextIO, Union

import numpy as np

from errors import ConfigurationError, OutputError

log = logging.getLogger(__name__)

FIELD_NAMES = ("p", "u", "v", "stream", "vorticity")
MONITOR_FILE = "Time_U.csv"

PathLike = Union[str, Path]


def ensure_dir(path: PathLike) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as ex:
        raise OutputError(path, ex.strerror or str(ex)) from ex
    if not path.is_dir():
        raise OutputError(path, "not a directory")
    return path


def format_number(value: float) -> str:
    return repr(float(value))


# -----------------------------
#          Snapshots
# -----------------------------

@dataclass
class FieldSnapshot:
    name: str
    values: np.ndarray  # interior only, [i, j]
    cycle: Optional[int] = None

    @classmethod
    def from_field(cls, name: str, field: np.ndarray, cycle: Optional[int] = None) -> "FieldSnapshot":
        """Cut the interior out of a ghost-padded m x n field."""
        return cls(name=name, values=np.asarray(field, dtype=float)[1:-1, 1:-1], cycle=cycle)

    @property
    def filename(self) -> str:
        if self.cycle is None:
            return f"{self.name}.csv"
        return f"{self.name}{self.cycle:06d}.csv"


def write_snapshot(snapshot: FieldSnapshot, out_dir: PathLike) -> Path:
    if snapshot.name not in FIELD_NAMES:
        raise ConfigurationError(f"unknown field {snapshot.name!r}; expected one of {', '.join(FIELD_NAMES)}", ["field"])
    values = np.atleast_2d(np.asarray(snapshot.values, dtype=float))
    path = ensure_dir(out_dir) / snapshot.filename
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for row in values:
                fh.write(",".join(format_number(x) for x in row) + "\n")
    except OSError as ex:
        raise OutputError(path, ex.strerror or str(ex)) from ex
    log.debug("wrote %s (%dx%d)", path, values.shape[0], values.shape[1])
    return path


def read_snapshot(path: PathLike) -> np.ndarray:
    """Read a snapshot back; whitespace around values is tolerated."""
    rows: List[List[float]] = []
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rows.append([float(tok) for tok in line.split(",")])
    except OSError as ex:
        raise ConfigurationError(f"cannot read snapshot {path}: {ex}", ["snapshot"]) from ex
    except ValueError as ex:
        raise ConfigurationError(f"malformed snapshot {path}: {ex}", ["snapshot"]) from ex
    if rows and any(len(r) != len(rows[0]) for r in rows):
        raise ConfigurationError(f"snapshot {path} has ragged rows", ["snapshot"])
    return np.array(rows, dtype=float)


# -----------------------------
#         Monitor point
# -----------------------------

class MonitorWriter:
    """Append (time, u) pairs to Time_U.csv, one line per cycle."""

    def __init__(self, out_dir: PathLike, filename: str = MONITOR_FILE):
        self.path = ensure_dir(out_dir) / filename
        self._fh: Optional[TextIO] = None

    def __enter__(self) -> "MonitorWriter":
        try:
            self._fh = open(self.path, "w", encoding="utf-8")
        except OSError as ex:
            raise OutputError(self.path, ex.strerror or str(ex)) from ex
        return self

    def __exit__(self, *exc) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def append(self, time: float, u: float) -> None:
        if self._fh is None:
            raise OutputError(self.path, "monitor file is not open")
        self._fh.write(f"{format_number(time)},{format_number(u)}\n")
        self._fh.flush()


def write_monitor(series: Iterable[Sequence[float]], out_dir: PathLike) -> Path:
    with MonitorWriter(out_dir) as writer:
        for time, u in series:
            writer.append(time, u)
    return writer.path


def read_monitor(path: PathLike) -> np.ndarray:
    """(k, 2) array of time and monitored u."""
    data = read_snapshot(path)
    return data.reshape(-1, 2) if data.size else np.zeros((0, 2))


# -----------------------------
#            Tables
# -----------------------------

def write_table(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_number(v) if isinstance(v, (float, np.floating)) else v for v in row])
    except OSError as ex:
        raise OutputError(path, ex.strerror or str(ex)) from ex
    return path


def read_table(path: PathLike) -> List[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    except OSError as ex:
        raise ConfigurationError(f"cannot read table {path}: {ex}", ["report"]) from ex
