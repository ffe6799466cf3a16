#!/usr/bin/env python3
"""
Errors
The exception hierarchy shared by every module of the solver and the harness.
"""

from typing import Any, Iterable, Optional


class NSBenchError(Exception):
    """Base class for every error this project raises on purpose."""


class ConfigurationError(NSBenchError):
    """Invalid configuration; `keys` names the offending settings."""

    def __init__(self, message: str, keys: Optional[Iterable[str]] = None):
        self.keys = tuple(keys or ())
        if self.keys:
            message = f"{message} (keys: {', '.join(self.keys)})"
        super().__init__(message)


class InvalidArgumentError(NSBenchError):
    """A field does not match the grid it is used with."""


class InconsistentStateError(NSBenchError):
    """Backward faces are out of step with the forward faces."""


class SingularLineError(NSBenchError):
    """Zero pivot met while eliminating a tridiagonal line."""

    def __init__(self, row: int, line: Optional[int] = None):
        self.row = row
        self.line = line
        where = f" on line {line}" if line is not None else ""
        super().__init__(f"zero pivot at row {row}{where}")


class InvalidHierarchyError(NSBenchError):
    """A multigrid level cannot be coarsened any further."""


class StabilityError(NSBenchError):
    """Time step exceeds the explicit stability bound."""

    def __init__(self, ratio: float, limit: float):
        self.ratio = ratio
        self.limit = limit
        super().__init__(
            f"dt/(Re*dx^2) = {ratio:.6g} exceeds the bound {limit:g}; pass force to run anyway"
        )


class StepFailureError(NSBenchError):
    """The pressure solve of a time step did not converge."""

    def __init__(self, cycle: int, trace: Any):
        self.cycle = cycle
        self.trace = trace
        super().__init__(
            f"pressure solve did not converge in cycle {cycle} "
            f"after {trace.iterations} iterations (last error {trace.last_error:.3e})"
        )


class OutputError(NSBenchError):
    """Output could not be written."""

    def __init__(self, path: Any, reason: str):
        self.path = path
        super().__init__(f"cannot write {path}: {reason}")


def validated(model: Any, **values: Any) -> Any:
    """Build a pydantic model, reporting validation failures as ConfigurationError."""
    from pydantic import ValidationError

    try:
        return model(**values)
    except ValidationError as ex:
        first = ex.errors()[0]
        keys = [".".join(str(part) for part in err["loc"]) or model.__name__ for err in ex.errors()]
        raise ConfigurationError(f"invalid {model.__name__}: {first['msg']}", keys) from ex
