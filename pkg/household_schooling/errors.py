class HouseholdSchoolingError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(HouseholdSchoolingError, ValueError):
    """Invalid configuration or argument; `field` names the culprit."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class DataError(HouseholdSchoolingError, ValueError):
    """Malformed input data. `problems` holds (line_number, message) pairs."""

    def __init__(self, message: str, problems: list[tuple[int, str]] | None = None):
        self.problems = problems or []
        if self.problems:
            detail = "; ".join(f"line {line}: {msg}" for line, msg in self.problems[:20])
            message = f"{message} ({detail})"
        super().__init__(message)


class InfeasibleAllocationError(HouseholdSchoolingError, ValueError):
    pass


class SolverError(HouseholdSchoolingError, ValueError):
    pass


class IdentificationError(HouseholdSchoolingError):
    """Observation is a corner: only bounds on the ability are available."""

    def __init__(self, message: str, bounds: tuple[float, float]):
        super().__init__(f"{message} (a1 in [{bounds[0]:.6f}, {bounds[1]:.6f}])")
        self.bounds = bounds


class EmptyCellError(HouseholdSchoolingError):

    def __init__(self, cells: list[str], context: str = ""):
        where = f" in {context}" if context else ""
        super().__init__(f"empty composition cell(s){where}: {', '.join(cells)}")
        self.cells = list(cells)


class ConvergenceError(HouseholdSchoolingError):
    """Iterative procedure stopped without converging; keeps the best iterate."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class RankError(HouseholdSchoolingError):

    def __init__(self, regressor: str):
        super().__init__(f"regressor '{regressor}' has no within-group variation")
        self.regressor = regressor
