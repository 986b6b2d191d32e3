"""Exception hierarchy shared by the library and the CLI."""


class StaggeredDGError(Exception):
    """Base error; ``exit_code`` is the CLI status for this failure class."""

    exit_code = 1


class ConfigError(StaggeredDGError):
    """Invalid configuration, argument or boundary data."""

    exit_code = 2

    def __init__(self, message: str, key: str | None = None) -> None:
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class MeshValidationError(StaggeredDGError):
    """A primal mesh violates its invariants or could not be parsed."""

    exit_code = 3

    def __init__(self, message: str, cell: int | None = None, line: int | None = None) -> None:
        self.cell = cell
        self.line = line
        prefix = ""
        if line is not None:
            prefix = f"line {line}: "
        elif cell is not None:
            prefix = f"cell {cell}: "
        super().__init__(prefix + message)


class SolverError(StaggeredDGError):
    """A linear solve failed or produced non-finite values."""

    exit_code = 4

    def __init__(self, message: str, step: int | None = None) -> None:
        self.step = step
        super().__init__(f"step {step}: {message}" if step is not None else message)


class UnisolvenceError(SolverError):
    """Local DOF functionals are not unisolvent on a subtriangle."""

    def __init__(self, space: str, subtriangle: int, condition: float) -> None:
        self.space = space
        self.subtriangle = subtriangle
        self.condition = condition
        super().__init__(
            f"{space}: local transform singular on subtriangle {subtriangle} "
            f"(condition number {condition:.3e})"
        )


class AcceptanceError(StaggeredDGError):
    """An acceptance check requested with ``--assert`` failed."""

    exit_code = 5
