"""Exception types shared across the package."""


class CapaError(Exception):
    """Base class for all package-specific errors."""


class DegenerateGeometryError(CapaError):
    """Field evaluation requested at (near-)zero source-observer distance."""


class ScenarioGenerationError(CapaError):
    """Rejection sampling could not place group centers under the distance limits."""


class ScenarioParseError(CapaError):
    """Scenario/config file is malformed; message carries line and field info."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ConditioningError(CapaError):
    """A linear system required by a closed form is too ill-conditioned to trust."""


class InfeasibleProblemError(CapaError):
    """Rate floors cannot be met (or a warm start violates them)."""
