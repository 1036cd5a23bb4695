"""Exception types shared across the package."""


class SwarmCertError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SwarmCertError, ValueError):
    """Input is malformed: non-finite, wrong shape, out of range."""


class DegeneracyError(SwarmCertError, ValueError):
    """Geometry is degenerate (coplanar hull input, coincident robots, ...)."""


class ScenarioParseError(InvalidInputError):
    """Scenario JSON failed validation; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class ConvergenceError(SwarmCertError):
    """An iterative solver hit its cap. ``best`` holds the best iterate seen."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class RankDeficiencyError(SwarmCertError):
    """A linear system is underdetermined; ``deficit`` is the null dimension."""

    def __init__(self, message, deficit):
        super().__init__(message)
        self.deficit = deficit


class UnreachableError(SwarmCertError):
    """Path search could not connect start and goal."""


class InfeasiblePlanError(SwarmCertError):
    """Trajectory optimization ended with a constraint still violated."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
