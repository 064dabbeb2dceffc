"""Exception types shared across the package.

The CLI maps these onto process exit codes: validation problems exit
with 2, solver non-convergence with 3 and I/O failures with 4.
"""


class BasinUQError(Exception):
    """Base class for all package-specific errors."""


class ScenarioError(BasinUQError):
    """A scenario file failed to parse or violated its invariants."""


class NonConvergenceError(BasinUQError):
    """Newton iteration exhausted its budget without converging.

    Carries the last iterate and residual norm so callers can inspect
    (or log) the failure point.
    """

    def __init__(self, message, state=None, residual_norm=None, time=None):
        super().__init__(message)
        self.state = state
        self.residual_norm = residual_norm
        self.time = time


class OutOfDomainError(BasinUQError):
    """A parameter vector lies outside the declared hyper-rectangle."""


class OutOfColumnError(BasinUQError):
    """A depth query falls above the seafloor or below the basement."""

    def __init__(self, message, top=None, bottom=None):
        super().__init__(message)
        self.top = top
        self.bottom = bottom


class NotDownwardClosedError(BasinUQError):
    """A multi-index set misses one of its backward neighbours."""


class UndefinedMetricError(BasinUQError):
    """A relative metric was requested against a zero reference."""
