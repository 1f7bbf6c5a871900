"""Error types raised by the solvers and the I/O layer."""


class CflViolationError(RuntimeError):
    """Advective CFL guard tripped; the step is refused, not sub-stepped."""


class SolverConvergenceError(RuntimeError):
    """An iterative solve failed to reach its tolerance within its sweep cap."""


class FieldNanError(RuntimeError):
    """A field became non-finite during time stepping."""


class FieldFormatError(ValueError):
    """Malformed binary field file (bad magic, truncation, or dimensions)."""


class ConfigError(ValueError):
    """Invalid or unparseable run configuration."""
