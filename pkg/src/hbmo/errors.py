"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A parameter combination that can never produce a valid run."""


class ExtinctInterfaceError(RuntimeError):
    """An operation that needs a non-empty interface received an empty one."""


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its budget without meeting tolerance."""
