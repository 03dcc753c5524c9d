"""Exception types shared across the package."""


class ShapeError(ValueError):
    """An array argument has the wrong rank or an incompatible dimension."""


class StateError(RuntimeError):
    """An operation was called out of order (e.g. backward before forward)."""


class NonFiniteError(RuntimeError):
    """A NaN or infinity showed up where only finite values are allowed.

    Carries a diagnostics string listing the offending quantities so a
    failed run can be traced to the parameter or loss term that blew up.
    """

    def __init__(self, message, diagnostics=""):
        super().__init__(message + ("\n" + diagnostics if diagnostics else ""))
        self.diagnostics = diagnostics


class DivergenceError(NonFiniteError):
    """Training produced a non-finite loss or parameter and was aborted."""


class ConfigError(ValueError):
    """A run configuration is malformed or out of range."""


class CheckFailure(RuntimeError):
    """A verification command (gradient check, expert sanity gate) failed."""
