"""Exception types shared across the package.

Validation problems (bad manifests, bad samples, bad arguments) derive from
ValueError; numeric problems (indefinite matrices, unstable filters, solver
non-convergence) derive from ArithmeticError.  The command line maps the two
families to distinct exit codes.
"""


class SchemaError(ValueError):
    """A manifest or serialized artifact violates the expected layout."""


class DataError(ValueError):
    """Sample values are unusable (non-finite, wrong shape, empty)."""


class StratificationError(ValueError):
    """A cross-validation fold cannot contain both classes."""


class NumericError(ArithmeticError):
    """A numeric routine produced an unusable result."""


class FilterDesignError(NumericError):
    """A designed filter came out unstable or degenerate."""


class ConvergenceError(NumericError):
    """The solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, gap: float):
        super().__init__(message)
        self.gap = gap
