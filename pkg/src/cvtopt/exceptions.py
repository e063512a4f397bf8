class DegenerateError(ValueError):
    """Base class for configurations where the diagram or its derivatives break down."""


class DegenerateInput(DegenerateError):
    """Raised when sites coincide or a cell cannot be built."""


class DegenerateVertex(DegenerateError):
    """Raised when a vertex Jacobian cannot be formed (near-zero determinant)."""


class DegenerateRange(ValueError):
    """Raised when a histogram range collapses to a single value."""
