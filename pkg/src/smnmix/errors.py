"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the support of the requested quantity."""


class DataError(ValueError):
    """Input data violates a structural contract (shapes, censoring, columns)."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or produced a degenerate state."""
