"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input violates a physical or statistical precondition."""


class CoverageError(DomainError):
    """A grid or integration box does not cover enough of the state's support."""


class ResourceError(RuntimeError):
    """A computation would exceed a configured resource budget.

    Carries the required and permitted sizes so the caller can coarsen the
    request or enlarge the budget.
    """

    def __init__(self, message, required=None, limit=None):
        super().__init__(message)
        self.required = required
        self.limit = limit


class ConfigError(ValueError):
    """A run configuration failed to parse or validate."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
