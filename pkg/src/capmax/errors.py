"""Exception types shared across capmax."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(ValueError):
    """A grid, preset, policy or run configuration is inconsistent."""


class NonBracketingError(RuntimeError):
    """A ray march could not bracket the boundary of a superlevel set."""

    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction
