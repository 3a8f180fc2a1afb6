"""Exception types shared across the package."""


class RainforgeError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(RainforgeError, ValueError):
    """A physical quantity or parameter failed construction-time validation."""


class DomainError(RainforgeError, ValueError):
    """An argument fell outside the mathematical domain of an operation."""


class ConfigurationError(RainforgeError):
    """Inconsistent or invalid configuration (bad schema, dimension mismatch...)."""


class ParticleBudgetError(RainforgeError):
    """The requested spawn count exceeds the configured particle budget."""

    def __init__(self, requested: int, budget: int):
        self.requested = requested
        self.budget = budget
        super().__init__(
            f"spawn count {requested} exceeds particle budget {budget}; "
            f"raise sim.particle_budget or shrink the simulation volume"
        )


class DecodeError(RainforgeError):
    """An input image file could not be decoded."""


class InternalError(RainforgeError):
    """A contract between pipeline stages was violated (a bug, not user error)."""
