"""Exception types shared across the package."""


class RemestError(Exception):
    """Base class for all package errors."""


class NonConvergence(RemestError):
    """An iterative solver exhausted its iteration budget."""


class SingularInnovation(RemestError):
    """Innovation covariance is numerically singular (condition > 1e12)."""


class UnknownConstant(RemestError):
    """Quantizer constant is not known for the requested dimension."""


class RateOverflow(RemestError):
    """Required quantizer rate exceeds 64 bits."""


class DomainError(RemestError):
    """Argument outside the mathematical domain of an operation."""


class StructureViolation(RemestError):
    """Covariance matrix deviates from the structured (P11-parameterized) form."""

    def __init__(self, message, max_deviation=None):
        super().__init__(message)
        self.max_deviation = max_deviation


class DegenerateBelief(RemestError):
    """Belief update normalizer underflowed."""


class ConfigError(RemestError):
    """Run configuration failed schema or range validation."""
