"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """An argument violates an operation's preconditions."""


class DomainError(ValueError):
    """A request lies outside the mathematical domain of an operation."""


class ConfigurationError(ValueError):
    """A configuration (file, window, run setup) is unusable."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed (factorization, quadrature, ...)."""


class SizeError(RuntimeError):
    """A problem exceeds a configured size cap."""


class RankError(RuntimeError):
    """A linear system is rank deficient."""


class FitError(RuntimeError):
    """Every optimization attempt failed to produce a usable estimate."""
