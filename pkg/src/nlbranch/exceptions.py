"""Exception hierarchy shared across the package."""


class NLBranchError(Exception):
    """Base class for all package errors."""


class ParameterError(NLBranchError, ValueError):
    """A model, measure or configuration parameter violates its constraints."""


class ConfigError(NLBranchError, ValueError):
    """A serialized configuration is malformed (unknown keys, wrong schema)."""


class NumericalError(NLBranchError, RuntimeError):
    """A numerical procedure failed to produce a trustworthy value."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge within the subdivision budget."""


class NonFiniteStateError(NumericalError):
    """The Euler scheme produced a NaN or infinite state (not an explosion)."""
