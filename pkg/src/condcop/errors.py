"""Exception hierarchy shared by all estimation routes."""


class CondCopError(Exception):
    """Base class for library errors."""


class DomainError(CondCopError, ValueError):
    """A parameter or target lies outside its admissible range."""


class InsufficientDataError(CondCopError, ValueError):
    """Too few observations for the requested computation."""


class DegenerateWeightsError(CondCopError, ValueError):
    """Smoothing weights are empty or put all mass on one point."""


class NumericError(CondCopError, ArithmeticError):
    """A numerical routine failed to converge or factorize."""


class EstimationError(CondCopError, RuntimeError):
    """A posterior could not be formed (e.g. every candidate infeasible)."""


class ConfigError(CondCopError, ValueError):
    """Invalid run configuration."""


class DataError(CondCopError, ValueError):
    """Malformed or missing input data."""


class ExtrapolationError(DomainError):
    """Evaluation point outside the range a basis was built for."""
