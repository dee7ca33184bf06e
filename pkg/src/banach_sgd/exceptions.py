"""Error types shared across the package."""


class InvalidInputError(ValueError):
    """A numerical input is unusable (non-finite entries, zero reference, ...)."""


class DimensionMismatchError(ValueError):
    """Vector or matrix shapes are inconsistent."""


class ConfigurationError(ValueError):
    """A parameter violates a construction invariant."""


class IterationInvariantError(RuntimeError):
    """An internal invariant broke during a solver run (e.g. non-finite iterate)."""
