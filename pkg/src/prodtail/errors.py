"""Exception types shared across the toolkit."""


class ProdtailError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(ProdtailError, ValueError):
    """A distribution parameter or operation argument is out of its valid domain."""


class NumericalError(ProdtailError, RuntimeError):
    """A numerical routine failed to reach the requested accuracy."""


class ConvergenceError(NumericalError):
    """An iterative solver did not converge."""


class SampleSizeError(ProdtailError, ValueError):
    """The sample is smaller than the minimum required by the method."""


class DegenerateSampleError(ProdtailError, ValueError):
    """The sample carries no usable variation (e.g. identical quartiles)."""


class DataError(ProdtailError, ValueError):
    """Input data is malformed or empty in a way that prevents processing."""
