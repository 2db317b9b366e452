"""Exception hierarchy."""


class FbmDelayError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(FbmDelayError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(FbmDelayError, ValueError):
    """Inconsistent or invalid configuration (grids, bandwidths, schemas)."""


class GenerationError(FbmDelayError):
    """A Gaussian sampler could not factor its covariance."""


class DivergenceError(FbmDelayError):
    """A numerical integration produced a non-finite value."""


class OutOfRangeError(FbmDelayError, ValueError):
    """A level lies outside the admissible crossing window."""


class EdgeError(FbmDelayError, ValueError):
    """An estimation time is too close to the ends of the observation window."""


class KernelError(FbmDelayError, ValueError):
    """A kernel could not be constructed or fails its moment conditions."""
