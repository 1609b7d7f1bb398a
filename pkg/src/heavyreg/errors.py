"""Exception types shared across the package."""


class HeavyRegError(Exception):
    """Base class for all package-specific failures."""


class TailModelError(HeavyRegError):
    """A noise model was constructed or used outside its valid domain."""


class IntegrationError(HeavyRegError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class SpectrumError(HeavyRegError):
    """Covariance decomposition failed validation (not PSD, bad reconstruction)."""


class ConvergenceError(HeavyRegError):
    """An iterative solver exhausted its budget without meeting tolerance."""


class ConfigError(HeavyRegError):
    """A run configuration is malformed (unknown key, bad value, bad section)."""
