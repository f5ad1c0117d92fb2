"""Exception and warning types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters: bad dimensions, mismatched operators, out-of-range inputs."""


class StabilityError(ValueError):
    """Couplings lie outside the stable regime G+ < G-."""


class GridError(ValueError):
    """A phase-space grid does not contain the state's support."""


class TruncationWarning(UserWarning):
    """Probability mass reaches the top of the truncated Fock space."""
