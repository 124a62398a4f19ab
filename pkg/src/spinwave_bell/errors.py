"""Exception types shared across the package."""


class SimulationError(Exception):
    """Base class for simulator-specific failures."""


class DegenerateChannelError(SimulationError):
    """Channel blocks both polarizations; conditional state undefined."""


class InsufficientDataError(SimulationError):
    """Statistic requested from an empty count matrix."""


class SettingsMismatchError(SimulationError):
    """Correlation values do not match the expected analyzer settings."""


class FitError(SimulationError):
    """Least-squares design is rank deficient or otherwise unusable."""


class ProgressError(SimulationError):
    """Experiment loop cannot reach its event target."""


class ConfigError(SimulationError):
    """Configuration file is malformed or violates a parameter invariant."""
