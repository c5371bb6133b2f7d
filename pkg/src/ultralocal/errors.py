"""Exception hierarchy shared by the controllers, plants and the simulator."""


class UltraLocalError(Exception):
    """Base class for every error raised by this package."""


class TimingError(UltraLocalError):
    """A sample was pushed off the estimator's sampling lattice."""


class EstimationUnavailable(UltraLocalError):
    """The estimator window is not yet full."""


class DomainError(UltraLocalError):
    """Evaluation requested outside an object's time domain."""


class HorizonTooLongError(UltraLocalError):
    """An optimal segment cannot be represented in floating point."""


class SingularGainError(UltraLocalError):
    """The control gain alpha vanished (or the state that defines it is invalid)."""


class SingularStateError(UltraLocalError):
    """A plant right-hand side was evaluated at an invalid state."""


class InfeasibleTrajectoryError(UltraLocalError):
    """A flatness inverse has no real solution for the requested trajectory."""


class ConfigError(UltraLocalError):
    """Scenario file could not be parsed or validated."""


class SimulationAbort(UltraLocalError):
    """A closed-loop run was aborted; carries the time and channel."""

    def __init__(self, t, channel, cause):
        self.t = t
        self.channel = channel
        self.cause = cause
        super().__init__(f"simulation aborted at t={t:g} on channel {channel!r}: {cause}")
