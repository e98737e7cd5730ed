"""Exception and warning types raised across the package."""


class HawkesError(Exception):
    """Base class for package errors."""


class NotSupercriticalError(HawkesError, ValueError):
    pass


class DivergentIntegralError(HawkesError, ValueError):
    pass


class CriticalRegimeError(HawkesError, ValueError):
    pass


class InvalidMassError(HawkesError, ValueError):
    pass


class ExplosionError(HawkesError, RuntimeError):
    """Raised when a realization exceeds its event cap."""

    def __init__(self, message, n_events=None, time=None):
        super().__init__(message)
        self.n_events = n_events
        self.time = time


class SampleTooSmallError(HawkesError, ValueError):
    pass


class NonPositiveValueError(HawkesError, ValueError):
    pass


class NoSurvivorsError(HawkesError, RuntimeError):
    pass


class StepTooCoarseWarning(UserWarning):
    pass


class InsufficientReplicasWarning(UserWarning):
    pass


class RegimeMismatchWarning(UserWarning):
    pass


class BoxTooSmallWarning(UserWarning):
    pass


class TieWarning(UserWarning):
    pass
