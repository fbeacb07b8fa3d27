"""Exception hierarchy shared across the engine."""


class EngineError(Exception):
    """Base class for all engine failures."""


class DataError(EngineError):
    """Malformed or insufficient input data (files, panels, windows)."""


class ConfigError(EngineError):
    """Invalid run configuration or strategy specification."""


class SolverError(EngineError):
    """An optimization backend failed to produce a usable solution."""


class NonConvergenceError(SolverError):
    """Iterative solver hit its iteration cap.

    Carries the best iterate found so far in ``fit``.
    """

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class UndefinedRatioError(EngineError):
    """A ratio indicator has an empty or zero denominator.

    Callers that need a number rather than an error may report infinity.
    """


class DegenerateSeriesError(EngineError):
    """A statistic is undefined on a constant or too-short series."""
