"""Exception types raised across the package."""


class BalgpdError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(BalgpdError, ValueError):
    """A covariance matrix could not be factored even after jitter escalation."""


class DimensionMismatch(BalgpdError, ValueError):
    pass


class ConvergenceFailure(BalgpdError, RuntimeError):
    pass


class DegenerateData(BalgpdError, ValueError):
    pass


class EmptyBoxError(BalgpdError, ValueError):
    pass


class PoolTooSmall(BalgpdError, ValueError):
    pass


class NoFeasibleStart(BalgpdError, RuntimeError):
    """Every start (and every resample of it) violated the safety constraint."""


class EmptyHistory(BalgpdError, ValueError):
    pass


class CollinearNeighborhood(BalgpdError, ValueError):
    pass


class TooFewPoints(BalgpdError, ValueError):
    pass


class HistoryTooShort(BalgpdError, ValueError):
    pass


class ParseError(BalgpdError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyFile(BalgpdError, ValueError):
    pass


class ConfigError(BalgpdError, ValueError):
    pass
