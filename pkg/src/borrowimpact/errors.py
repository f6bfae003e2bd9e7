"""Exception hierarchy shared by every stage of the analysis."""


class BorrowImpactError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(BorrowImpactError, ValueError):
    """An argument lies outside the domain of the function."""


# series
class EmptySeries(BorrowImpactError, ValueError):
    pass


class WindowOutOfRange(BorrowImpactError, ValueError):
    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


# least squares
class RankDeficient(BorrowImpactError, ValueError):
    pass


class Underdetermined(BorrowImpactError, ValueError):
    pass


# estimators
class DegenerateWindow(BorrowImpactError, ValueError):
    pass


class SeriesTooShort(BorrowImpactError, ValueError):
    pass


class DegenerateTarget(BorrowImpactError, ValueError):
    pass


# catalog
class SelfLoopEdge(BorrowImpactError, ValueError):
    pass


class ParseError(BorrowImpactError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SourceUnavailable(BorrowImpactError, RuntimeError):
    """The entity source could not be reached. Callers may retry."""

    retryable = True


# trends
class GapError(ParseError):
    pass


class OrderError(ParseError):
    pass


class RangeError(ParseError):
    pass


class CacheCorrupt(BorrowImpactError, RuntimeError):
    pass


# pipeline
class ConfigError(BorrowImpactError, ValueError):
    pass
