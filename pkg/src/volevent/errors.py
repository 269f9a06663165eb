"""Exception hierarchy.

Every error raised by the library derives from :class:`VolEventError`. The
three intermediate classes map onto the CLI exit codes (config 2, data 3,
numerical 4).
"""


class VolEventError(Exception):
    exit_code = 1


class ConfigError(VolEventError):
    exit_code = 2


class DataError(VolEventError):
    exit_code = 3


class NumericalError(VolEventError):
    exit_code = 4


# market data
class NonPositivePrice(DataError):
    pass


class TooShortSeries(DataError):
    pass


class EmptyIntersection(DataError):
    pass


class WindowOutOfRange(DataError):
    pass


class OutcomeDateBeyondData(DataError):
    pass


class InsufficientHistory(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, path, row, message):
        self.path = str(path)
        self.row = row
        super().__init__(f"{self.path}, row {row}: {message}")


# garch
class NonStationaryParams(NumericalError):
    pass


class NonPositiveVariance(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class DegenerateData(NumericalError):
    pass


# event study
class TooFewCases(NumericalError):
    pass


class EmptyWindow(NumericalError):
    pass


class NoEligibleDates(DataError):
    pass


# cross-section
class ZeroPreEventVariance(NumericalError):
    pass


class TooShortWindow(DataError):
    pass


class MissingFeature(DataError):
    pass


class SingularDesign(NumericalError):
    pass


class InsufficientObservations(NumericalError):
    pass
