"""Exception and warning types.

Errors split into two families so the CLI can map them to exit codes:
``InputError`` (bad files, bad values, bad arguments) and ``ModelError``
(failures while fitting, scoring or explaining).
"""


class CountyRiskError(Exception):
    """Base class for every error raised by this package."""


class InputError(CountyRiskError):
    pass


class ModelError(CountyRiskError):
    pass


class MissingColumn(InputError):
    pass


class DuplicateFips(InputError):
    pass


class UnjoinedCounty(InputError):
    pass


class ParseError(InputError):
    pass


class EmptyDataset(InputError):
    pass


class InvalidValue(InputError):
    """A cell violates its variable's domain (e.g. a percentage above 100)."""


class UnknownVariable(InputError):
    pass


class InsufficientDonors(ModelError):
    def __init__(self, shortfalls):
        # shortfalls: {variable: number of observed donors}
        self.shortfalls = dict(shortfalls)
        detail = ", ".join(f"{k} ({v} observed)" for k, v in self.shortfalls.items())
        super().__init__(f"not enough donor counties for: {detail}")


class EmptyFitSet(ModelError):
    pass


class MissingParams(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class DegenerateSplit(ModelError):
    pass


class ZeroVariance(ModelError):
    pass


class InvalidK(ModelError):
    pass


class TooManyFeatures(ModelError):
    pass


class EmptyInput(ModelError):
    pass


class MissingCoverage(ModelError):
    pass


class GridPointError(ModelError):
    """Wraps a learner failure with the grid point that triggered it."""

    def __init__(self, params, cause):
        self.params = params
        self.cause = cause
        super().__init__(f"grid point {params!r} failed: {cause}")


class IsolatedCountyWarning(UserWarning):
    pass


class RankDeficientWarning(UserWarning):
    pass
