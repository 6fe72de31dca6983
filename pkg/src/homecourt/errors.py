"""Exception hierarchy. CLI maps DataError subclasses to exit status 1."""


class HomecourtError(Exception):
    pass


class DataError(HomecourtError):
    def __init__(self, message: str, errors=()):
        super().__init__(message)
        self.errors = list(errors)


class HeaderError(DataError):
    pass


class EmptySelectionError(DataError):
    pass


class UndefinedValueError(DataError):
    pass


class DegenerateError(DataError):
    """Zero denominator, zero variance or a degenerate attendance pool."""


class NotApplicableError(DataError):
    """Operation needs a home/away game but got a neutral one."""


class MissingTeamError(DataError):
    pass


class EmptyMatchError(DataError):
    pass


class UnreliableResultError(DataError):
    pass


class UnsupportedStatError(DataError):
    pass


class ConvergenceError(HomecourtError):
    def __init__(self, message: str, coef=None, kkt_residual=None):
        super().__init__(message)
        self.coef = coef
        self.kkt_residual = kkt_residual


class DivergenceError(ConvergenceError):
    pass


class ConfigError(HomecourtError):
    pass
