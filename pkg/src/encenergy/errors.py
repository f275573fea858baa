"""Exception and warning types shared across the package."""


class EncEnergyError(Exception):
    """Base class for all package errors."""


class DataError(EncEnergyError, ValueError):
    """Malformed, inconsistent or missing input data."""


class CatalogVersionError(DataError):
    pass


class NumericalError(EncEnergyError, ArithmeticError):
    """A numerical routine failed to converge or hit a singular system."""


class RankDeficientWarning(UserWarning):
    pass


class NegativeEnergyWarning(UserWarning):
    pass


class MissingColumnWarning(UserWarning):
    pass
