"""Exception types raised across the package."""


class SensplanError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(SensplanError):
    pass


class SingularConditioningBlock(NotPositiveDefinite):
    pass


class SingularDowndate(SensplanError):
    pass


class TooLargeToEnumerate(SensplanError):
    pass


class OutcomeSpaceTooLarge(SensplanError):
    pass


class NonFinite(SensplanError):
    pass


class Degeneracy(SensplanError, RuntimeWarning):
    pass


class ManifestError(SensplanError):
    pass
