"""Exception hierarchy.

Every error raised by the package derives from :class:`CiotError`, and the
value-shaped ones also derive from :class:`ValueError` so callers that only
know the standard library can still catch them.
"""


class CiotError(Exception):
    pass


class ProfileError(CiotError, ValueError):
    pass


class MissingField(ProfileError):
    pass


class UnitViolation(ProfileError):
    pass


class OrderingViolation(ProfileError):
    pass


class ChecksumMismatch(CiotError):
    pass


class OutOfDomain(CiotError, ValueError):
    pass


class InvalidRepetitions(CiotError, ValueError):
    pass


class HeaderExceedsTbs(CiotError, ValueError):
    pass


class UnknownFormat(CiotError, ValueError):
    pass


class CycleTooShort(CiotError, ValueError):
    pass


class ActiveWindowExceedsInterval(CiotError, ValueError):
    pass


class ScriptError(CiotError, ValueError):
    pass


class EmptyScript(ScriptError):
    pass


class NegativeSize(ScriptError):
    pass


class TechnologyMismatch(CiotError, ValueError):
    pass


class InvalidTimer(CiotError, ValueError):
    pass


# timer inconsistencies with a dedicated name
class MonitoringExceedsPeriod(InvalidTimer):
    pass


class OnDurExceedsCycle(InvalidTimer):
    pass


class PtwExceedsCycle(InvalidTimer):
    pass


class ZeroConsumption(CiotError, ZeroDivisionError):
    pass


class EmptyGrid(CiotError, ValueError):
    pass


class Unreachable(CiotError):
    """The scenario has no transmission configuration for this technology."""
