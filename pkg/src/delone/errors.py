"""Exception hierarchy for the delone package."""


class DeloneError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedDimension(DeloneError):
    pass


class DuplicatePoints(DeloneError):
    pass


class PointOutsideWindow(DeloneError):
    pass


class WindowTooSmall(DeloneError):
    pass


class InsufficientWindow(DeloneError):
    """A requested ball exits the finite window; no silent truncation."""


class EmptyPatch(DeloneError):
    pass


class SingularBasis(DeloneError):
    pass


class NonPrimitiveRule(DeloneError):
    pass


class InfeasibleEnumeration(DeloneError):
    pass


class EmptyAcceptanceWindow(DeloneError):
    pass


class UnknownPatchClass(DeloneError):
    pass


class NoOccurrenceNearOrigin(DeloneError):
    pass


class NoOccurrence(DeloneError):
    pass


class PeriodicInput(DeloneError):
    """A nonzero translation maps the window onto itself on the interior."""


class UnboundedCell(DeloneError):
    """Voronoi cutoff too small relative to the covering radius."""


class EmptySites(DeloneError):
    pass


class DegenerateDiameter(DeloneError):
    pass


class OutputNotDelone(DeloneError):
    pass


class NoReturnVectorsFound(DeloneError):
    pass


class FamilyMismatch(DeloneError):
    pass


class UsageError(DeloneError):
    pass


class InputError(DeloneError):
    pass
