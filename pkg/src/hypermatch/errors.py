"""Exception hierarchy. Every error is also a ``ValueError`` so callers that
only care about bad input can catch that."""


class HypermatchError(ValueError):
    pass


class IndexOutOfRange(HypermatchError):
    pass


class DiagonalEntry(HypermatchError):
    pass


class DimensionMismatch(HypermatchError):
    pass


class FormatError(HypermatchError):
    pass


class NotAnAssignment(HypermatchError):
    pass


class HomogeneousTuple(HypermatchError):
    pass


class BadShape(HypermatchError):
    pass


class NonFiniteEntry(HypermatchError):
    pass


class ConfigInvalid(HypermatchError):
    pass


class DegenerateTriangle(HypermatchError):
    pass


class TooFewPoints(HypermatchError):
    pass


class AllTriplesDegenerate(HypermatchError):
    pass


class BadSigma(HypermatchError):
    pass


class LengthMismatch(HypermatchError):
    pass


class TooLarge(HypermatchError):
    pass


class NotSymmetric(HypermatchError):
    pass
