"""Exceptions raised by resurgix computations.

Every computation error derives from ResurgixError so that the command line
front end can turn it into a structured JSON error and exit status 1."""


class ResurgixError(ValueError):
    """Base class for computation errors. Extra keyword arguments are kept as
    structured details and reported alongside the message."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self):
        return {'error': type(self).__name__,
                'message': self.message,
                'details': {key: str(value) for key, value in self.details.items()}}


# numcore
class ZeroLeadingCoefficient(ResurgixError):
    pass


class OrderUnderflow(ResurgixError):
    pass


class ZeroDenominator(ResurgixError):
    pass


class BranchPointProximity(ResurgixError):
    pass


class PrecisionExhausted(ResurgixError):
    pass


class ExpressionSyntaxError(ResurgixError):
    """Raised by the expression parser; `offset` is the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}", offset=offset)
        self.offset = offset


# landscape
class NoConvergence(ResurgixError):
    pass


class DegenerateCluster(ResurgixError):
    pass


class CoincidentValues(ResurgixError):
    pass


# thimble
class StokesCollision(ResurgixError):
    pass


class FlowEscape(ResurgixError):
    pass


class TailDominates(ResurgixError):
    pass


class AmbiguousValley(ResurgixError):
    pass


# saddle
class NonMorse(ResurgixError):
    pass


class OrderInfeasible(ResurgixError):
    pass


# borel
class FractionalPrefactor(ResurgixError):
    pass


class SingularityOnPath(ResurgixError):
    pass


class ContinuationUnstable(ResurgixError):
    pass


class FitUnstable(ResurgixError):
    pass


class MissingPartner(ResurgixError):
    pass


class RayHitsSingularity(ResurgixError):
    pass


# wcs
class RayOnBoundary(ResurgixError):
    pass


class BadAlignment(ResurgixError):
    pass


class NotInvertible(ResurgixError):
    pass


class NotNilpotent(ResurgixError):
    pass


# stsurf
class InconsistentGluing(ResurgixError):
    pass


class UnitCircumference(ResurgixError):
    pass


class RankDeficient(ResurgixError):
    pass


# qwf
class TurningPointOnPath(ResurgixError):
    pass


class NoDecay(ResurgixError):
    pass


class ConditionViolated(ResurgixError):
    pass


# nahm
class ZeroQFactorialDivision(ResurgixError):
    pass


class DegenerateSolution(ResurgixError):
    pass


class NoStableFit(ResurgixError):
    pass
