"""Exception hierarchy.

Construction-time problems raise; verification shortfalls are reported as
data (margins, flags) by the suites instead.
"""


class SkewSwitchError(Exception):
    """Base class for all package errors."""


# base systems
class NotUnimodular(SkewSwitchError):
    pass


class NotHyperbolicPattern(SkewSwitchError):
    pass


class OrientationReversed(SkewSwitchError):
    pass


# profiles
class ConstantsOutOfOrder(SkewSwitchError):
    pass


class BlendNotMonotone(SkewSwitchError):
    pass


class BranchOverlap(SkewSwitchError):
    pass


class OutOfDomain(SkewSwitchError, ValueError):
    pass


# towers
class SplittingUnavailable(SkewSwitchError):
    pass


class CocycleOverflow(SkewSwitchError, OverflowError):
    pass


# cones
class ApertureTooWide(SkewSwitchError):
    pass


class NotTransverse(SkewSwitchError):
    pass


class NoPowerFound(SkewSwitchError):
    pass


class CannotRescale(SkewSwitchError):
    pass


# splitting estimation
class DegenerateSeed(SkewSwitchError):
    pass


class NotConverged(SkewSwitchError):
    pass


# incoherence
class StepRejected(SkewSwitchError):
    pass


class TransversalityLost(SkewSwitchError):
    pass


class NonPositiveDelta(SkewSwitchError):
    pass


# configuration
class ConfigInvalid(SkewSwitchError):
    """Raised with a list of ``(field, message)`` diagnostics."""

    def __init__(self, problems):
        self.problems = list(problems)
        text = "; ".join(f"{field}: {msg}" for field, msg in self.problems)
        super().__init__(text or "invalid configuration")
