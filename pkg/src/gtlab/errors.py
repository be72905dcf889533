"""Exception hierarchy shared by all gtlab modules."""

from __future__ import annotations


class GTLError(Exception):
    """Base class for every error raised by gtlab."""


class ConfigError(GTLError):
    pass


class ConfigParse(ConfigError):
    pass


# geometry
class DegenerateLattice(ConfigError):
    pass


class ResolutionTooSmall(ConfigError):
    pass


class NonRealConformalFactor(ConfigError):
    pass


# modes
class ThetaGridTooSmall(GTLError):
    pass


class NonUniformGrid(GTLError):
    pass


class EmptyStack(GTLError):
    pass


# operators
class BandLimitExceeded(GTLError):
    pass


class DegreeOutOfRange(GTLError):
    pass


class TruncationTooTight(GTLError):
    pass


class RankDeficient(GTLError):
    pass


# transport
class SolveFailed(GTLError):
    pass


class GrowthDetected(GTLError):
    pass


class UnsupportedSurface(GTLError):
    pass


# twistor
class NegativeModesPresent(GTLError):
    pass


class RadiusOutOfRange(GTLError):
    pass


class InvalidBidegree(GTLError):
    pass


class NegativeModesBelowMinusOne(GTLError):
    pass


class PsiVanishes(GTLError):
    pass


# cone
class ZeroInitialCovector(GTLError):
    pass


class UnresolvedCrossing(GTLError):
    pass


class NoConvergence(GTLError):
    pass
