"""Exception types raised across the toolkit.

Hard failures are exceptions; soft quality warnings (HeavyTailVariance,
NoPlateau, CensorBias, Unreliable, ...) are carried as flags on result
objects so a run can finish and report exit code 2 instead of aborting.
"""


class KestenEvtError(Exception):
    """Base class for all toolkit errors."""


class ModelError(KestenEvtError):
    """A model specification violates an invariant."""


class ConfigError(KestenEvtError):
    """A run configuration document is malformed."""


class DimensionMismatch(ModelError):
    """A law variant requires a different dimension than requested."""


class SingularProduct(KestenEvtError):
    """A sampled linear map is numerically singular."""


class Inconclusive(KestenEvtError):
    """A hypothesis check could not reach a verdict; reason in args[0]."""


class NoBracket(KestenEvtError):
    """The moment curve has no sign change on the given bracket."""


class NoisyCurve(KestenEvtError):
    """Monte Carlo noise at the candidate root exceeds the tolerance."""


class TruncationStall(KestenEvtError):
    """Backward-series truncation did not converge within the step cap."""


class DegenerateTail(KestenEvtError):
    """Top order statistics are tied; tail estimation is impossible."""


class MissingDirections(KestenEvtError):
    """A directional histogram is required in dimension >= 2 but absent."""


class NoExceedance(KestenEvtError):
    """No sample exceeds the requested level."""


class AlphaOutOfRange(KestenEvtError):
    """The tail index is outside the admissible range for the operation."""


class RegimeMismatch(KestenEvtError):
    """Partial-sum samples come from incompatible centering regimes."""


class NotOneDimensional(KestenEvtError):
    """Grid discretization is only defined in dimension one."""


class NoConvergence(KestenEvtError):
    """Power iteration did not reach the residual target."""


class ChiTooLarge(KestenEvtError):
    """Drift exponent chi must stay below the tail index alpha."""


class AllCensored(KestenEvtError):
    """Every hitting-time replica hit the horizon."""


class RejectionStall(KestenEvtError):
    """Rejection sampling acceptance rate collapsed below 1e-4."""


# Soft flag names shared between modules and the CLI exit-code logic.
FLAG_HEAVY_TAIL_VARIANCE = "HeavyTailVariance"
FLAG_NO_PLATEAU = "NoPlateau"
FLAG_CENSOR_BIAS = "CensorBias"
FLAG_UNRELIABLE = "Unreliable"
FLAG_BAD_FIT = "BadFit"
FLAG_TOO_FEW_CLUSTERS = "TooFewClusters"
FLAG_VARIANCE_TOO_HIGH = "VarianceTooHigh"
FLAG_OVERFLOW = "Overflow"
FLAG_NO_GAP = "NoGap"
