"""Exception hierarchy for mwl."""


class MwlError(Exception):
    pass


class ModelError(MwlError, ValueError):
    """A distribution or walk model violates a structural requirement."""


class InvalidPMF(ModelError):
    pass


class NonZeroMean(ModelError):
    pass


class ZeroVariance(ModelError):
    pass


class JumpOverMembrane(ModelError):
    pass


class ReducibleChain(ModelError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class GridBeyondHorizon(MwlError, ValueError):
    pass


class NoConvergence(MwlError, RuntimeError):
    pass


class BandTooSmall(MwlError, RuntimeError):
    pass


class SingularSystem(MwlError, RuntimeError):
    pass


class DegenerateDenominator(MwlError, ArithmeticError):
    pass


class DegenerateGamma(MwlError, ValueError):
    pass


class NonPositiveTime(MwlError, ValueError):
    pass


class EmptySample(MwlError, ValueError):
    pass
