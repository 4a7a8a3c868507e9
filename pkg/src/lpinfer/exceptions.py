"""Exception hierarchy shared across the package."""


class LpInferError(Exception):
    """Base class for all errors raised by lpinfer."""


class DimensionMismatch(LpInferError, ValueError):
    pass


class RankDeficient(LpInferError, ValueError):
    pass


class EmptyInput(LpInferError, ValueError):
    pass


class InsufficientSample(LpInferError, ValueError):
    pass


class SingularSigma(LpInferError, ValueError):
    pass


class ExplosiveOverflow(LpInferError, FloatingPointError):
    """A simulated path left the representable range (|y| > 1e100)."""


class NonstationaryInput(LpInferError, ValueError):
    pass


class TooManyFailedDraws(LpInferError, RuntimeError):
    pass


class DomainError(LpInferError, ValueError):
    pass


class UndefinedAtH1(LpInferError, ValueError):
    pass


class ConfigInvalid(LpInferError, ValueError):
    pass


class KeyMismatch(LpInferError, KeyError):
    pass
