"""Exception types shared across the package."""


class ModlatError(Exception):
    pass


class NotLogSmooth(ModlatError):
    pass


class LevelMismatch(ModlatError):
    pass


class BottomLevel(ModlatError):
    pass


class BadLength(ModlatError):
    pass


class RankDeficient(ModlatError):
    pass


class Singular(ModlatError):
    pass


class NotCoprime(ModlatError):
    pass


class NotCoprimeNorms(ModlatError):
    pass


class LiftFailed(ModlatError):
    pass


class PrecisionExhausted(ModlatError):
    pass


class NearZeroEmbedding(ModlatError):
    pass


class RetryExhausted(ModlatError):
    pass


class DecodeFailed(ModlatError):
    pass


class DimensionMismatch(ModlatError):
    pass


class NotSymplectic(ModlatError):
    pass


class ShapeViolation(ModlatError):
    pass


class BoundViolation(ModlatError):
    pass


class BadParams(ModlatError):
    pass


class ParseError(ModlatError):
    pass
