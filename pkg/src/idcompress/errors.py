"""Exception hierarchy.

Every numerical failure raised by the package derives from
:class:`CompressionError`; the CLI maps those to exit code 2 and prints the
class name.
"""


class CompressionError(Exception):
    """Base class for all errors raised by idcompress."""


# matrix kernels
class ZeroMatrix(CompressionError, ValueError):
    pass


class RankUnreachable(CompressionError, ValueError):
    pass


class SingularPivot(CompressionError, ArithmeticError):
    pass


class NotSquare(CompressionError, ValueError):
    pass


class NotSymmetric(CompressionError, ValueError):
    pass


class NonFiniteInput(CompressionError, ValueError):
    pass


class DimensionMismatch(CompressionError, ValueError):
    pass


# ID algorithms and sketches
class EmptySketch(CompressionError, ValueError):
    pass


class UnstructuredNoInterp(CompressionError, ValueError):
    pass


class GeometryMismatch(CompressionError, ValueError):
    pass


class ExtrapolationRequired(CompressionError, ValueError):
    pass


class InvalidOperator(CompressionError, ValueError):
    pass


# blocking / pipeline
class BlockTooSmall(CompressionError, ValueError):
    pass


class CoverageGap(CompressionError, ValueError):
    pass


class ShortStream(CompressionError, ValueError):
    pass


class EmptyLog(CompressionError, ValueError):
    pass


class StageFailure(CompressionError, RuntimeError):
    """A stage-1 task failed; carries the (block, chunk) that failed."""

    def __init__(self, block, chunk, message=""):
        self.block = block
        self.chunk = chunk
        super().__init__(f"stage-1 failed on block {block}, chunk {chunk}: {message}")


# archive / metrics
class ZeroDenominator(CompressionError, ZeroDivisionError):
    pass


class ZeroReference(CompressionError, ValueError):
    pass


class BadMagic(CompressionError, ValueError):
    pass


class VersionUnsupported(CompressionError, ValueError):
    pass


class TruncatedPayload(CompressionError, ValueError):
    pass


class ChecksumMismatch(CompressionError, ValueError):
    pass


# bound verification
class RankExceedsSketch(CompressionError, ValueError):
    pass


class BoundViolation(CompressionError, AssertionError):
    pass
