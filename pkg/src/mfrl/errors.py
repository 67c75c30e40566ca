"""Exception hierarchy.

Input problems derive from ``ValueError``; failures that only show up while
iterating (unstable steps, exploding losses, iteration caps) derive from
``NumericalError`` so the command line can map them to their own exit code.
"""


class MFRLError(Exception):
    pass


class NumericalError(MFRLError, ArithmeticError):
    pass


class NegativeMass(MFRLError, ValueError):
    pass


class ZeroTotalMass(MFRLError, ValueError):
    pass


class NormalizationTooLarge(MFRLError, ValueError):
    pass


class SizeOverflow(MFRLError, ValueError):
    pass


class DimensionMismatch(MFRLError, ValueError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class GridMismatch(DimensionMismatch):
    pass


class BadActionRange(MFRLError, ValueError):
    pass


class BufferTooSmall(MFRLError, ValueError):
    pass


class CFLViolation(MFRLError, ValueError):
    pass


class UnstableStep(NumericalError):
    pass


class NegativeDensity(NumericalError):
    pass


class IterationCap(NumericalError):
    pass


class NonFiniteGradient(NumericalError):
    pass


class NonFiniteLoss(NumericalError):
    pass
