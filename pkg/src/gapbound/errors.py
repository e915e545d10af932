"""Exception types raised across the package."""


class GapBoundError(Exception):
    """Base class for all errors raised by :mod:`gapbound`."""


class ConfigError(GapBoundError):
    """Invalid or incomplete experiment configuration."""


class NumericalError(GapBoundError):
    """A numerical routine failed or produced an inconsistent result."""


class NonConvergence(NumericalError):
    pass


class DimensionMismatch(GapBoundError, ValueError):
    pass


class NotHermitian(NumericalError, ValueError):
    pass


class NotAntiHermitian(NumericalError, ValueError):
    pass


class NonFiniteInput(GapBoundError, ValueError):
    pass


class DimensionBudgetExceeded(ConfigError):
    pass


class BandOverlap(NumericalError):
    pass


class NotIsolated(NumericalError):
    pass


class EmptyBand(NumericalError):
    pass


class NotBlockDiagonal(NumericalError):
    pass


class ZeroGap(NumericalError):
    """Resonant denominator in the Sylvester solve."""


class RegimeViolation(GapBoundError):
    """An asymptotic check was requested outside its large-gap regime."""


class IdentityViolation(NumericalError):
    """An exact algebraic identity failed numerically (implementation bug)."""


class GridTooCoarse(NumericalError):
    pass


class NoJump(NumericalError):
    pass


class WindowTooNarrow(NumericalError):
    pass


class GridMismatch(NumericalError):
    pass


class NoTransition(NumericalError):
    pass
