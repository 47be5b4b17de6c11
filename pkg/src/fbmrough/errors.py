"""Exceptions raised by the library."""


class FbmRoughError(Exception):
    """Base class for computation errors (CLI exit code 1)."""


class TieError(FbmRoughError):
    """Two Fourier magnitudes coincide where a strict ordering was requested."""


class DegenerateDenominator(FbmRoughError):
    """A skeleton-integral denominator vanished."""


class InvalidContraction(FbmRoughError):
    """Contraction pairs overlap or pair a vertex with itself."""


class AlphaRangeError(FbmRoughError):
    """Hurst index outside the admissible range."""


class NonIntegrable(FbmRoughError):
    """An integrand is not summable over the requested scale window."""


class InsufficientData(FbmRoughError):
    """Too few admissible points for a fit."""
