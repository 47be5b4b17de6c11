"""Fourier normal ordering, Feynman-diagram power counting and multiscale
renormalization for rough paths over fractional Brownian motion."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AlphaRangeError,
    DegenerateDenominator,
    FbmRoughError,
    InsufficientData,
    InvalidContraction,
    NonIntegrable,
    TieError,
)

__all__ = [
    "__version__",
    "AlphaRangeError",
    "DegenerateDenominator",
    "FbmRoughError",
    "InsufficientData",
    "InvalidContraction",
    "NonIntegrable",
    "TieError",
]
