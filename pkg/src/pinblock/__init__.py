"""Block decomposition and master stability analysis for pinning control of networks."""
from .errors import (BlowUpError, DecompositionError, InvariantViolation, NumericalError,
                     PinblockError, ValidationError)
from .netmodel import LaplacianPair, NetworkWithInputs, build_pair
from .numkernel import DEFAULT_TOL, Tolerance

__all__ = [
    "BlowUpError", "DecompositionError", "InvariantViolation", "NumericalError", "PinblockError",
    "ValidationError", "LaplacianPair", "NetworkWithInputs", "build_pair", "DEFAULT_TOL", "Tolerance",
]
__version__ = "0.1.0"
