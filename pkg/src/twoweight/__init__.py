"""Two-weight constants for fractional singular integrals on atomic measures."""
from . import _backend
from .geometry import Box, Cube, DyadicGrid, GoodnessParams, QuasiMap, UpperHalfPoint
from .measures import AtomicMeasure, CommonPointSet

__all__ = [
    "AtomicMeasure",
    "Box",
    "CommonPointSet",
    "Cube",
    "DyadicGrid",
    "GoodnessParams",
    "QuasiMap",
    "UpperHalfPoint",
]
__version__ = "0.1.0"
BACKEND = _backend.NAME
