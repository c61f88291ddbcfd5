"""Numerical laboratory for singularities of mean curvature flow in R^N."""
from .immersion import DiscreteImmersion, load_immersion, save_immersion, validate
from .geometry import GeometrySnapshot, compute_geometry

__version__ = "0.1.0"

__all__ = [
    "DiscreteImmersion",
    "GeometrySnapshot",
    "compute_geometry",
    "load_immersion",
    "save_immersion",
    "validate",
]
