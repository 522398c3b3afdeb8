"""Constant mean curvature and minimal surfaces from Weierstrass-type data
via loop group factorization, with symmetry and dressing machinery."""

__version__ = "0.1.0"

from .frames import (PotentialSpec, SurfaceOptions, surface_from_potential,
                     extract_curvature)
from .grid import DomainGrid
from .mesh import SurfaceMesh
from .weier import WeierstrassData, minimal_surface

__all__ = [
    "PotentialSpec", "SurfaceOptions", "surface_from_potential",
    "extract_curvature", "DomainGrid", "SurfaceMesh", "WeierstrassData",
    "minimal_surface", "__version__",
]
