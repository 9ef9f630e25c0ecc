"""Traveling waves for mean curvature flow with periodic forcing.

Numerical laboratory for graph evolution on the torus: explicit PDE
integration, the variational wave-speed characterization with a certified
convex solver, a 1D shooting oracle, and hypothesis checks on the forcing.
"""

from .grid import (
    PeriodicGrid,
    ScalarField,
    SupportMask,
    VectorField,
    constant_field,
    divergence,
    gradient,
    integrate,
    make_grid,
    perimeter_indicator,
)
from .forcing import Forcing, FourierMode, isoperimetric_constant, stats

__all__ = [
    "PeriodicGrid",
    "ScalarField",
    "SupportMask",
    "VectorField",
    "constant_field",
    "divergence",
    "gradient",
    "integrate",
    "make_grid",
    "perimeter_indicator",
    "Forcing",
    "FourierMode",
    "isoperimetric_constant",
    "stats",
]
