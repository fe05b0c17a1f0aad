"""Approximate transformation-optics cloaking for the heat equation.

Blow-up maps and push-forward media, finite element solvers in the time and
frequency domain, and a harness that measures how visible a cloaked object is.
"""

from thermocloak.transform import BlowupMap, push_forward_density, push_forward_tensor
from thermocloak.grids import Grid2D, RadialGrid
from thermocloak.medium import MaterialField, ObjectSpec, assemble_blownup_medium, assemble_cloak_medium

__version__ = "0.1.0"

__all__ = [
    "BlowupMap",
    "Grid2D",
    "MaterialField",
    "ObjectSpec",
    "RadialGrid",
    "assemble_blownup_medium",
    "assemble_cloak_medium",
    "push_forward_density",
    "push_forward_tensor",
]
