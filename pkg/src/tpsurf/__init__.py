"""Tangent-point repulsive energies of discretized m-dimensional sets in
R^n: energies, regularity diagnostics (density ratios, beta numbers,
stopping distances, oscillation exponents), linking parity, and a
measure-constrained gradient flow.
"""

__version__ = "0.1.0"

from .grassmann import LemmaConstants, Plane, Slab, angle
from .simplicial import QuadratureCloud, SimplicialSet, load, quadrature, save
from .tpe import EnergyReport, LocalEnergy, energy, gradient, inv_rtp, local_energy

__all__ = [
    "__version__",
    "Plane",
    "Slab",
    "LemmaConstants",
    "angle",
    "SimplicialSet",
    "QuadratureCloud",
    "load",
    "save",
    "quadrature",
    "energy",
    "local_energy",
    "gradient",
    "inv_rtp",
    "EnergyReport",
    "LocalEnergy",
]
