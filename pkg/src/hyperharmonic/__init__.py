"""Harmonic extensions of quasiconformal maps of the sphere into hyperbolic 3-space, numerically.

Submodules:

* :mod:`~hyperharmonic.geometry`: ball and half-space models, isometries, Green functions.
* :mod:`~hyperharmonic.boundary`: boundary maps of the sphere and their differentials.
* :mod:`~hyperharmonic.extension`: the Gaussian (good) extension and exact linear harmonic maps.
* :mod:`~hyperharmonic.calculus`: energy, tension, distortion and the distance comparison inequality.
* :mod:`~hyperharmonic.flow`: harmonic map heat flow on lattice domains.
* :mod:`~hyperharmonic.verify`: potential theory, constants and the main inequality chain.
* :mod:`~hyperharmonic.hopf`: Hopf differentials and harmonic maps of the disc.
* :mod:`~hyperharmonic.cli`: the ``hyperharmonic`` command.
* :mod:`~hyperharmonic.estimators`: scikit-learn style wrappers (imported on demand).
"""
from .boundary import Linear, MobiusBoundary, RadialPower, parse_map
from .calculus import local_geometry
from .extension import GoodExtensionMap, LinearHarmonicMap, QuadratureSpec
from .flow import GridDomain, MapField, run_flow, solve_restricted
from .geometry import BALL, HALFSPACE, PAPER_BALL, STANDARD, DomainError

__version__ = "0.1.0"

__all__ = [
    "BALL", "HALFSPACE", "STANDARD", "PAPER_BALL", "DomainError", "Linear", "RadialPower", "MobiusBoundary",
    "parse_map", "QuadratureSpec", "GoodExtensionMap", "LinearHarmonicMap", "local_geometry", "GridDomain",
    "MapField", "run_flow", "solve_restricted",
]
