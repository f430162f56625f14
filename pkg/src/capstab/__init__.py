"""Stability and Morse index of minimal surfaces meeting a ball boundary at a constant contact angle.

Modules
-------
spaceform   conformal ball models of the three space forms, Killing fields, potentials
surface     analytic families, meshes, shape data and the boundary frame
discretize  piecewise-linear assembly of the stability form
spectrum    Robin eigenproblem, constrained index and verdict
identities  numerical checks of the test-function identities
flow        wetting-area-preserving flow and the finite-difference second variation
topology    harmonic fields, index lower bounds and topological predicates
cli         command line front end
"""

from .discretize import assemble, evaluate_Q
from .errors import CapstabError
from .spaceform import AmbientBall, AmbientSpace
from .spectrum import analyze_spectrum, constrained_index, robin_spectrum
from .surface import SurfaceFamily, boundary_frame, build_family

__version__ = "0.1.0"

__all__ = [
    "AmbientBall",
    "AmbientSpace",
    "CapstabError",
    "SurfaceFamily",
    "analyze_spectrum",
    "assemble",
    "boundary_frame",
    "build_family",
    "constrained_index",
    "evaluate_Q",
    "robin_spectrum",
]
