"""Spectral determinants of pulled-back round metrics on branched covers of the sphere.

Modules
-------
rational_map   maps, critical points and SU(2) target rotations
local_frame    distinguished parameters and Schiffer connections at cones
spectral       Galerkin eigensolver and cone coefficients of eigenfunctions
zeta_det       heat-trace fits, zeta-regularized determinants and exact oracles
tau            the genus-zero tau one-form and its path integrals
perturbation   model solutions near a cone, b(lambda), group derivatives
cli            JSON-driven command-line front end
"""
from .errors import ConicDetError
from .rational_map import INF, RationalMap, critical_data, validate

__version__ = "0.1.0"

__all__ = ["ConicDetError", "INF", "RationalMap", "critical_data", "validate", "__version__"]
