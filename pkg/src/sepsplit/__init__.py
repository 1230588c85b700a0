"""Separatrix splitting near a Hamiltonian saddle-centre bifurcation.

Exact formal layers (graded series algebra, interpolating Hamiltonian,
formal separatrix) combined with arbitrary-precision numerics (invariant
manifolds, homoclinic invariants, lobe areas) and the asymptotic-law
extraction pipeline.
"""

from .coefficients import Coefficient
from .qh import QhPolynomial, QhSeries, lie_exp, poisson, qh_order, validate_area_preservation
from .maps import MapFamily, get_map, normalize_signs
from .interpolate import FormalHamiltonian, interpolate, scaled_hamiltonian, simplify
from .eta import EtaPolynomial, eta_derivative, eta_reduce
from .formal_sep import (
    FormalSeparatrix,
    FormalSeparatrixData,
    LaurentTable,
    assemble,
    invert_change,
    laurent_reexpand,
    solve_base_order,
)

__version__ = "0.1.0"

__all__ = [
    "Coefficient", "QhPolynomial", "QhSeries", "qh_order", "poisson", "lie_exp",
    "validate_area_preservation", "MapFamily", "get_map", "normalize_signs",
    "FormalHamiltonian", "interpolate", "simplify", "scaled_hamiltonian",
    "EtaPolynomial", "eta_reduce", "eta_derivative", "FormalSeparatrixData",
    "solve_base_order", "assemble", "invert_change", "laurent_reexpand",
    "FormalSeparatrix", "LaurentTable", "__version__",
]
