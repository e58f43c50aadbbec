"""Optimal constants, stability deficits and a rescaled fast diffusion flow for a
Gagliardo-Nirenberg-Sobolev family, on radial profiles."""

from .constants import (ConstantSet, Params, compute_constants, cross_check_constants, derive_params,
                        endpoint_scan, params_from_m)
from .errors import (CriticalCaseError, DomainError, NonIntegrableError, QuadratureError,
                     ResolutionError, StiffnessError, TruncationWarning, VacuumError)
from .radial import RadialFunction, RadialGrid, build_grid, differentiate, integrate_radial

__version__ = "0.1.0"

__all__ = [
    "ConstantSet", "Params", "compute_constants", "cross_check_constants", "derive_params",
    "endpoint_scan", "params_from_m", "CriticalCaseError", "DomainError", "NonIntegrableError",
    "QuadratureError", "ResolutionError", "StiffnessError", "TruncationWarning", "VacuumError",
    "RadialFunction", "RadialGrid", "build_grid", "differentiate", "integrate_radial",
]
