"""Inverse scattering toolkit for the quadratic derivative NLS with a 3x3 Lax pair.

Modules: :mod:`lax` (Lax pair algebra), :mod:`scattering` (eigenfunctions and
scattering data), :mod:`rh` (jump matrices and the t = 0 RH solution),
:mod:`asymptotics` (long-time leading term), :mod:`evolve` (pseudospectral
solver), :mod:`bounds` (positivity certificate) and :mod:`cli`.
"""
from .errors import (DependencyError, DomainError, DomainTooSmallError, InstabilityError, InvalidDataError,
                     NumericalError, QDNLSError, SingularPointError, SolitonAssumptionError)
from .grid import GridFunction
from .scattering import ScatteringTable, reflection_coefficients, scattering_matrix

__version__ = "0.1.0"

__all__ = [
    "GridFunction", "ScatteringTable", "reflection_coefficients", "scattering_matrix",
    "QDNLSError", "SingularPointError", "DomainError", "InvalidDataError", "NumericalError",
    "SolitonAssumptionError", "InstabilityError", "DomainTooSmallError", "DependencyError",
]
