"""Complex Gamma function by the Lanczos approximation (g = 7, nine terms).

Accurate to roughly 1e-15 relative in the right half-plane; the left
half-plane is reached through the reflection formula.
"""
from __future__ import annotations

import cmath
import math

from .errors import DomainError

_G = 7.0
_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

SMALL_NU = 1e-8
EULER_GAMMA = 0.5772156649015329


def log_gamma(z: complex) -> complex:
    """Principal-branch-free ``log Gamma(z)`` (imaginary part continuous for ``Re z >= 1/2``)."""
    z = complex(z)
    if z.real < 0.5:
        # log Gamma(z) = log pi - log sin(pi z) - log Gamma(1 - z)
        return cmath.log(math.pi) - cmath.log(cmath.sin(math.pi * z)) - log_gamma(1.0 - z)
    z -= 1.0
    a = _COEF[0]
    t = z + _G + 0.5
    for i, c in enumerate(_COEF[1:], start=1):
        a += c / (z + i)
    return _HALF_LOG_2PI + (z + 0.5) * cmath.log(t) - t + cmath.log(a)


def gamma(z: complex) -> complex:
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real):
        raise DomainError(f"Gamma has a pole at {z.real}")
    if z.real < 0.5:
        return math.pi / (cmath.sin(math.pi * z) * gamma(1.0 - z))
    return cmath.exp(log_gamma(z))


def gamma_imag_axis(nu: float) -> complex:
    """``Gamma(i nu)`` for ``0 < nu < 50``."""
    nu = float(nu)
    if not (0.0 < nu < 50.0):
        raise DomainError(f"gamma_imag_axis needs 0 < nu < 50, got {nu}")
    # Gamma(i nu) = Gamma(1 + i nu) / (i nu) keeps the evaluation in Re z >= 1
    return cmath.exp(log_gamma(1.0 + 1j * nu)) / (1j * nu)


def reciprocal_gamma_imag_axis(nu: float) -> complex:
    """``1 / Gamma(i nu)`` for ``nu >= 0``, with the removable limit 0 at ``nu = 0``."""
    nu = float(nu)
    if nu < 0:
        raise DomainError("nu must be non-negative")
    if nu < SMALL_NU:
        # 1/Gamma(z) = z + gamma_E z^2 + O(z^3) at z = i nu
        return 1j * nu - EULER_GAMMA * nu * nu
    return 1.0 / gamma_imag_axis(nu)
