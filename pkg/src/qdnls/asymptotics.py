"""Long-time leading term of q(x, t) along rays x = zeta t.

For ``zeta > 0`` the leading term is

    sqrt(pi) e^{-pi nu / 2} / (3^{1/4} sqrt(t)) * e^{i phi} / (r1(k0) Gamma(i nu)),

with ``k0 = zeta / 2``, ``nu = -ln(1 - |r1(k0)|^2) / (2 pi)`` and a phase that
contains a Stieltjes integral of ``ln|(s - k0)/(s - w k0)|`` against
``d ln(1 - |r1(s)|^2)``.  The ``zeta < 0`` branch uses ``r2`` and
``r2_tilde = sA21 / sA11`` and follows from the symmetry ``q(x,t) -> -q(-x,t)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, NumericalError
from .gamma import reciprocal_gamma_imag_axis
from .lax import OMEGA, OMEGA2
from .scattering import ScatteringTable

ZETA_MIN = 0.1
SQRT3 = math.sqrt(3.0)
QUARTIC_ROOT3 = 3.0 ** 0.25
BASE_PHASE = 11.0 * math.pi / 12.0
REFINE_TOL = 1e-6
TWO_PI = 2.0 * math.pi
_BELOW_TWO_PI = math.nextafter(TWO_PI, 0.0)


@dataclass(frozen=True)
class AsymptoticState:
    zeta: float
    t: float
    k0: float
    nu: float
    phi: float
    leading: complex
    branch: str
    r: complex  # r1(k0) on the positive branch, r2_tilde(k0) on the negative one

    def as_dict(self) -> dict:
        d = asdict(self)
        d["leading"] = [self.leading.real, self.leading.imag]
        d["r"] = [self.r.real, self.r.imag]
        return d


# --- density and quadrature ---------------------------------------------------------


def _density(table: ScatteringTable, branch: str) -> tuple[CubicSpline, float]:
    """Spline of ``rho(s) = ln(1 - |r(s)|^2)`` on the half-line, and its far end."""
    key = ("rho", branch)
    cache = table._splines
    if key not in cache:
        if branch == "positive":
            s, r = table.k_pos, table.r1
        else:
            # mirror to the positive half-line: rho_neg(s) = rho(-s)
            s, r = -table.k_neg[::-1], table.r2[::-1]
        rho = np.log1p(-np.abs(r) ** 2)
        cache[key] = (CubicSpline(s, rho), float(s[-1]))
    return cache[key]


def _gl(order: int):
    return np.polynomial.legendre.leggauss(order)


def _u_nodes(k0: float, knots: np.ndarray, K: float, order: int, levels: int, split: int = 1):
    """Quadrature nodes in ``u = sqrt(s - k0)`` on ``[0, sqrt(K - k0)]``.

    Panels break at the spline knots; the first panel is graded geometrically
    towards ``u = 0`` where the weight has its logarithmic singularity.
    """
    umax = math.sqrt(max(K - k0, 0.0))
    ku = np.sqrt(knots[(knots > k0) & (knots < K)] - k0)
    edges = np.unique(np.concatenate([[0.0], ku, [umax]]))
    first = edges[1]
    grade = first * 0.2 ** np.arange(1, levels + 1)
    edges = np.unique(np.concatenate([edges, grade]))
    if split > 1:
        fine = [np.linspace(a, b, split + 1)[:-1] for a, b in zip(edges[:-1], edges[1:])]
        edges = np.unique(np.concatenate(fine + [[umax]]))
    t, w = _gl(order)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    u = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    wu = (half[:, None] * w[None, :]).ravel()
    return u, wu


def phase_weight(s, k0: float):
    """``ln|(s - k0)/(s - w k0)|``."""
    s = np.asarray(s, dtype=float)
    return np.log(np.abs(s - k0)) - np.log(np.abs(s - OMEGA * k0))


def _stieltjes(table: ScatteringTable, k0: float, branch: str, kernel, order: int = 10,
               levels: int = 40, split: int = 1) -> complex:
    """``int_{|k0|}^{K} kernel(s) d rho(s)`` on the mirrored half-line via ``s = |k0| + u^2``."""
    spl, K = _density(table, branch)
    a = abs(k0)
    u, wu = _u_nodes(a, spl.x, K, order, levels, split)
    d = u * u
    s = a + d
    drho = spl(s, 1)
    # the kernel also receives s - |k0| exactly, since a + u^2 rounds to a near the endpoint
    return np.sum(kernel(s, d) * drho * 2.0 * u * wu)


def phase_integral(table: ScatteringTable, k0: float, branch: str = "positive",
                   tol: float = REFINE_TOL) -> float:
    """``(1/pi) int ln|(s - k0)/(s - w k0)| d ln(1 - |r(s)|^2)``.

    The range is ``[k0, inf)`` on the positive branch (``r = r1``) and
    ``(-inf, k0]`` on the negative branch (``r = r2``), both integrated in the
    direction of increasing ``s``.  Refinement by panel halving must change the
    result by less than ``tol``.
    """
    if branch not in ("positive", "negative"):
        raise ValueError(f"unknown branch {branch!r}")
    if (branch == "positive" and k0 <= 0) or (branch == "negative" and k0 >= 0):
        raise DomainError(f"k0 = {k0} is not on the {branch} branch")
    if table.is_zero:
        return 0.0
    a = abs(k0)
    # after s -> -s the negative-branch weight becomes ln|(s - a)/(s - w a)| as well, and the
    # orientation of (-inf, k0] reverses
    sign = 1.0 if branch == "positive" else -1.0
    kern = lambda s, d: np.log(d) - np.log(np.abs(s - OMEGA * a))
    coarse = _stieltjes(table, k0, branch, kern).real
    fine = _stieltjes(table, k0, branch, kern, split=2).real
    if abs(fine - coarse) > tol:
        raise NumericalError(f"phase integral did not converge at k0 = {k0}: {coarse} vs {fine}")
    return sign * fine / math.pi


# --- leading term --------------------------------------------------------------------


def _nu(r: complex) -> float:
    return -math.log1p(-abs(r) ** 2) / (2.0 * math.pi)


def _check_args(zeta: float, t: float, zeta_min: float) -> None:
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if zeta == 0 or abs(zeta) < zeta_min:
        raise DomainError(f"|zeta| = {abs(zeta)} is below zeta_min = {zeta_min}")


def leading_term(table: ScatteringTable, zeta: float, t: float, zeta_min: float = ZETA_MIN) -> AsymptoticState:
    """Leading asymptotic term at ``x = zeta t`` for either sign of ``zeta``."""
    zeta, t = float(zeta), float(t)
    _check_args(zeta, t, zeta_min)
    k0 = zeta / 2.0
    if zeta > 0:
        branch = "positive"
        r = complex(table.r1_at(k0))
        rmod = abs(r)
        sign = 1.0
    else:
        branch = "negative"
        r = complex(table.r2_tilde_at(k0))
        rmod = abs(complex(table.r2_at(k0)))
        sign = -1.0
    if rmod >= 1:
        raise NumericalError(f"|r(k0)| = {rmod} >= 1 at k0 = {k0}")
    nu = -math.log1p(-rmod * rmod) / (2.0 * math.pi)
    integral = phase_integral(table, k0, branch)
    if branch == "negative":
        # q -> -q(-x) carries this to the positive-branch integral over [|k0|, inf); the
        # change of variables s -> -s reverses the orientation, so the term enters with a minus
        integral = -integral
    phi = BASE_PHASE + nu * math.log(6.0 * SQRT3 * t * k0 * k0) - SQRT3 * k0 * k0 * t + integral
    if r == 0:
        lead = 0j
    else:
        amp = math.sqrt(math.pi) * math.exp(-math.pi * nu / 2.0) / (QUARTIC_ROOT3 * math.sqrt(t))
        lead = sign * amp * cmath.exp(1j * phi) * reciprocal_gamma_imag_axis(nu) / r
    return AsymptoticState(zeta, t, k0, nu, phi, complex(lead), branch, r)


def amplitude_identity_residual(state: AsymptoticState) -> float:
    """``| |leading| - sqrt(nu/(2t)) 3^{-1/4} |``."""
    return abs(abs(state.leading) - math.sqrt(state.nu / (2.0 * state.t)) / QUARTIC_ROOT3)


# --- independent assembly through d0 ---------------------------------------------------


def _arg0(z):
    """Argument in ``[0, 2 pi)``; ``-0 mod 2 pi`` rounds up to ``2 pi`` and is pulled back below it."""
    return np.minimum(np.arctan2(np.imag(z), np.real(z)) % TWO_PI, _BELOW_TWO_PI)


def ln0(z: complex) -> complex:
    """Logarithm with the argument taken in ``[0, 2 pi)``."""
    z = complex(z)
    if z == 0:
        raise NumericalError("ln0 is singular at 0")
    arg = float(_arg0(z))
    if not (0.0 <= arg < TWO_PI):
        raise NumericalError(f"branch normalisation failed for {z}")
    return complex(math.log(abs(z)), arg)


def chi1(table: ScatteringTable, k0: float, k: complex) -> complex:
    """``(1/(2 pi i)) int_{k0}^{inf} ln0(k - s) d ln(1 - |r1(s)|^2)``."""
    if table.is_zero:
        return 0j
    k = complex(k)

    def kern(s, d):
        z = (k - k0) - d
        return np.log(np.abs(z)) + 1j * _arg0(z)

    return _stieltjes(table, k0, "positive", kern, split=2) / (2j * math.pi)


def delta1(table: ScatteringTable, k0: float, nu: float, k: complex) -> complex:
    return cmath.exp(-1j * nu * ln0(complex(k) - k0) - chi1(table, k0, k))


def d0(table: ScatteringTable, zeta: float, t: float) -> complex:
    k0 = zeta / 2.0
    r = complex(table.r1_at(k0))
    nu = _nu(r)
    return (cmath.exp(-1j * nu * math.log(2.0 * SQRT3 * t)) * cmath.exp(2.0 * chi1(table, k0, k0))
            * delta1(table, k0, nu, OMEGA2 * k0) * delta1(table, k0, nu, OMEGA * k0))


def d0_crosscheck(table: ScatteringTable, zeta: float, t: float, zeta_min: float = ZETA_MIN) -> complex:
    """Leading term re-assembled as ``w beta21 e^{t Phi21} / (3^{1/4} d0 sqrt(2t))``."""
    zeta, t = float(zeta), float(t)
    _check_args(zeta, t, zeta_min)
    if zeta < 0:
        raise DomainError("the d0 route is the positive branch only")
    k0 = zeta / 2.0
    r = complex(table.r1_at(k0))
    if r == 0:
        return 0j
    nu = _nu(r)
    phi21 = -1j * SQRT3 * k0 * k0
    beta21 = (math.sqrt(2.0 * math.pi) * cmath.exp(1j * math.pi / 4) * math.exp(1.5 * math.pi * nu)
              * reciprocal_gamma_imag_axis(nu) / r)
    return OMEGA * beta21 * cmath.exp(t * phi21) / (QUARTIC_ROOT3 * d0(table, zeta, t) * math.sqrt(2.0 * t))


def leading_term_via_reflection(table_reflected: ScatteringTable, zeta: float, t: float,
                                zeta_min: float = ZETA_MIN) -> AsymptoticState:
    """Negative-branch term from the positive branch of ``f0(x) = -q0(-x)``.

    ``table_reflected`` is the scattering table of ``f0``; the result is
    ``-leading(-zeta; f0)``.
    """
    if zeta >= 0:
        raise DomainError("reflection route applies to zeta < 0")
    st = leading_term(table_reflected, -zeta, t, zeta_min)
    return AsymptoticState(zeta, t, zeta / 2.0, st.nu, st.phi, -st.leading, "negative", st.r)
