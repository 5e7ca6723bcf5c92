"""Jump matrices on the contour and the sectionally analytic solution ``m`` at ``t = 0``.

``m_1`` (the restriction to ``D1``) is assembled from eigenfunction columns;
the other five sectors follow from ``m(k) = A m(wk) A^-1 = B conj(m(conj k)) B``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import DomainError, InvalidDataError, NumericalError, SolitonAssumptionError
from .grid import GridFunction
from .lax import (ALGEBRAIC_TOL, A_PERM, B_PERM, OMEGA,
                  sector_index_from_arg, theta)
from .parallel import parallel_map
from .scattering import RTOL, ATOL, SOLITON_TOL, _solve_columns, scattering_batch

RAY_ANGLES = {n: (n - 1) * np.pi / 3 for n in range(1, 7)}


class Reflection(Protocol):
    def r1_at(self, k): ...
    def r2_at(self, k): ...


@dataclass(frozen=True)
class DirectReflection:
    """Reflection coefficients evaluated on demand from the scattering matrix."""

    q: GridFunction

    def _s(self, k):
        (s, _), (sa, _) = scattering_batch(self.q, np.atleast_1d(np.asarray(k, dtype=float)))
        return s, sa

    def r1_at(self, k):
        k = np.asarray(k, dtype=float)
        if np.any(k < 0):
            raise DomainError("r1 is defined on k >= 0")
        s, _ = self._s(k)
        r = s[:, 0, 1] / s[:, 0, 0]
        return r.reshape(k.shape)

    def r2_at(self, k):
        k = np.asarray(k, dtype=float)
        if np.any(k > 0):
            raise DomainError("r2 is defined on k <= 0")
        _, sa = self._s(k)
        r = sa[:, 0, 1] / sa[:, 0, 0]
        return r.reshape(k.shape)


def _on_ray(ray: int, k: complex) -> float:
    """Return ``|k|`` after checking that ``k`` lies on the given ray."""
    if ray not in RAY_ANGLES:
        raise DomainError(f"ray must be in 1..6, got {ray}")
    k = complex(k)
    rho = abs(k)
    if rho == 0:
        raise DomainError("k = 0 is not on an open ray")
    if abs(k - rho * np.exp(1j * RAY_ANGLES[ray])) > 1e-10 * rho:
        raise DomainError(f"k = {k} is not on ray {ray}")
    return rho


def jump_matrix(table: Reflection, ray: int, x: float, t: float, k, tol: float = ALGEBRAIC_TOL) -> np.ndarray:
    """Jump ``v_ray(x, t, k)``; ``k`` may be given as a point of the ray or as its modulus."""
    k = complex(k)
    if ray != 1 and k.imag == 0 and k.real > 0 and RAY_ANGLES[ray] != 0:
        k = k.real * np.exp(1j * RAY_ANGLES[ray])
    rho = _on_ray(ray, k)

    def check(r):
        r = complex(r)
        if not np.isfinite(r) or abs(r) >= 1:
            raise InvalidDataError(f"|r| = {abs(r)} is not below 1 on ray {ray}")
        return r

    th = lambda i, j: theta(i, j, x, t, k)
    v = np.eye(3, dtype=complex)
    if ray == 1:
        r = check(table.r1_at(rho))
        e = np.exp(th(2, 1))
        v[0, 1] = -r / e
        v[1, 0] = np.conj(r) * e
        v[1, 1] = 1 - abs(r) ** 2
    elif ray == 2:
        r = check(table.r2_at(-rho))
        e = np.exp(th(3, 2))
        v[1, 1] = 1 - abs(r) ** 2
        v[1, 2] = -np.conj(r) / e
        v[2, 1] = r * e
    elif ray == 3:
        r = check(table.r1_at(rho))
        e = np.exp(th(3, 1))
        v[0, 0] = 1 - abs(r) ** 2
        v[0, 2] = np.conj(r) / e
        v[2, 0] = -r * e
    elif ray == 4:
        r = check(table.r2_at(-rho))
        e = np.exp(th(2, 1))
        v[0, 0] = 1 - abs(r) ** 2
        v[0, 1] = -np.conj(r) / e
        v[1, 0] = r * e
    elif ray == 5:
        r = check(table.r1_at(rho))
        e = np.exp(th(3, 2))
        v[1, 2] = -r / e
        v[2, 1] = np.conj(r) * e
        v[2, 2] = 1 - abs(r) ** 2
    else:
        r = check(table.r2_at(-rho))
        e = np.exp(th(3, 1))
        v[0, 2] = r / e
        v[2, 0] = -np.conj(r) * e
        v[2, 2] = 1 - abs(r) ** 2
    return v


# --- sector solutions -------------------------------------------------------------


def _m1_batch(q: GridFunction, xs: np.ndarray, k: complex, rtol: float, atol: float) -> np.ndarray:
    """``m_1(x, k)`` for all ``x`` in ``xs`` at one ``k`` in the closure of ``D1``."""
    ka = np.array([k])
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    # the diagonal entries s11, sA33 are read off at the left edge, where e^{x L^} acts trivially
    xe = np.append(xs, q.x_min)
    X1 = _solve_columns(q, ka, "X", 0, xe, rtol, atol)[0]
    XA3 = _solve_columns(q, ka, "X_adj", 2, xe, rtol, atol)[0]
    s11, sa33 = X1[-1, 0], XA3[-1, 2]
    X1, XA3 = X1[:-1], XA3[:-1]
    YA1 = _solve_columns(q, ka, "Y_adj", 0, xs, rtol, atol)[0]
    Y3 = _solve_columns(q, ka, "Y", 2, xs, rtol, atol)[0]
    if abs(s11) < SOLITON_TOL or abs(sa33) < SOLITON_TOL:
        raise SolitonAssumptionError(f"vanishing denominator at k = {k}: |s11| = {abs(s11):.3e}, "
                                     f"|sA33| = {abs(sa33):.3e}")
    m = np.empty((xs.size, 3, 3), dtype=complex)
    m[:, :, 0] = X1
    m[:, :, 1] = np.cross(XA3, YA1) / s11
    m[:, :, 2] = Y3 / sa33
    return m


def _in_closed_D1(k: complex) -> bool:
    a = np.angle(k)
    return -1e-12 <= a <= np.pi / 3 + 1e-12


def build_m1(q: GridFunction, x, k, rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    """``m_1(x, k)`` for ``k`` in the closure of ``D1``; vectorised over ``x``."""
    k = complex(k)
    if k == 0 or not _in_closed_D1(k):
        raise DomainError(f"k = {k} is not in the closure of D1")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    m = _m1_batch(q, xs, k, rtol, atol)
    return m[0] if np.ndim(x) == 0 else m


def _conj_A(M, power: int):
    Ap = np.linalg.matrix_power(A_PERM, power % 3)
    return Ap @ M @ Ap.T


def _conj_B(M):
    return B_PERM @ np.conj(M) @ B_PERM


def sector_solution(q: GridFunction, x, k, sector: int | None = None, **kw) -> np.ndarray:
    """``m_n(x, k)`` via symmetry from ``m_1``.

    ``sector`` selects the closed sector for a point on a ray; by default it
    is read off from ``arg k``.
    """
    k = complex(k)
    n = sector_index_from_arg(k) if sector is None else int(sector)
    if n not in range(1, 7):
        raise DomainError(f"sector must be in 1..6, got {n}")
    if n % 2 == 1:
        # m(k) = A^p m(w^p k) A^-p, with p chosen so that w^p k lies in D1
        p = {1: 0, 3: 2, 5: 1}[n]
        m1 = build_m1(q, x, OMEGA ** p * k, **kw)
        return _conj_A(m1, p)
    # even sectors mirror an odd one under conjugation
    return _conj_B(sector_solution(q, x, np.conj(k), 7 - n, **kw))


def verify_jump_ray1(q: GridFunction, x: float, k: float, convention: str = "left", **kw) -> float:
    """``||m_-^{-1} m_+ - v_1||`` at ``t = 0`` on the positive real axis.

    With ``convention='left'`` the ``+`` side is ``D1`` (left of the outward
    orientation); ``'right'`` swaps the two boundary values.
    """
    k = float(k)
    if k <= 0:
        raise DomainError("ray 1 is the positive real axis")
    if q.is_zero:
        return 0.0
    m_d1 = build_m1(q, x, k, **kw)
    m_d6 = _conj_B(m_d1)  # conj(k) = k on the ray
    m_plus, m_minus = (m_d1, m_d6) if convention == "left" else (m_d6, m_d1)
    v = jump_matrix(DirectReflection(q), 1, x, 0.0, k)
    return float(np.max(np.abs(np.linalg.solve(m_minus, m_plus) - v)))


def verify_jump_ray2(q: GridFunction, x: float, rho: float, **kw) -> float:
    """Spot check on ray 2 (``arg k = pi/3``); ``+`` side is ``D2``."""
    k = rho * np.exp(1j * np.pi / 3)
    if q.is_zero:
        return 0.0
    m_plus = sector_solution(q, x, k, sector=2, **kw)
    m_minus = sector_solution(q, x, k, sector=1, **kw)
    v = jump_matrix(DirectReflection(q), 2, x, 0.0, k)
    return float(np.max(np.abs(np.linalg.solve(m_minus, m_plus) - v)))


def _jump_cell(args):
    q, x, k, convention = args
    return verify_jump_ray1(q, x, k, convention)


def jump_residual_grid(q: GridFunction, xs, ks, convention: str = "left", threads: int | None = 1) -> np.ndarray:
    """Residuals on the tensor grid ``xs x ks``; shape ``(len(xs), len(ks))``."""
    cells = [(q, float(x), float(k), convention) for x in xs for k in ks]
    res = parallel_map(_jump_cell, cells, threads)
    return np.array(res).reshape(len(xs), len(ks))


def richardson(values, ratio: float = 2.0) -> complex:
    """Extrapolate samples at ``k, ratio k, ratio^2 k, ...`` to ``k -> inf``.

    With ``n`` samples the terms ``1/k .. 1/k^(n-1)`` are eliminated.
    """
    col = [complex(v) for v in values]
    p = 1
    while len(col) > 1:
        f = ratio ** p
        col = [(f * b - a) / (f - 1) for a, b in zip(col[:-1], col[1:])]
        p += 1
    return col[0]


def recover_q(q: GridFunction, x: float, radii=(40.0, 80.0, 160.0, 320.0), angle: float = np.pi / 6,
              tol: float = 1e-4, **kw) -> complex:
    """``lim k (m(x, 0, k))_13`` along ``arg k = angle`` by Richardson extrapolation."""
    if q.is_zero:
        return 0j if np.ndim(x) == 0 else np.zeros(np.shape(x), dtype=complex)
    radii = tuple(float(r) for r in radii)
    if len(radii) < 2 or not np.allclose(np.array(radii[1:]) / np.array(radii[:-1]), 2.0):
        raise ValueError("recover_q needs radii in successive ratio 2")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    vals = []
    for r in radii:
        k = r * np.exp(1j * angle)
        vals.append(k * _m1_batch(q, xs, k, kw.get("rtol", RTOL), kw.get("atol", ATOL))[:, 0, 2])
    vals = np.array(vals)
    est = np.array([richardson(vals[:, n]) for n in range(xs.size)])
    lower = np.array([richardson(vals[1:, n]) if len(radii) > 2 else vals[-1, n] for n in range(xs.size)])
    bad = np.abs(est - lower) > tol
    if np.any(bad):
        raise NumericalError(f"extrapolation did not settle at x = {xs[bad]}")
    return complex(est[0]) if np.ndim(x) == 0 else est
