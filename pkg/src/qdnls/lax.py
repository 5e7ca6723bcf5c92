"""Constant matrices, spectral symbols and sector geometry of the 3x3 Lax pair.

The x-part of the Lax pair reads ``X_x - [L(k), X] = U X`` with ``L = k J``,
``J = diag(w, w**2, 1)`` and ``w = exp(2 pi i / 3)``.  Everything here is pure
and works on numpy scalars or arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularPointError

ALGEBRAIC_TOL = 1e-12
INTEGRATED_TOL = 1e-8

OMEGA = np.exp(2j * np.pi / 3)
OMEGA2 = OMEGA * OMEGA
OMEGA_POWERS = np.array([1.0 + 0j, OMEGA, OMEGA2])

J_DIAG = np.array([OMEGA, OMEGA2, 1.0 + 0j])
J = np.diag(J_DIAG)

# A e_1 = e_2, A e_2 = e_3, A e_3 = e_1
A_PERM = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=complex)
A_PERM_INV = A_PERM.T.copy()
B_PERM = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex)


def omega_power(n: int) -> complex:
    return OMEGA_POWERS[n % 3]


def l_symbols(k):
    """Return ``(l1, l2, l3) = (w k, w**2 k, k)`` stacked on the last axis."""
    k = np.asarray(k, dtype=complex)
    return k[..., None] * J_DIAG


def z_symbols(k):
    """Return ``(z1, z2, z3) = (w**2 k**2, w**4 k**2, k**2)`` on the last axis."""
    k = np.asarray(k, dtype=complex)
    return (k * k)[..., None] * (J_DIAG * J_DIAG)


def L_matrix(k):
    return np.diag(l_symbols(complex(k)))


def Z_matrix(k):
    return np.diag(z_symbols(complex(k)))


def U_matrix(q):
    """Potential matrix of the x-part for a sample (or array of samples) ``q``.

    The result has shape ``q.shape + (3, 3)``.
    """
    q = np.asarray(q, dtype=complex)
    qb = np.conj(q)
    a = (1 - OMEGA2) * qb
    b = (1 - OMEGA) * q
    out = np.zeros(q.shape + (3, 3), dtype=complex)
    out[..., 0, 1] = a
    out[..., 0, 2] = b
    out[..., 1, 0] = b
    out[..., 1, 2] = a
    out[..., 2, 0] = a
    out[..., 2, 1] = b
    return out


_SHIFT_W = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=complex) * OMEGA
_SHIFT_W2 = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=complex) * OMEGA2


def V_matrix(q, qx, k):
    """Potential of the t-part, ``V(q, q_x, k)``."""
    q = complex(q)
    qx = complex(qx)
    qb = q.conjugate()
    qbx = qx.conjugate()
    w, w2 = OMEGA, OMEGA2
    lin = np.array(
        [
            [0, (w2 - 1) * qb, (1 - w2) * q],
            [(w - 1) * q, 0, (1 - w) * qb],
            [(w - w2) * qb, (w2 - w) * q, 0],
        ],
        dtype=complex,
    )
    return k * lin + (qbx - 3 * q * q) * _SHIFT_W + (qx - 3 * qb * qb) * _SHIFT_W2


def theta(i: int, j: int, x: float, t: float, k) -> complex:
    """``theta_ij = (l_i - l_j) x + (z_i - z_j) t`` with 1-based indices."""
    if i not in (1, 2, 3) or j not in (1, 2, 3) or i == j:
        raise ValueError(f"theta needs distinct indices in {{1,2,3}}, got ({i}, {j})")
    l = l_symbols(k)
    z = z_symbols(k)
    return (l[..., i - 1] - l[..., j - 1]) * x + (z[..., i - 1] - z[..., j - 1]) * t


def conjugate_by_A(M):
    """``A M A^{-1}``; works on stacks of matrices."""
    return A_PERM @ np.asarray(M) @ A_PERM_INV


def conjugate_by_B(M):
    """``B conj(M) B``; works on stacks of matrices."""
    return B_PERM @ np.conj(np.asarray(M)) @ B_PERM


@dataclass(frozen=True)
class SectorLabel:
    """Either an open sector ``D1..D6`` or one of the six contour rays.

    Rays are numbered counter-clockwise starting from the positive real axis
    and are oriented away from the origin.
    """

    kind: str  # "sector" or "ray"
    index: int

    def __str__(self) -> str:
        return f"D{self.index}" if self.kind == "sector" else f"ray {self.index}"

    def rotated(self, steps: int) -> "SectorLabel":
        """Label after rotating by ``steps`` * pi/3 counter-clockwise."""
        return SectorLabel(self.kind, (self.index - 1 + steps) % 6 + 1)

    @property
    def is_ray(self) -> bool:
        return self.kind == "ray"


_SECTOR_BY_ORDER = {
    (0, 1, 2): 1,
    (0, 2, 1): 2,
    (2, 0, 1): 3,
    (2, 1, 0): 4,
    (1, 2, 0): 5,
    (1, 0, 2): 6,
}
# (tied pair, tied pair is the lower one) -> ray index
_RAY_BY_TIE = {
    (frozenset((0, 1)), True): 1,
    (frozenset((1, 2)), False): 2,
    (frozenset((0, 2)), True): 3,
    (frozenset((0, 1)), False): 4,
    (frozenset((1, 2)), True): 5,
    (frozenset((0, 2)), False): 6,
}


def classify_sector(k, tol: float = ALGEBRAIC_TOL) -> SectorLabel:
    """Classify ``k != 0`` by the ordering of ``Re l_1, Re l_2, Re l_3``.

    Near ties (within ``tol * |k|``) resolve to the ray label.
    """
    k = complex(k)
    if k == 0:
        raise SingularPointError("k = 0 belongs to every sector closure")
    re = l_symbols(k).real
    order = tuple(int(i) for i in np.argsort(re, kind="stable"))
    scale = tol * abs(k)
    low_gap = re[order[1]] - re[order[0]]
    high_gap = re[order[2]] - re[order[1]]
    if low_gap <= scale:
        return SectorLabel("ray", _RAY_BY_TIE[(frozenset(order[:2]), True)])
    if high_gap <= scale:
        return SectorLabel("ray", _RAY_BY_TIE[(frozenset(order[1:]), False)])
    return SectorLabel("sector", _SECTOR_BY_ORDER[order])


def sector_index_from_arg(k) -> int:
    """Index n of the closed sector ``D_n`` containing ``k``, rays mapped to the sector they open.

    Ray n (at angle (n-1) pi/3) is assigned to ``D_n``, i.e. boundary points go
    to the sector on their left.
    """
    k = complex(k)
    if k == 0:
        raise SingularPointError("k = 0 belongs to every sector closure")
    ang = np.angle(k) % (2 * np.pi)
    n = int(np.floor(ang / (np.pi / 3) + 1e-12)) % 6
    return n + 1
