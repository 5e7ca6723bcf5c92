"""Eigenfunctions, scattering matrices and reflection coefficients.

The Volterra equations for ``X, Y, X^A, Y^A`` are solved as initial value
problems for one column at a time, integrated away from the normalised end
with an adaptive eighth-order Runge-Kutta method.  Columns for many spectral
points are integrated together as one vectorised complex system.

Column ``j`` of ``X`` (row-wise ``e^{(l_i - l_j)(x - x')}`` kernels) is
bounded only where ``Re l_j`` is the smallest of the three real parts; the
analogous conditions for the other three eigenfunctions are encoded in
:func:`column_defined`.  Compactly supported data lift every restriction.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline

from .errors import DomainError, InvalidDataError, NumericalError, SolitonAssumptionError
from .grid import GridFunction
from .lax import ALGEBRAIC_TOL, A_PERM, B_PERM, OMEGA, OMEGA2, U_matrix, l_symbols
from .parallel import chunked, parallel_map

RTOL = 1e-11
ATOL = 1e-13
SOLITON_TOL = 1e-6
KINDS = ("X", "Y", "X_adj", "Y_adj")

# +1: integrate from x_max leftwards; -1: from x_min rightwards
_DIRECTION = {"X": +1, "X_adj": +1, "Y": -1, "Y_adj": -1}
# sign of the (l_i - l_j) term in the column ODE
_SIGMA = {"X": +1, "Y": +1, "X_adj": -1, "Y_adj": -1}


def _check_kind(which: str) -> None:
    if which not in KINDS:
        raise ValueError(f"unknown eigenfunction {which!r}; expected one of {KINDS}")


def column_defined(which: str, j: int, k, compact: bool = False, tol: float = ALGEBRAIC_TOL) -> bool:
    """Whether column ``j`` (0-based) of ``which`` exists at ``k``."""
    _check_kind(which)
    if compact:
        return True
    re = l_symbols(complex(k)).real
    slack = tol * max(abs(complex(k)), 1.0)
    if which in ("X", "Y_adj"):
        return bool(np.all(re[j] <= re + slack))
    return bool(np.all(re[j] >= re - slack))


def entry_defined(which: str, i: int, j: int, k, compact: bool = False, tol: float = ALGEBRAIC_TOL) -> bool:
    """Whether ``s_ij`` (``which='X'``) or ``s^A_ij`` (``which='X_adj'``) exists at ``k``."""
    if compact:
        return True
    if not column_defined(which, j, k, False, tol):
        return False
    if i == j:
        return True
    re = l_symbols(complex(k)).real
    return bool(abs(re[i] - re[j]) <= tol * max(abs(complex(k)), 1.0))


def _solve_columns(q: GridFunction, ks: np.ndarray, which: str, j: int, x_eval: np.ndarray,
                   rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    """Column ``j`` at every k in ``ks`` and every x in ``x_eval``; shape ``(nk, nx, 3)``."""
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    nk = ks.size
    sigma = _SIGMA[which]
    direction = _DIRECTION[which]
    lk = l_symbols(ks)
    D = sigma * (lk - lk[:, j:j + 1])
    out = np.empty((nk, x_eval.size, 3), dtype=complex)
    e_j = np.zeros(3, dtype=complex)
    e_j[j] = 1.0

    a, b = q.x_min, q.x_max
    start, end = (b, a) if direction > 0 else (a, b)
    inside = (x_eval >= a) & (x_eval <= b)
    t_eval = np.unique(np.concatenate([x_eval[inside], [end]]))
    if direction > 0:
        t_eval = t_eval[::-1]

    if q.is_zero:
        vals_at = {float(t): np.broadcast_to(e_j, (nk, 3)).copy() for t in t_eval}
    else:
        profile = q.profile
        adj = sigma < 0

        def rhs(x, y):
            Y = y.reshape(nk, 3)
            U = U_matrix(profile(x))
            if adj:
                return (D * Y - Y @ U).ravel()
            return (D * Y + Y @ U.T).ravel()

        y0 = np.tile(e_j, nk)
        sol = solve_ivp(rhs, (start, end), y0, method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval)
        if not sol.success:
            raise NumericalError(f"{which} column {j + 1} integration failed for k in "
                                 f"[{ks[0]}, {ks[-1]}]: {sol.message}")
        vals_at = {float(t): sol.y[:, n].reshape(nk, 3) for n, t in enumerate(sol.t)}

    far = vals_at[float(end)]
    for n, x in enumerate(x_eval):
        if a <= x <= b:
            out[:, n, :] = vals_at[float(x)]
        elif (x > b and direction > 0) or (x < a and direction < 0):
            out[:, n, :] = e_j
        else:
            # beyond the far end the potential vanishes and the column is explicit
            out[:, n, :] = far * np.exp(D * (x - end))
    return out


@dataclass
class Eigenfunction:
    """Samples of one eigenfunction at a fixed spectral point.

    ``values[n]`` is the 3x3 matrix at ``x[n]``; columns outside their domain
    of definition are NaN and listed as absent in ``columns``.
    """

    which: str
    k: complex
    x: np.ndarray
    values: np.ndarray
    columns: tuple[int, ...]

    def column(self, j: int) -> np.ndarray:
        if j not in self.columns:
            raise DomainError(f"column {j + 1} of {self.which} is not defined at k = {self.k}")
        return self.values[:, :, j]

    def at(self, x: float) -> np.ndarray:
        idx = np.flatnonzero(np.isclose(self.x, x, rtol=0, atol=1e-12))
        if idx.size == 0:
            raise ValueError(f"x = {x} was not sampled")
        return self.values[idx[0]]

    def det(self) -> np.ndarray:
        if len(self.columns) != 3:
            raise DomainError("determinant needs all three columns")
        return np.linalg.det(self.values)


def solve_eigenfunction(q: GridFunction, k, which: str = "X", x=None, columns=None,
                        rtol: float = RTOL, atol: float = ATOL) -> Eigenfunction:
    """Solve ``X, Y, X_adj`` or ``Y_adj`` at a single ``k``."""
    _check_kind(which)
    k = complex(k)
    if not q.decay_flag:
        raise InvalidDataError("initial data do not decay to the tail threshold at the window edges")
    x = q.x if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    compact = q.is_compact
    if columns is None:
        columns = tuple(j for j in range(3) if column_defined(which, j, k, compact))
    else:
        columns = tuple(columns)
        for j in columns:
            if not column_defined(which, j, k, compact):
                raise DomainError(f"column {j + 1} of {which} is not defined at k = {k}")
    vals = np.full((x.size, 3, 3), np.nan + 0j)
    for j in columns:
        vals[:, :, j] = _solve_columns(q, np.array([k]), which, j, x, rtol, atol)[0]
    return Eigenfunction(which, k, x, vals, columns)


# --- scattering matrices -----------------------------------------------------------


@dataclass
class PartialMatrix:
    """3x3 complex matrix whose undefined entries are NaN and masked out."""

    values: np.ndarray
    defined: np.ndarray

    def __getitem__(self, ij) -> complex:
        i, j = ij
        if not self.defined[i, j]:
            raise DomainError(f"entry ({i + 1},{j + 1}) is not defined at this k")
        return complex(self.values[i, j])

    def get(self, i: int, j: int):
        return complex(self.values[i, j]) if self.defined[i, j] else None

    @property
    def complete(self) -> bool:
        return bool(self.defined.all())

    def dense(self) -> np.ndarray:
        if not self.complete:
            raise DomainError("matrix has undefined entries")
        return self.values.copy()


def _entry_mask(which: str, k: complex, compact: bool) -> np.ndarray:
    return np.array([[entry_defined(which, i, j, k, compact) for j in range(3)] for i in range(3)])


def _gauss_panels(a: float, b: float, panels: int, order: int = 16):
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return x, wt


def scattering_batch(q: GridFunction, ks, route: str = "boundary", mask: str = "auto",
                     rtol: float = RTOL, atol: float = ATOL, panels: int = 64):
    """``s`` and ``s^A`` at every k; arrays of shape ``(nk, 3, 3)`` plus definedness masks.

    ``route='boundary'`` reads ``s = e^{-x_l L^} X(x_l)`` at the left window edge,
    ``route='quadrature'`` evaluates the defining integrals with Gauss-Legendre panels.
    ``mask='all'`` computes every entry regardless of the domain rules.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    nk = ks.size
    compact = q.is_compact or mask == "all"
    out = {}
    for which in ("X", "X_adj"):
        vals = np.full((nk, 3, 3), np.nan + 0j)
        defined = np.stack([_entry_mask(which, k, compact) for k in ks]) if nk else np.zeros((0, 3, 3), bool)
        sign = -1.0 if which == "X" else 1.0  # e^{sign * x L^}
        for j in range(3):
            sel = np.flatnonzero(defined[:, :, j].any(axis=1))
            if sel.size == 0:
                continue
            kk = ks[sel]
            lk = l_symbols(kk)
            dl = lk - lk[:, j:j + 1]  # l_i - l_j
            if route == "boundary":
                xl = q.x_min
                col = _solve_columns(q, kk, which, j, np.array([xl]), rtol, atol)[:, 0, :]
                # rows outside their domain may overflow here; they are masked out below
                with np.errstate(over="ignore", invalid="ignore"):
                    vals[sel, :, j] = np.exp(sign * xl * dl) * col
            elif route == "quadrature":
                xs, wt = _gauss_panels(q.x_min, q.x_max, panels)
                col = _solve_columns(q, kk, which, j, xs, rtol, atol)  # (nk, nx, 3)
                U = U_matrix(q.profile(xs))  # (nx, 3, 3)
                if which == "X":
                    integrand = np.einsum("xab,kxb->kxa", U, col)
                else:
                    integrand = np.einsum("xba,kxb->kxa", U, col)
                phase = np.exp(sign * xs[None, :, None] * dl[:, None, :])
                integral = np.einsum("kxa,x->ka", phase * integrand, wt)
                e_j = np.zeros(3)
                e_j[j] = 1.0
                vals[sel, :, j] = e_j + (-1.0 if which == "X" else 1.0) * integral
            else:
                raise ValueError(f"unknown route {route!r}")
        vals[~defined] = np.nan
        out[which] = (vals, defined)
    return out["X"], out["X_adj"]


def scattering_matrix(q: GridFunction, k, route: str = "boundary", mask: str = "auto",
                      **kw) -> tuple[PartialMatrix, PartialMatrix]:
    """``(s(k), s^A(k))`` with undefined entries flagged as absent."""
    (s, sm), (sa, sam) = scattering_batch(q, [complex(k)], route, mask, **kw)
    return PartialMatrix(s[0], sm[0]), PartialMatrix(sa[0], sam[0])


_A_INDEX = np.argmax(A_PERM.real, axis=1)
_B_INDEX = np.argmax(B_PERM.real, axis=1)


def symmetry_residuals(s_at: Callable[[complex], PartialMatrix], k: complex) -> tuple[float, float]:
    """Max co-defined residuals of ``s(k) = A s(wk) A^-1`` and ``s(k) = B conj(s(conj k)) B``."""
    s0 = s_at(k)
    s1 = s_at(OMEGA * k)
    s2 = s_at(np.conj(k))
    # permutation by index so that NaN placeholders stay in place
    pa, pb = _A_INDEX, _B_INDEX
    ra = s1.values[np.ix_(pa, pa)]
    ma = s1.defined[np.ix_(pa, pa)]
    rb = np.conj(s2.values[np.ix_(pb, pb)])
    mb = s2.defined[np.ix_(pb, pb)]
    both_a = s0.defined & ma
    both_b = s0.defined & mb
    ea = float(np.max(np.abs(s0.values - ra)[both_a], initial=0.0))
    eb = float(np.max(np.abs(s0.values - rb)[both_b], initial=0.0))
    return ea, eb


# --- reflection coefficients ------------------------------------------------------


def default_k_grid(n: int = 400, k_min: float = 1e-3, k_max: float = 40.0) -> np.ndarray:
    """Symmetric grid: ``n`` geometric points per half-line plus ``k = 0``."""
    pos = np.geomspace(k_min, k_max, n)
    return np.concatenate([-pos[::-1], [0.0], pos])


_ENTRY_NAMES = [f"{i + 1}{j + 1}" for i in range(3) for j in range(3)]


@dataclass
class ScatteringTable:
    """Scattering data on a real spectral grid.

    ``s`` and ``sA`` are ``(nk, 3, 3)`` arrays with NaN marking undefined
    entries.  ``r1`` lives on ``k >= 0``; ``r2`` and ``r2_tilde`` on ``k <= 0``.
    """

    k_grid: np.ndarray
    s: np.ndarray
    sA: np.ndarray
    metadata: dict = field(default_factory=dict)
    _splines: dict = field(default_factory=dict, init=False, repr=False)

    @property
    def pos(self) -> np.ndarray:
        return np.flatnonzero(self.k_grid >= 0)

    @property
    def neg(self) -> np.ndarray:
        return np.flatnonzero(self.k_grid <= 0)

    @property
    def k_pos(self) -> np.ndarray:
        return self.k_grid[self.pos]

    @property
    def k_neg(self) -> np.ndarray:
        return self.k_grid[self.neg]

    @property
    def r1(self) -> np.ndarray:
        i = self.pos
        return self.s[i, 0, 1] / self.s[i, 0, 0]

    @property
    def r2(self) -> np.ndarray:
        i = self.neg
        return self.sA[i, 0, 1] / self.sA[i, 0, 0]

    @property
    def r2_tilde(self) -> np.ndarray:
        i = self.neg
        return self.sA[i, 1, 0] / self.sA[i, 0, 0]

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.r1 == 0) and np.all(self.r2 == 0) and np.all(self.r2_tilde == 0))

    def _spline(self, name: str) -> CubicSpline:
        if name not in self._splines:
            if name == "r1":
                x, y = self.k_pos, self.r1
            elif name == "r2":
                x, y = self.k_neg, self.r2
            elif name == "r2_tilde":
                x, y = self.k_neg, self.r2_tilde
            else:
                raise KeyError(name)
            self._splines[name] = CubicSpline(x, y)
        return self._splines[name]

    def _interp(self, name: str, k, lo: float, hi: float):
        k = np.asarray(k, dtype=float)
        if np.any(k < lo - 1e-14) or np.any(k > hi + 1e-14):
            raise DomainError(f"{name} requested outside the tabulated range [{lo}, {hi}]")
        return self._spline(name)(k)

    def r1_at(self, k):
        """``r1`` at ``k >= 0``; zero beyond the tabulated range (rapid decay)."""
        k = np.asarray(k, dtype=float)
        if np.any(k < 0):
            raise DomainError("r1 is defined on k >= 0")
        kmax = self.k_pos[-1]
        inner = np.minimum(k, kmax)
        return np.where(k <= kmax, self._interp("r1", inner, 0.0, kmax), 0.0)

    def r2_at(self, k):
        k = np.asarray(k, dtype=float)
        if np.any(k > 0):
            raise DomainError("r2 is defined on k <= 0")
        kmin = self.k_neg[0]
        inner = np.maximum(k, kmin)
        return np.where(k >= kmin, self._interp("r2", inner, kmin, 0.0), 0.0)

    def r2_tilde_at(self, k):
        k = np.asarray(k, dtype=float)
        if np.any(k > 0):
            raise DomainError("r2_tilde is defined on k <= 0")
        kmin = self.k_neg[0]
        inner = np.maximum(k, kmin)
        return np.where(k >= kmin, self._interp("r2_tilde", inner, kmin, 0.0), 0.0)

    def distance_to_identity(self) -> np.ndarray:
        """``max |s_ij - delta_ij|`` over the defined entries, per grid point."""
        d = np.abs(self.s - np.eye(3))
        return np.max(np.where(np.isfinite(d), d, 0.0), axis=(1, 2))

    def off_diagonal_envelope(self, blocks: int = 6, floor: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Block maxima of the off-diagonal ``|s_ij|, |sA_ij|`` over the outer third of each half-line.

        Only entries inside their generic real-k domain count, so that entries which
        exist solely because the data are compact (and grow with ``|k|``) are left out.
        Returned outward as ``(positive, negative)``; values below ``floor``
        (default ``100 * atol``) are clipped to it.
        """
        floor = 100 * self.metadata.get("atol", ATOL) if floor is None else floor
        off = np.eye(3, dtype=bool)
        env = np.zeros(self.k_grid.size)
        for which, M in (("X", self.s), ("X_adj", self.sA)):
            mask = np.stack([_entry_mask(which, k, False) for k in self.k_grid]) & ~off
            vals = np.where(mask & np.isfinite(M), np.abs(np.nan_to_num(M)), 0.0)
            env = np.maximum(env, vals.max(axis=(1, 2)))
        out = []
        for idx in (self.pos[1:], self.neg[:-1][::-1]):
            tail = env[idx[2 * idx.size // 3:]]
            out.append(np.maximum([p.max(initial=0.0) for p in np.array_split(tail, blocks)], floor))
        return out[0], out[1]

    def decays_monotonically(self, blocks: int = 6) -> bool:
        """Whether the outer-third envelope of both half-lines is non-increasing outward."""
        return all(bool(np.all(np.diff(e) <= 0)) for e in self.off_diagonal_envelope(blocks))

    def check_soliton_free(self, tol: float = SOLITON_TOL) -> None:
        a = np.abs(self.s[self.pos, 0, 0])
        b = np.abs(self.sA[self.neg, 0, 0])
        if a.size and a.min() < tol:
            i = int(np.argmin(a))
            raise SolitonAssumptionError(f"|s11| = {a[i]:.3e} < {tol} at k = {self.k_pos[i]}")
        if b.size and b.min() < tol:
            i = int(np.argmin(b))
            raise SolitonAssumptionError(f"|sA11| = {b[i]:.3e} < {tol} at k = {self.k_neg[i]}")

    def write_csv(self, path: str | Path, header_comment: str | None = None) -> None:
        """One row per (branch, k); ``k = 0`` appears on both branches.

        Entries that are undefined at a given k are written as empty fields.
        """
        cols = ["branch", "k"]
        for pre in ("s", "sA"):
            for e in _ENTRY_NAMES:
                cols += [f"re_{pre}{e}", f"im_{pre}{e}"]
        cols += ["re_r", "im_r", "abs_r", "re_r2_tilde", "im_r2_tilde"]

        def fmt(z):
            return ["", ""] if not np.isfinite(z) else [repr(float(z.real)), repr(float(z.imag))]

        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(cols)
            for branch, idx, r in (("pos", self.pos, self.r1), ("neg", self.neg, self.r2)):
                rt = self.r2_tilde if branch == "neg" else np.full(idx.size, np.nan + 0j)
                for n, i in enumerate(idx):
                    row = [branch, repr(float(self.k_grid[i]))]
                    for M in (self.s[i], self.sA[i]):
                        for z in M.ravel():
                            row += fmt(z)
                    row += fmt(r[n]) + [repr(float(abs(r[n])))] + fmt(rt[n])
                    w.writerow(row)

    @classmethod
    def read_csv(cls, path: str | Path) -> "ScatteringTable":
        rows = {}
        with open(path, newline="") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        reader = csv.DictReader(lines)
        for row in reader:
            k = float(row["k"])
            s = np.full((3, 3), np.nan + 0j)
            sa = np.full((3, 3), np.nan + 0j)
            for pre, M in (("s", s), ("sA", sa)):
                for n, e in enumerate(_ENTRY_NAMES):
                    re, im = row[f"re_{pre}{e}"], row[f"im_{pre}{e}"]
                    if re != "":
                        M.flat[n] = float(re) + 1j * float(im)
            rows[k] = (s, sa)
        if not rows:
            raise InvalidDataError(f"no rows in {path}")
        ks = np.array(sorted(rows))
        return cls(ks, np.stack([rows[k][0] for k in ks]), np.stack([rows[k][1] for k in ks]))


def _table_chunk(args):
    q, ks, rtol, atol = args
    (s, _), (sa, _) = scattering_batch(q, ks, "boundary", "auto", rtol, atol)
    return s, sa


def reflection_coefficients(q: GridFunction, k_grid=None, threads: int | None = 1, batch: int = 16,
                            rtol: float = RTOL, atol: float = ATOL, check: bool = True) -> ScatteringTable:
    """Tabulate ``s``, ``s^A`` and the reflection coefficients on a real grid.

    The grid must contain ``k = 0``.  Batches have a fixed size so results do
    not depend on the number of workers.
    """
    if not q.decay_flag:
        raise InvalidDataError("initial data do not decay to the tail threshold at the window edges")
    ks = default_k_grid() if k_grid is None else np.asarray(k_grid, dtype=float)
    ks = np.unique(ks)
    if not np.any(ks == 0.0):
        raise InvalidDataError("the spectral grid must contain k = 0")
    if not np.all(np.isfinite(ks)):
        raise InvalidDataError("the spectral grid must be finite")
    chunks = [(q, c, rtol, atol) for c in chunked(ks, batch)]
    parts = parallel_map(_table_chunk, chunks, threads)
    s = np.concatenate([p[0] for p in parts])
    sa = np.concatenate([p[1] for p in parts])
    table = ScatteringTable(ks, s, sa, metadata={
        "x_min": q.x_min, "x_max": q.x_max, "rtol": rtol, "atol": atol,
        "tail_bound": q.tail_bound(), "soliton_tol": SOLITON_TOL,
    })
    if check:
        table.check_soliton_free()
    return table


# --- large-k coefficients ---------------------------------------------------------


@dataclass(frozen=True)
class LargeKCoefficients:
    """First coefficients ``X_1(x)`` and ``Y_1(x)`` of the large-k expansions."""

    q: GridFunction

    def _off(self, x):
        q0 = complex(self.q.profile(np.array(x)))
        qb = q0.conjugate()
        return np.array([[0, OMEGA * qb, q0], [OMEGA2 * q0, 0, qb], [OMEGA2 * qb, OMEGA * q0, 0]],
                        dtype=complex)

    def _mass(self, a, b) -> float:
        f = lambda s: float(np.abs(self.q.profile(np.array(s))) ** 2)
        pts = [p for p in (self.q.support or ()) if a < p < b] or None
        return quad(f, a, b, limit=400, epsabs=1e-15, epsrel=1e-13, points=pts)[0]

    _DIAG = np.array([OMEGA2, OMEGA, 1.0 + 0j])

    def X1(self, x: float) -> np.ndarray:
        # the diagonal satisfies X1_d' = (U X1)_d = 3|q|^2 diag(w^2, w, 1) and vanishes at +inf
        tail = self._mass(x, self.q.x_max) if x < self.q.x_max else 0.0
        return self._off(x) - 3.0 * tail * np.diag(self._DIAG)

    def Y1(self, x: float) -> np.ndarray:
        head = self._mass(self.q.x_min, x) if x > self.q.x_min else 0.0
        return self._off(x) + 3.0 * head * np.diag(self._DIAG)


def large_k_coefficient(q: GridFunction) -> LargeKCoefficients:
    return LargeKCoefficients(q)
