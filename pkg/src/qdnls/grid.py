"""Initial-data profiles and uniformly sampled grid functions.

A :class:`Profile` is a picklable callable ``q(x)`` with optional analytic
derivatives.  A :class:`GridFunction` pairs a profile with a truncation
window and a uniform sample grid; the eigenfunction solvers evaluate the
profile directly, so built-in profiles are used at full accuracy rather than
through interpolation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import InvalidDataError

TAIL_THRESHOLD = 1e-12


class Profile:
    """Base class for complex initial data."""

    #: closed interval outside which the profile vanishes identically, or None
    support: tuple[float, float] | None = None

    def __call__(self, x, order: int = 0):
        raise NotImplementedError

    def natural_window(self, threshold: float = TAIL_THRESHOLD) -> tuple[float, float]:
        raise NotImplementedError

    @property
    def is_compact(self) -> bool:
        return self.support is not None

    def scaled(self, c: complex) -> "Profile":
        return ScaledProfile(self, complex(c))

    def reflected(self) -> "Profile":
        """Profile of ``f(x) = -q(-x)``."""
        return ReflectedProfile(self)


@dataclass(frozen=True)
class ZeroProfile(Profile):
    half_width: float = 1.0

    @property
    def support(self):
        return (0.0, 0.0)

    def __call__(self, x, order: int = 0):
        return np.zeros_like(np.asarray(x, dtype=float), dtype=complex)

    def natural_window(self, threshold=TAIL_THRESHOLD):
        return (-self.half_width, self.half_width)


@dataclass(frozen=True)
class GaussianProfile(Profile):
    """``amplitude * exp(-((x - center) / width)**2)`` with complex amplitude allowed."""

    amplitude: complex = 0.3
    width: float = 1.0
    center: float = 0.0

    def __call__(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        u = (x - self.center) / self.width
        g = self.amplitude * np.exp(-u * u) + 0j
        if order == 0:
            return g
        if order == 1:
            return -2.0 * u / self.width * g
        if order == 2:
            return (4.0 * u * u - 2.0) / self.width**2 * g
        if order == 3:
            return (-8.0 * u**3 + 12.0 * u) / self.width**3 * g
        raise ValueError("derivatives above order 3 are not provided")

    def natural_window(self, threshold=TAIL_THRESHOLD):
        a = abs(self.amplitude)
        if a <= threshold:
            return (self.center - self.width, self.center + self.width)
        # a tenth of the threshold leaves room for rounding at the edges
        half = self.width * np.sqrt(np.log(10.0 * a / threshold))
        return (self.center - half, self.center + half)


@dataclass(frozen=True)
class BumpProfile(Profile):
    """Smooth compact bump ``amplitude * exp(1 - 1/(1 - u**2))`` on ``|u| < 1``.

    Here ``u = (x - center) / radius``.
    """

    amplitude: complex = 0.3
    radius: float = 1.0
    center: float = 0.0

    @property
    def support(self):
        return (self.center - self.radius, self.center + self.radius)

    def __call__(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        u = (x - self.center) / self.radius
        inside = np.abs(u) < 1.0
        us = np.where(inside, u, 0.0)
        w = 1.0 / (1.0 - us * us)
        g = np.where(inside, self.amplitude * np.exp(1.0 - w), 0.0) + 0j
        if order == 0:
            return g
        # phi = 1 - w; derivatives with respect to u
        w1 = 2.0 * us * w * w
        w2 = 2.0 * w * w + 8.0 * us * us * w**3
        w3 = 24.0 * us * w**3 + 48.0 * us**3 * w**4
        c = 1.0 / self.radius
        if order == 1:
            return -w1 * g * c
        if order == 2:
            return (w1 * w1 - w2) * g * c**2
        if order == 3:
            return (-(w1**3) + 3.0 * w1 * w2 - w3) * g * c**3
        raise ValueError("derivatives above order 3 are not provided")

    def natural_window(self, threshold=TAIL_THRESHOLD):
        a, b = self.support
        return (a, b)


@dataclass(frozen=True)
class ScaledProfile(Profile):
    base: Profile
    factor: complex

    @property
    def support(self):
        return self.base.support

    def __call__(self, x, order: int = 0):
        return self.factor * self.base(x, order)

    def natural_window(self, threshold=TAIL_THRESHOLD):
        return self.base.natural_window(threshold / max(abs(self.factor), 1e-300))


@dataclass(frozen=True)
class ReflectedProfile(Profile):
    base: Profile

    @property
    def support(self):
        s = self.base.support
        return None if s is None else (-s[1], -s[0])

    def __call__(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        # d^n/dx^n [-q(-x)] = -(-1)^n q^(n)(-x)
        return -((-1) ** order) * self.base(-x, order)

    def natural_window(self, threshold=TAIL_THRESHOLD):
        a, b = self.base.natural_window(threshold)
        return (-b, -a)


@dataclass(frozen=True, eq=False)
class SampledProfile(Profile):
    """Cubic-spline interpolant of samples; zero outside the sampled interval.

    Samples are treated as decaying, not compactly supported, unless
    ``compact=True``.  The compact branch computes every scattering entry,
    which is only well conditioned on short windows.
    """

    x: np.ndarray
    values: np.ndarray
    compact: bool = False
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_spline", CubicSpline(x, v))

    @property
    def support(self):
        return (float(self.x[0]), float(self.x[-1])) if self.compact else None

    def __call__(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.x[0]) & (x <= self.x[-1])
        val = self._spline(np.clip(x, self.x[0], self.x[-1]), order)
        return np.where(inside, val, 0.0) + 0j

    def natural_window(self, threshold=TAIL_THRESHOLD):
        return (float(self.x[0]), float(self.x[-1]))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Profile sampled on the uniform grid ``linspace(x_min, x_max, n)``."""

    profile: Profile
    x_min: float
    x_max: float
    n: int = 2049
    tail_threshold: float = TAIL_THRESHOLD

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)) or self.x_max <= self.x_min:
            raise InvalidDataError(f"invalid window [{self.x_min}, {self.x_max}]")
        if self.n < 3:
            raise InvalidDataError("a grid function needs at least 3 samples")

    @classmethod
    def from_profile(cls, profile: Profile, pad: float = 0.0, n: int = 2049,
                     window: tuple[float, float] | None = None) -> "GridFunction":
        a, b = window if window is not None else profile.natural_window()
        return cls(profile, float(a - pad), float(b + pad), n)

    @classmethod
    def gaussian(cls, amplitude: complex = 0.3, width: float = 1.0, n: int = 2049, **kw) -> "GridFunction":
        return cls.from_profile(GaussianProfile(amplitude, width), n=n, **kw)

    @classmethod
    def bump(cls, amplitude: complex = 0.3, radius: float = 1.0, n: int = 2049, **kw) -> "GridFunction":
        kw.setdefault("pad", 0.0)
        return cls.from_profile(BumpProfile(amplitude, radius), n=n, **kw)

    @classmethod
    def zero(cls, half_width: float = 1.0, n: int = 257) -> "GridFunction":
        return cls(ZeroProfile(half_width), -half_width, half_width, n)

    @classmethod
    def from_samples(cls, x, values, compact: bool = False) -> "GridFunction":
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=complex)
        if x.ndim != 1 or x.shape != values.shape or x.size < 3:
            raise InvalidDataError("samples must be two equal-length 1-D arrays with at least 3 points")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(values))):
            raise InvalidDataError("samples contain NaN or infinite values")
        h = np.diff(x)
        if np.any(h <= 0) or np.ptp(h) > 1e-8 * max(abs(h[0]), 1.0):
            raise InvalidDataError("x samples must be uniformly spaced and increasing")
        return cls(SampledProfile(x, values, compact), float(x[0]), float(x[-1]), x.size)

    @classmethod
    def read_csv(cls, path: str | Path) -> "GridFunction":
        """Read rows ``x, Re q, Im q`` (a missing third column means real data)."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    vals = [float(v) for v in row]
                except ValueError:
                    if not rows:
                        continue  # header line
                    raise InvalidDataError(f"non-numeric row in {path}: {row}")
                if len(vals) == 2:
                    vals.append(0.0)
                if len(vals) != 3:
                    raise InvalidDataError(f"expected 2 or 3 columns in {path}, got {len(vals)}")
                rows.append(vals)
        if not rows:
            raise InvalidDataError(f"no data rows in {path}")
        a = np.array(rows)
        return cls.from_samples(a[:, 0], a[:, 1] + 1j * a[:, 2])

    def write_csv(self, path: str | Path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["x", "re_q", "im_q"])
            for xv, qv in zip(self.x, self.values):
                w.writerow([repr(float(xv)), repr(float(qv.real)), repr(float(qv.imag))])

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    @property
    def values(self) -> np.ndarray:
        return self.profile(self.x)

    @property
    def support(self):
        return self.profile.support

    @property
    def is_compact(self) -> bool:
        s = self.profile.support
        return s is not None and self.x_min <= s[0] and s[1] <= self.x_max

    @property
    def decay_flag(self) -> bool:
        v = self.profile(np.array([self.x_min, self.x_max]))
        return bool(np.all(np.abs(v) <= self.tail_threshold))

    @property
    def is_zero(self) -> bool:
        return isinstance(self.profile, ZeroProfile) or not np.any(self.values)

    def __call__(self, x, order: int = 0):
        return self.profile(x, order)

    def mass(self) -> float:
        """``int |q|^2 dx`` over the window (Simpson)."""
        from scipy.integrate import simpson
        return float(simpson(np.abs(self.values) ** 2, x=self.x))

    def tail_bound(self) -> float:
        """Bound on ``int |q|`` discarded outside the window."""
        if self.is_compact:
            return 0.0
        f = lambda s: float(np.abs(self.profile(s)))
        right = quad(f, self.x_max, np.inf, limit=200)[0]
        left = quad(f, -np.inf, self.x_min, limit=200)[0]
        return right + left

    def with_profile(self, profile: Profile) -> "GridFunction":
        return GridFunction(profile, self.x_min, self.x_max, self.n, self.tail_threshold)

    def reflected(self) -> "GridFunction":
        return GridFunction(self.profile.reflected(), -self.x_max, -self.x_min, self.n, self.tail_threshold)

    def scaled(self, c: complex) -> "GridFunction":
        return self.with_profile(self.profile.scaled(c))
