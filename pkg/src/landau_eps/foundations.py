"""Conventions, parameters and special functions shared by every module.

Fourier transforms use the symmetric convention: a factor ``(2*pi)**(-d/2)``
per transformed variable, so that the Maxwellian is its own transform.
Velocity frequencies ``xi`` and spatial modes ``k`` are plain floats/ints in
dimension one and arrays with a trailing axis of length ``d`` otherwise.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

#: Below this value of ``epsilon * t`` the collisional clock and the damping
#: exponent switch to Taylor series.
SERIES_SWITCH = 1e-4
#: ``psi`` loses ~``1/(epsilon t)**2`` digits in closed form, so its series is
#: used on a much wider range.
PSI_SERIES_SWITCH = 0.5

_PSI_TERMS = 40
# psi(t) = t**3 * sum_{n>=3} c_n (eps t)**(n-3),  c_n = (-1)**n (4 - 2**n) / (2 n!)
_PSI_COEFFS = np.array(
    [(-1) ** n * (4.0 - 2.0**n) / (2.0 * math.factorial(n)) for n in range(3, 3 + _PSI_TERMS)]
)


class Model(str, enum.Enum):
    COLLISIONLESS = "collisionless"
    LINEAR_BOLTZMANN = "linear_boltzmann"
    FOKKER_PLANCK = "fokker_planck"


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensionless physical parameters of one scenario.

    Parameters
    ----------
    d:
        Spatial (and velocity) dimension.
    model:
        Collision model.
    epsilon:
        Collision strength, ``>= 0``.
    e0:
        Amplitude of the Coulomb interaction, ``W_hat(k) = e0 / |k|**2``.
    ell:
        Exponent of the velocity weight ``<v>**ell``; must exceed ``d/2``.
    n:
        Sobolev smoothness index, ``>= 3``.
    """

    d: int = 1
    model: Model = Model.LINEAR_BOLTZMANN
    epsilon: float = 0.0
    e0: float = 1.0
    ell: float = 1.0
    n: int = 4

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon!r}")
        if not self.e0 > 0:
            raise ValueError(f"e0 must be > 0, got {self.e0!r}")
        if not self.ell > self.d / 2:
            raise ValueError(f"ell must exceed d/2 = {self.d / 2}, got {self.ell!r}")
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"n must be an integer >= 3, got {self.n!r}")

    def replace(self, **changes) -> "PhysicalParams":
        values = {f: getattr(self, f) for f in ("d", "model", "epsilon", "e0", "ell", "n")}
        values.update(changes)
        return PhysicalParams(**values)

    def to_dict(self) -> dict:
        return {"d": self.d, "model": self.model.value, "epsilon": self.epsilon,
                "e0": self.e0, "ell": self.ell, "n": self.n}


def default_amplitude(d: int = 1) -> float:
    """The literal Maxwellian normalization ``(2*pi)**(-d/2)``."""
    return (2.0 * np.pi) ** (-d / 2.0)


def sqnorm(v, d: int = 1):
    v = np.asarray(v, dtype=float)
    if d == 1:
        return v * v
    return np.sum(v * v, axis=-1)


def dot(a, b, d: int = 1):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if d == 1:
        return a * b
    return np.sum(a * b, axis=-1)


def knorm(k) -> float:
    """Euclidean norm of a lattice vector given as an int or a sequence."""
    return float(np.linalg.norm(np.atleast_1d(np.asarray(k, dtype=float))))


def maxwellian_profile(xi, d: int = 1):
    """``M(xi) = (2 pi)**(-d/2) exp(-|xi|**2 / 2)``; equal to its own Fourier transform."""
    return default_amplitude(d) * np.exp(-0.5 * sqnorm(xi, d))


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    return t


def chi(t, epsilon: float):
    """Collisional clock ``(1 - exp(-epsilon t)) / epsilon``; equals ``t`` at ``epsilon = 0``."""
    t = _check_time(t)
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if epsilon == 0:
        return t * 1.0
    x = epsilon * t
    small = x < SERIES_SWITCH
    with np.errstate(invalid="ignore"):
        closed = -np.expm1(-x) / epsilon
    series = t * (1.0 - x / 2.0 * (1.0 - x / 3.0 * (1.0 - x / 4.0)))
    return np.where(small, series, closed)


def psi(t, epsilon: float):
    """``int_0^t chi(s)**2 ds``, cancellation-free; ``t**3 / 3`` at ``epsilon = 0``."""
    t = _check_time(t)
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if epsilon == 0:
        return t**3 / 3.0
    x = epsilon * t
    poly = np.zeros_like(x)
    for c in _PSI_COEFFS[::-1]:
        poly = poly * x + c
    series = t**3 * poly
    with np.errstate(over="ignore", invalid="ignore"):
        closed = t / epsilon**2 + (-np.exp(-2.0 * x) + 4.0 * np.exp(-x) - 3.0) / (2.0 * epsilon**3)
    return np.where(x < PSI_SERIES_SWITCH, series, closed)


def fp_damping_exponent(t, xi, k, epsilon: float, d: int = 1):
    """``epsilon * int_0^t |exp(-epsilon s) xi + chi(s) k|**2 ds`` in closed form.

    This is the absorption accumulated along one Fokker-Planck characteristic.
    """
    t = _check_time(t)
    if epsilon == 0:
        return np.zeros(np.broadcast_shapes(t.shape, np.shape(sqnorm(xi, d)), np.shape(sqnorm(k, d))))
    x = epsilon * t
    a = -0.5 * np.expm1(-2.0 * x)
    b = epsilon * chi(t, epsilon) ** 2
    c = epsilon * psi(t, epsilon)
    return a * sqnorm(xi, d) + b * dot(xi, k, d) + c * sqnorm(k, d)


def coulomb_w(k, e0: float = 1.0) -> float:
    """Fourier multiplier ``e0 / |k|**2`` of the repulsive Coulomb potential."""
    kk = knorm(k)
    if kk == 0:
        raise ValueError("the Coulomb potential has no k = 0 mode")
    return e0 / kk**2


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def _mode_key(k):
    arr = np.atleast_1d(np.asarray(k))
    if arr.size == 1:
        return int(arr[0])
    return tuple(int(v) for v in arr)


def _first_component(xi, d):
    xi = np.asarray(xi, dtype=float)
    return xi if d == 1 else xi[..., 0]


def smooth_bump(r):
    """C-infinity bump equal to 1 at 0 and vanishing for ``|r| >= 1``."""
    r = np.abs(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


@dataclass(frozen=True)
class GaussianHermite:
    """``h_in(k, xi) = a_k p(xi_1) exp(-width |xi|**2)``.

    The zero spatial mode uses ``zero_mode_poly`` (default ``p(xi) = xi``, the
    transform of a first Hermite function), which must vanish at ``xi = 0`` so
    the data stay mean-zero. Polynomials are coefficient tuples in increasing
    degree.
    """

    amplitudes: Mapping = field(default_factory=lambda: {1: 1.0, -1: 1.0})
    poly: tuple = (1.0,)
    width: float = 0.5
    zero_mode_poly: tuple = (0.0, 1.0)
    d: int = 1

    kind = "gaussian_hermite"
    n_decl = math.inf

    def __post_init__(self):
        amps = {_mode_key(k): complex(a) for k, a in dict(self.amplitudes).items()}
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "poly", tuple(float(c) for c in self.poly))
        object.__setattr__(self, "zero_mode_poly", tuple(float(c) for c in self.zero_mode_poly))
        if self.width <= 0:
            raise ValueError("width must be positive")
        zero = _mode_key([0] * self.d)
        if amps.get(zero, 0) != 0 and self.zero_mode_poly and self.zero_mode_poly[0] != 0:
            raise ValueError("zero mode must vanish at xi = 0 (mean-zero data)")

    @property
    def active_modes(self) -> list:
        return sorted(k for k, a in self.amplitudes.items() if a != 0)

    def mode(self, k, xi):
        key = _mode_key(k)
        a = self.amplitudes.get(key, 0.0)
        xi = np.asarray(xi, dtype=float)
        shape = np.shape(sqnorm(xi, self.d))
        if a == 0:
            return np.zeros(shape, dtype=complex)
        is_zero = np.all(np.atleast_1d(key) == 0)
        coeffs = self.zero_mode_poly if is_zero else self.poly
        p = np.polynomial.polynomial.polyval(_first_component(xi, self.d), coeffs)
        return a * p * np.exp(-self.width * sqnorm(xi, self.d)) + 0j

    def to_dict(self) -> dict:
        return {"kind": self.kind, "amplitudes": _amps_to_json(self.amplitudes),
                "poly": list(self.poly), "width": self.width,
                "zero_mode_poly": list(self.zero_mode_poly), "d": self.d}


@dataclass(frozen=True)
class FiniteSobolevTail:
    """``h_in(k, xi) = a_k <xi>**(-(n_decl+1)) w(xi)`` with ``w = 1 - bump(|xi|/R)``.

    The data belong to the weighted Sobolev space of index ``n_decl`` and not
    to index ``n_decl + 1``; the window makes every mode vanish at ``xi = 0``.
    """

    amplitudes: Mapping = field(default_factory=lambda: {1: 1.0, -1: 1.0})
    n_decl: int = 4
    window_radius: float = 1.0
    d: int = 1

    kind = "finite_sobolev_tail"

    def __post_init__(self):
        amps = {_mode_key(k): complex(a) for k, a in dict(self.amplitudes).items()}
        object.__setattr__(self, "amplitudes", amps)
        if self.n_decl < 0 or int(self.n_decl) != self.n_decl:
            raise ValueError("n_decl must be a non-negative integer")
        if self.window_radius <= 0:
            raise ValueError("window_radius must be positive")

    @property
    def active_modes(self) -> list:
        return sorted(k for k, a in self.amplitudes.items() if a != 0)

    def window(self, xi):
        return 1.0 - smooth_bump(np.sqrt(sqnorm(xi, self.d)) / self.window_radius)

    def mode(self, k, xi):
        a = self.amplitudes.get(_mode_key(k), 0.0)
        r2 = sqnorm(xi, self.d)
        if a == 0:
            return np.zeros(np.shape(r2), dtype=complex)
        return a * (1.0 + r2) ** (-(self.n_decl + 1) / 2.0) * self.window(xi) + 0j

    def to_dict(self) -> dict:
        return {"kind": self.kind, "amplitudes": _amps_to_json(self.amplitudes),
                "n_decl": self.n_decl, "window_radius": self.window_radius, "d": self.d}


def _amps_to_json(amps: Mapping) -> dict:
    out = {}
    for k, a in sorted(amps.items()):
        key = str(k) if isinstance(k, int) else ",".join(str(v) for v in k)
        out[key] = [a.real, a.imag]
    return out


def initial_mode(family, k, xi):
    """Fourier coefficient ``h_in_hat(k, xi)`` of an initial-data family."""
    return family.mode(k, xi)
