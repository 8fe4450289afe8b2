"""Memory kernels of the closed density equations.

Every kernel is causal (zero for ``t < 0``) and depends on the mode only
through ``|k|``.  The Maxwellian factor is ``c_M * exp(-|x|**2 / 2)``, where
``c_M`` defaults to ``(2 pi)**(-d/2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .foundations import Model, PhysicalParams, chi, coulomb_w, default_amplitude, knorm, psi


def _prep(t, k, params: PhysicalParams, c_M):
    kk = knorm(k)
    if kk == 0:
        raise ValueError("kernels are defined for k != 0 only")
    t = np.asarray(t, dtype=float)
    cm = default_amplitude(params.d) if c_M is None else float(c_M)
    return t, kk, cm


def kernel_lb(t, k, params: PhysicalParams, c_M: Optional[float] = None, part: str = "total"):
    """Linear Boltzmann kernel ``K0 + K1``.

    ``K0 = eps exp(-eps t) M(kt)`` comes from the collision gain term and
    ``K1 = -W(k) |k|**2 t exp(-eps t) M(kt)`` from the self-consistent field.
    ``part`` selects ``"K0"``, ``"K1"`` or ``"total"``.
    """
    t, kk, cm = _prep(t, k, params, c_M)
    eps = params.epsilon
    tp = np.where(t >= 0, t, 0.0)
    common = np.where(t >= 0, cm * np.exp(-eps * tp - 0.5 * kk**2 * tp**2), 0.0)
    k0 = eps * common
    k1 = -coulomb_w(k, params.e0) * kk**2 * tp * common
    if part == "K0":
        return k0
    if part == "K1":
        return k1
    if part != "total":
        raise ValueError(f"unknown kernel part {part!r}")
    return k0 + k1


def kernel_limit(t, k, params: PhysicalParams, c_M: Optional[float] = None):
    """Collisionless kernel ``-W(k) |k|**2 t M(kt)``."""
    t, kk, cm = _prep(t, k, params, c_M)
    tp = np.where(t >= 0, t, 0.0)
    return np.where(t >= 0, -coulomb_w(k, params.e0) * kk**2 * tp * cm * np.exp(-0.5 * kk**2 * tp**2), 0.0)


def kernel_fp(t, k, params: PhysicalParams, c_M: Optional[float] = None):
    """Fokker-Planck kernel in the ``exp(eps t) rho`` gauge.

    ``-exp(eps t) exp(-eps |k|**2 psi(t)) chi(t) |k|**2 W(k) M(chi(t) k)``;
    the three exponentials are merged before evaluation so large times
    underflow cleanly instead of overflowing.
    """
    eps = params.epsilon
    if eps == 0:
        return kernel_limit(t, k, params, c_M)
    t, kk, cm = _prep(t, k, params, c_M)
    tp = np.where(t >= 0, t, 0.0)
    c = chi(tp, eps)
    expo = eps * tp - eps * kk**2 * psi(tp, eps) - 0.5 * kk**2 * c**2
    val = -coulomb_w(k, params.e0) * kk**2 * c * cm * np.exp(expo)
    return np.where(t >= 0, val, 0.0)


@dataclass(frozen=True)
class KernelSpec:
    """A kernel bound to a model, its parameters and the amplitude ``c_M``.

    ``zero`` builds the identically vanishing kernel (no field, no gain term),
    useful as a degenerate reference.  ``part`` restricts a linear-Boltzmann
    kernel to its gain (``"K0"``) or field (``"K1"``) component.
    """

    model: Model
    params: PhysicalParams
    c_M: Optional[float] = None
    zero: bool = False
    part: str = "total"

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        if self.part not in ("total", "K0", "K1"):
            raise ValueError(f"unknown kernel part {self.part!r}")
        if self.part != "total" and self.model is not Model.LINEAR_BOLTZMANN:
            raise ValueError("kernel parts exist for the linear Boltzmann model only")
        if self.c_M is None:
            object.__setattr__(self, "c_M", default_amplitude(self.params.d))

    @classmethod
    def for_params(cls, params: PhysicalParams, c_M: Optional[float] = None) -> "KernelSpec":
        return cls(params.model, params, c_M)

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    def with_epsilon(self, epsilon: float) -> "KernelSpec":
        return KernelSpec(self.model, self.params.replace(epsilon=epsilon), self.c_M, self.zero, self.part)

    def limit(self) -> "KernelSpec":
        """The collisionless kernel every model converges to as epsilon -> 0."""
        zero = self.zero or self.part == "K0"
        return KernelSpec(Model.COLLISIONLESS, self.params.replace(epsilon=0.0), self.c_M, zero)

    def __call__(self, t, k):
        if self.zero:
            return np.zeros(np.shape(t))
        if self.model is Model.LINEAR_BOLTZMANN:
            return kernel_lb(t, k, self.params, self.c_M, self.part)
        if self.model is Model.FOKKER_PLANCK:
            return kernel_fp(t, k, self.params, self.c_M)
        return kernel_limit(t, k, self.params, self.c_M)

    # --- analytic envelopes -------------------------------------------------

    def tail_bound(self, T: float, k) -> float:
        """Upper bound of ``int_T^inf |K(t, k)| dt``."""
        if self.zero:
            return 0.0
        from scipy.special import erfc

        kk = knorm(k)
        eps = self.epsilon
        e0, cm = self.params.e0, self.c_M
        gauss_t = e0 * cm * np.exp(-0.5 * kk**2 * T**2) / kk**2
        if self.part == "K0":
            gauss_t = 0.0
        if self.model is Model.COLLISIONLESS or eps == 0:
            return float(gauss_t)
        if self.model is Model.LINEAR_BOLTZMANN:
            if self.part == "K1":
                return float(gauss_t)
            gain = eps * cm * np.sqrt(np.pi / 2) / kk * erfc(kk * T / np.sqrt(2))
            return float(gauss_t + gain)
        # Fokker-Planck: on [T, 3/eps] use u = chi(t), dt = exp(eps t) du and
        # exp(2 eps t) <= e**6; beyond 3/eps, eps |k|**2 psi(t) >= |k|**2 t / (2 eps)
        # so the integrand is below chi * exp(-rate t) with rate = |k|**2/(2 eps) - eps.
        t3 = 3.0 / eps
        t0 = max(T, t3)
        mid = 0.0
        if T < t3:
            mid = e0 * cm * np.exp(6.0) * np.exp(-0.5 * kk**2 * float(chi(T, eps)) ** 2) / kk**2
        rate = kk**2 / (2.0 * eps) - eps
        if rate <= 0:
            return float("inf")
        far = e0 * cm / eps * np.exp(-0.5 * kk**2 * float(chi(t0, eps)) ** 2 - rate * t0) / rate
        return float(mid + far)

    def cutoff(self, k, tol: float = 1e-14) -> float:
        """Smallest doubling-then-bisected ``T`` with ``tail_bound(T) <= tol``."""
        if self.zero:
            return 1.0
        lo, hi = 0.0, 1.0 / max(knorm(k), 1e-300)
        while self.tail_bound(hi, k) > tol:
            lo, hi = hi, 2.0 * hi
            if hi > 1e7:
                raise RuntimeError("kernel envelope does not decay")
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.tail_bound(mid, k) > tol:
                lo = mid
            else:
                hi = mid
        return hi

    def l1_norm(self, k, n_nodes: int = 4000) -> float:
        """``int_0^inf |K(t, k)| dt`` by composite Gauss-Legendre plus the tail bound."""
        if self.zero:
            return 0.0
        T = self.cutoff(k)
        # split at sign changes so no panel straddles a kink of |K|
        probe = np.linspace(0.0, T, 4001)
        vals = self(probe, k)
        cuts = [0.0]
        for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
            cuts.append(brentq(lambda s: float(self(s, k)), probe[i], probe[i + 1], xtol=1e-15))
        cuts.append(T)
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            panels = max(16, int(np.ceil((b - a) * knorm(k) * 8)))
            x, w = _gl_panels(a, b, panels, 16)
            total += np.sum(w * np.abs(self(x, k)))
        return float(total + self.tail_bound(T, k))


def _gl_panels(a: float, b: float, panels: int, order: int):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights
