"""Second-kind Volterra equations ``u(t) = S(t) + int_0^t K(t - s) u(s) ds``.

On a uniform grid the product trapezoidal rule gives the marching scheme

    u_j (1 - dt K_0 / 2) = S_j + dt (K_j u_0 / 2 + sum_{0<i<j} K_{j-i} u_i),

with the kernel tabulated once per time lag.

For both collision models the unknown is ``h_hat(t, k, 0)`` (times
``exp(eps t)`` for Fokker-Planck); the density coefficient is that value
multiplied by ``c_norm = c_M (2 pi)**(d/2)``, which is 1 for the default
amplitude.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .foundations import Model, PhysicalParams, chi, default_amplitude, knorm, psi
from .kernels import KernelSpec

PIVOT_GUARD = 1e-8


class StepSizeError(ArithmeticError):
    """The implicit trapezoid pivot ``1 - dt K(0) / 2`` is numerically zero."""


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError("a time grid needs N >= 2 steps")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")

    @classmethod
    def from_dt(cls, t_end: float, dt: float) -> "TimeGrid":
        return cls(t_end, int(round(t_end / dt)))

    @property
    def dt(self) -> float:
        return self.t_end / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.N + 1)


@dataclass
class ModeTrajectory:
    """Solution of one mode's Volterra equation.

    ``values`` is the marched unknown; for the Fokker-Planck model this is the
    ``exp(eps t)`` gauge, and :attr:`rho` undoes it.
    """

    k: object
    times: np.ndarray
    values: np.ndarray
    model: Model = Model.COLLISIONLESS
    epsilon: float = 0.0
    c_norm: float = 1.0
    source: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values differ in length")
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("non-finite values in trajectory")

    @property
    def rho(self) -> np.ndarray:
        """Density Fourier coefficient ``rho_hat(t_j, k)``."""
        vals = self.values
        if self.model is Model.FOKKER_PLANCK and self.epsilon > 0:
            vals = vals * np.exp(-self.epsilon * self.times)
        return self.c_norm * vals

    def to_csv(self, path, header: str = "") -> None:
        u = self.values
        data = np.column_stack([self.times, u.real, u.imag, np.abs(u)])
        np.savetxt(path, data, delimiter=",", header=(header + "\n" if header else "") + "t,re,im,abs",
                   comments="# ", fmt="%.17g")


def solve_volterra(kernel, source, grid: TimeGrid, k=None) -> ModeTrajectory:
    """March the product-trapezoid scheme.

    Parameters
    ----------
    kernel:
        A :class:`KernelSpec` (evaluated at ``k``), a callable of ``t``, or an
        array tabulated on ``grid.times``.
    source:
        A callable of ``t`` or an array tabulated on ``grid.times``.
    grid:
        Uniform time grid.
    k:
        Mode passed to a :class:`KernelSpec`.

    Raises
    ------
    StepSizeError
        If ``|1 - dt K(0) / 2| < 1e-8``.
    """
    t = grid.times
    dt = grid.dt
    if isinstance(kernel, KernelSpec):
        K = np.asarray(kernel(t, k), dtype=complex)
    elif callable(kernel):
        K = np.asarray(kernel(t), dtype=complex)
    else:
        K = np.asarray(kernel, dtype=complex)
    S = np.asarray(source(t) if callable(source) else source, dtype=complex)
    if K.shape != t.shape or S.shape != t.shape:
        raise ValueError("kernel and source must be tabulated on the time grid")
    pivot = 1.0 - 0.5 * dt * K[0]
    if abs(pivot) < PIVOT_GUARD:
        raise StepSizeError(f"1 - dt K(0)/2 = {pivot:.3e}; reduce the step size")

    u = np.zeros_like(S)
    u[0] = S[0]
    Krev = K[::-1].copy()  # Krev[N - m] = K_m
    N = grid.N
    for j in range(1, N + 1):
        hist = 0.5 * K[j] * u[0]
        if j > 1:
            # sum_{i=1}^{j-1} K_{j-i} u_i
            hist += np.dot(Krev[N - j + 1:N], u[1:j])
        u[j] = (S[j] + dt * hist) / pivot
    return ModeTrajectory(k, t, u)


# ---------------------------------------------------------------------------
# model-specific sources
# ---------------------------------------------------------------------------

def source_lb(family, k, t, params: PhysicalParams):
    """Free-streaming trace ``exp(-eps t) h_in(k, k t)``."""
    t = np.asarray(t, dtype=float)
    kv = np.asarray(k, dtype=float)
    xi = t[..., None] * kv if kv.ndim else t * kv
    return np.exp(-params.epsilon * t) * family.mode(k, xi)


def source_fp(family, k, t, params: PhysicalParams):
    """``exp(eps t - eps |k|**2 psi(t)) h_in(k, chi(t) k)``, the Fokker-Planck source
    in the ``exp(eps t)`` gauge."""
    t = np.asarray(t, dtype=float)
    eps = params.epsilon
    kk = knorm(k)
    c = chi(t, eps)
    kv = np.asarray(k, dtype=float)
    xi = c[..., None] * kv if kv.ndim else c * kv
    return np.exp(eps * t - eps * kk**2 * psi(t, eps)) * family.mode(k, xi)


def c_norm_for(c_M: Optional[float], d: int = 1) -> float:
    """Factor between ``rho_hat(t, k)`` and ``h_hat(t, k, 0)`` for a kernel amplitude."""
    if c_M is None:
        return 1.0
    return c_M / default_amplitude(d)


def density_mode(params: PhysicalParams, family, k, grid: TimeGrid, c_M: Optional[float] = None) -> ModeTrajectory:
    """Solve the closed equation for one nonzero mode of the chosen model."""
    kern = KernelSpec.for_params(params, c_M)
    if params.model is Model.FOKKER_PLANCK and params.epsilon > 0:
        src = source_fp(family, k, grid.times, params)
        name = "fp"
    else:
        src = source_lb(family, k, grid.times, params)
        name = "lb"
    if params.model is Model.COLLISIONLESS:
        src = source_lb(family, k, grid.times, params.replace(epsilon=0.0))
    traj = solve_volterra(kern, src, grid, k)
    traj.model = params.model
    traj.epsilon = params.epsilon
    traj.c_norm = c_norm_for(c_M, params.d)
    traj.source = f"{name}:{family.kind}"
    return traj


def density_modes(params: PhysicalParams, family, grid: TimeGrid, c_M: Optional[float] = None) -> dict:
    """``rho_hat(t, k)`` for every active nonzero mode; the zero mode is conserved at 0."""
    out = {}
    for k in family.active_modes:
        if knorm(k) == 0:
            continue
        out[k] = density_mode(params, family, k, grid, c_M)
    return out


def density_norm(trajectories: dict, n_times: int) -> np.ndarray:
    """``||rho(t)||_{L^2_x}`` by Parseval over the given modes."""
    total = np.zeros(n_times)
    for traj in trajectories.values():
        total += np.abs(traj.rho) ** 2
    return np.sqrt(total)


def weighted_sup_ratio(traj: ModeTrajectory, family, gamma: float) -> float:
    """``sup <kt>**gamma |rho_hat| / sup <kt>**gamma |h_in(k, kt)|`` over the trajectory."""
    kk = knorm(traj.k)
    w = (1.0 + (kk * traj.times) ** 2) ** (gamma / 2.0)
    kv = np.asarray(traj.k, dtype=float)
    xi = traj.times[:, None] * kv if kv.ndim else traj.times * kv
    free = traj.c_norm * np.abs(family.mode(traj.k, xi))
    return float(np.max(w * np.abs(traj.rho)) / np.max(w * free))
