"""Direct per-mode simulation of the linearized kinetic equation in ``(k, xi)``.

After a Fourier transform in ``x`` and ``v`` each spatial mode evolves
independently on a velocity-frequency grid.  Transport, collisional drift and
absorption are integrated exactly along characteristics; only the
interpolation at the characteristic foot and the trapezoid for the field term
are approximations.

Linear Boltzmann (``c_norm rho_hat = h_hat(k, 0)`` up to the amplitude factor)::

    d_t h - k . grad_xi h + (k . xi) W rho M(xi) = eps (rho M(xi) - h)

Fokker-Planck::

    d_t h + (eps xi - k) . grad_xi h = -eps |xi|**2 h - (k . xi) W rho M(xi)

One step of size ``dt`` reads

    h_{n+1}(xi) = A(xi) I[h_n](foot(xi)) + dt/2 (g(0, xi) rho_{n+1} + g(dt, xi) rho_n),

where ``g(u, xi)`` is the field (and gain) source emitted ``u`` time units
earlier and transported to ``xi``.  Because ``rho_{n+1}`` enters linearly
through ``h_{n+1}(0)``, the implicit relation is solved exactly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .foundations import (
    Model,
    PhysicalParams,
    chi,
    coulomb_w,
    fp_damping_exponent,
    knorm,
    maxwellian_profile,
)
from .volterra import PIVOT_GUARD, StepSizeError, c_norm_for

log = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform symmetric grid ``xi_j = j dxi``, ``|j| <= extent / dxi``."""

    dxi: float
    extent: float

    def __post_init__(self):
        if not (self.dxi > 0 and self.extent > 0):
            raise ValueError("dxi and extent must be positive")
        m = self.extent / self.dxi
        if abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise ValueError("extent must be an integer multiple of dxi")

    @property
    def half(self) -> int:
        return int(round(self.extent / self.dxi))

    @property
    def size(self) -> int:
        return 2 * self.half + 1

    @property
    def nodes(self) -> np.ndarray:
        return self.dxi * np.arange(-self.half, self.half + 1, dtype=float)

    @property
    def zero_index(self) -> int:
        return self.half


def cubic_stencil(grid: VelocityGrid, points):
    """Indices and weights of 4-point Lagrange interpolation at ``points``.

    Stencil nodes outside the grid receive zero weight, which realizes the
    zero extension of the data beyond ``extent``.
    """
    pts = np.asarray(points, dtype=float)
    s = (pts + grid.extent) / grid.dxi
    base = np.floor(s).astype(np.int64)
    p = s - base
    # snap round-off so grid-aligned shifts reproduce data exactly
    snap = np.abs(p - np.round(p)) < 1e-12
    base = np.where(snap & (np.round(p) == 1), base + 1, base)
    p = np.where(snap, 0.0, p)
    idx = base[..., None] + np.arange(-1, 3)
    w = np.stack(
        [
            -p * (p - 1.0) * (p - 2.0) / 6.0,
            (p + 1.0) * (p - 1.0) * (p - 2.0) / 2.0,
            -(p + 1.0) * p * (p - 2.0) / 2.0,
            (p + 1.0) * p * (p - 1.0) / 6.0,
        ],
        axis=-1,
    )
    inside = (idx >= 0) & (idx < grid.size)
    w = np.where(inside, w, 0.0)
    idx = np.clip(idx, 0, grid.size - 1)
    return idx, w


def interpolate(values, grid: VelocityGrid, points):
    idx, w = cubic_stencil(grid, points)
    return np.sum(w * np.asarray(values)[idx], axis=-1)


@dataclass
class ModeState:
    """``h_hat(t, k, .)`` sampled on a velocity-frequency grid.

    ``rho`` records ``rho_hat(t_j, k)`` at every completed step (including the
    initial time), so the state carries its own history.
    """

    k: int
    grid: VelocityGrid
    values: np.ndarray
    t: float = 0.0
    rho: list = field(default_factory=list)
    boundary_warned: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.size,):
            raise ValueError("values do not match the velocity grid")
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("non-finite mode values")

    @classmethod
    def from_family(cls, family, k, grid: VelocityGrid, params: PhysicalParams,
                    c_M: Optional[float] = None) -> "ModeState":
        vals = family.mode(k, grid.nodes)
        st = cls(k, grid, vals)
        st.rho.append(_rho_of(st, params, c_M))
        return st

    def at(self, xi):
        """Cubic interpolant of the current values."""
        return interpolate(self.values, self.grid, xi)


def _rho_of(state: ModeState, params: PhysicalParams, c_M) -> complex:
    if knorm(state.k) == 0:
        return 0j
    return c_norm_for(c_M, params.d) * complex(state.values[state.grid.zero_index])


@dataclass(frozen=True)
class _Stepper:
    idx: np.ndarray
    w: np.ndarray
    damp: np.ndarray
    g0: np.ndarray
    g1: np.ndarray
    pivot: float
    c_norm: float
    zero: int


_CACHE: dict = {}


def _stepper(model: str, k, dt: float, params: PhysicalParams, grid: VelocityGrid, c_M) -> _Stepper:
    key = (model, k, float(dt), params.epsilon, params.e0, grid.dxi, grid.extent, c_M)
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    if params.d != 1:
        raise NotImplementedError("direct kinetic simulation is implemented for d = 1")
    xi = grid.nodes
    eps = params.epsilon
    kk = float(k)
    cn = c_norm_for(c_M, params.d)
    if model == "fp":
        foot = np.exp(-eps * dt) * xi + float(chi(dt, eps)) * kk
        damp = np.exp(-fp_damping_exponent(dt, xi, kk, eps))
    else:
        foot = xi + kk * dt
        damp = np.full_like(xi, np.exp(-eps * dt))
    idx, w = cubic_stencil(grid, foot)

    def g(u):
        if kk == 0:
            return np.zeros_like(xi)
        W = coulomb_w(k, params.e0)
        if model == "fp":
            eta = np.exp(-eps * u) * xi + float(chi(u, eps)) * kk
            return -np.exp(-fp_damping_exponent(u, xi, kk, eps)) * kk * eta * W * maxwellian_profile(eta)
        eta = xi + kk * u
        return np.exp(-eps * u) * (eps - W * kk * eta) * maxwellian_profile(eta)

    g0, g1 = g(0.0), g(dt)
    z = grid.zero_index
    pivot = 1.0 - cn * 0.5 * dt * g0[z]
    if abs(pivot) < PIVOT_GUARD:
        raise StepSizeError(f"implicit closure pivot {pivot:.3e}; reduce the step size")
    st = _Stepper(idx, w, damp, g0, g1, pivot, cn, z)
    if len(_CACHE) > 256:
        _CACHE.clear()
    _CACHE[key] = st
    return st


def _advance(state: ModeState, dt: float, st: _Stepper) -> ModeState:
    f = state.values
    rho_n = state.rho[-1] if state.rho else st.c_norm * f[st.zero]
    base = st.damp * np.sum(st.w * f[st.idx], axis=1) + 0.5 * dt * st.g1 * rho_n
    if knorm(state.k) == 0:
        rho_next = 0j
    else:
        rho_next = st.c_norm * base[st.zero] / st.pivot
    new = base + 0.5 * dt * st.g0 * rho_next
    out = ModeState(state.k, state.grid, new, state.t + dt, list(state.rho), state.boundary_warned)
    out.rho.append(complex(rho_next))
    if not out.boundary_warned and max(abs(new[0]), abs(new[-1])) > BOUNDARY_TOL:
        log.warning("mode k=%s carries |h| > %.0e at the velocity-grid boundary (t=%.3g)",
                    state.k, BOUNDARY_TOL, out.t)
        out.boundary_warned = True
    return out


def step_lb(state: ModeState, dt: float, params: PhysicalParams, c_M: Optional[float] = None) -> ModeState:
    """One linear-Boltzmann (or collisionless, ``epsilon = 0``) step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return _advance(state, dt, _stepper("lb", state.k, dt, params, state.grid, c_M))


def step_fp(state: ModeState, dt: float, params: PhysicalParams, c_M: Optional[float] = None) -> ModeState:
    """One Fokker-Planck step along exact characteristics."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return _advance(state, dt, _stepper("fp", state.k, dt, params, state.grid, c_M))


def exact_homogeneous_fp(family, t, xi, epsilon: float):
    """``exp(-(1 - exp(-2 eps t)) |xi|**2 / 2) h_in(0, exp(-eps t) xi)``."""
    t = float(t)
    xi = np.asarray(xi, dtype=float)
    if epsilon == 0:
        return family.mode(0, xi)
    a = -0.5 * np.expm1(-2.0 * epsilon * t)
    return np.exp(-a * xi**2) * family.mode(0, np.exp(-epsilon * t) * xi)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

@dataclass
class ScenarioResult:
    """Time series produced by :func:`run_scenario`.

    ``probes`` maps ``(k, xi)`` to ``|h_hat(t, k, xi)|``; ``lb_k0_error`` is the
    largest relative deviation from ``|h(t,0,xi)| = exp(-eps t) |h_in(0,xi)|``
    (``nan`` when not applicable).
    """

    times: np.ndarray
    rho: dict
    norm: np.ndarray
    probes: dict
    lb_k0_error: float
    boundary_warnings: list
    final: dict
    snapshots: dict = field(default_factory=dict)

    def to_csv(self, path, header: str = "") -> None:
        cols = [self.times, self.norm]
        names = ["t", "rho_norm"]
        for k in sorted(self.rho):
            cols += [self.rho[k].real, self.rho[k].imag]
            names += [f"re_rho_{k}", f"im_rho_{k}"]
        for (k, x) in sorted(self.probes):
            cols.append(self.probes[(k, x)])
            names.append(f"abs_h_{k}_{x:g}")
        np.savetxt(path, np.column_stack(cols), delimiter=",", fmt="%.17g", comments="# ",
                   header=(header + "\n" if header else "") + ",".join(names))


def run_scenario(params: PhysicalParams, family, grid: VelocityGrid, t_end: float, dt: float,
                 c_M: Optional[float] = None, modes=None, probes=(), snapshot_every: int = 0) -> ScenarioResult:
    """Evolve every active mode to ``t_end``.

    Parameters
    ----------
    modes:
        Modes to evolve; defaults to the family's active modes.
    probes:
        ``(k, xi)`` pairs at which ``|h_hat(t, k, xi)|`` is recorded.
    snapshot_every:
        Keep ``|h_hat(t, k, .)|`` every this many steps (0 disables).
    """
    n_steps = int(round(t_end / dt))
    if n_steps < 1 or abs(n_steps * dt - t_end) > 1e-9 * t_end:
        raise ValueError("t_end must be a positive multiple of dt")
    modes = list(family.active_modes if modes is None else modes)
    for k, _ in probes:
        if k not in modes:
            modes.append(k)
    step = step_fp if params.model is Model.FOKKER_PLANCK else step_lb
    times = dt * np.arange(n_steps + 1)
    rho, probe_out, final, snaps, warned = {}, {}, {}, {}, []
    check_k0 = params.model is not Model.FOKKER_PLANCK and 0 in modes
    k0_err = float("nan")
    for k in modes:
        st = ModeState.from_family(family, k, grid, params, c_M)
        mine = [(kp, x) for kp, x in probes if kp == k]
        series = {pr: np.empty(n_steps + 1) for pr in mine}
        if mine:
            idx, w = cubic_stencil(grid, [x for _, x in mine])
        h0 = np.abs(st.values)
        err = 0.0
        snap = []
        for j in range(n_steps + 1):
            if j > 0:
                st = step(st, dt, params, c_M)
            if mine:
                vals = np.abs(np.sum(w * st.values[idx], axis=-1))
                for i, pr in enumerate(mine):
                    series[pr][j] = vals[i]
            if check_k0 and k == 0:
                ref = np.exp(-params.epsilon * times[j]) * h0
                mask = ref > 1e-300
                if np.any(mask):
                    err = max(err, float(np.max(np.abs(np.abs(st.values[mask]) - ref[mask]) / ref[mask])))
            if snapshot_every and j % snapshot_every == 0:
                snap.append(np.abs(st.values))
        if check_k0 and k == 0:
            k0_err = err
        rho[k] = np.asarray(st.rho, dtype=complex)
        probe_out.update(series)
        final[k] = st
        if snap:
            snaps[k] = np.array(snap)
        if st.boundary_warned:
            warned.append(k)
    norm = np.sqrt(sum(np.abs(r) ** 2 for r in rho.values())) if rho else np.zeros(n_steps + 1)
    return ScenarioResult(times, rho, np.asarray(norm, dtype=float), probe_out, k0_err, warned, final, snaps)


def kinetic_density(params: PhysicalParams, family, k, grid: VelocityGrid, t_end: float, dt: float,
                    c_M: Optional[float] = None) -> np.ndarray:
    """``rho_hat(t_j, k)`` from the direct simulation of a single mode."""
    return run_scenario(params, family, grid, t_end, dt, c_M, modes=[k]).rho[k]
