"""The ten acceptance criteria, shared by ``landau-eps verify`` and the test suite.

Every check runs at ``d = 1``, ``e0 = 1`` and ``c_M = (2 pi)**(-1/2)`` and
returns a :class:`CriterionResult` with its measured quantities.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .analysis import (
    envelope_sup,
    epsilon_continuity_study,
    fit_algebraic_decay,
    fit_exponential_rate,
    weight_fn,
    weighted_l2_fourier,
)
from .dispersion import kernel_distance, linear_fit, penrose_margin
from .foundations import FiniteSobolevTail, GaussianHermite, Model, PhysicalParams
from .kernels import KernelSpec
from .kinetic import ModeState, VelocityGrid, exact_homogeneous_fp, kinetic_density, run_scenario, step_fp
from .volterra import TimeGrid, density_mode, density_modes, density_norm, solve_volterra

MODELS = (Model.LINEAR_BOLTZMANN, Model.FOKKER_PLANCK)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    runtime: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} [{tag}] {self.title} ({self.runtime:.1f} s)"

    def to_dict(self) -> dict:
        return asdict(self)


def _timed(number: int, title: str, fn: Callable[[], tuple]) -> CriterionResult:
    t0 = time.perf_counter()
    passed, metrics = fn()
    return CriterionResult(number, title, bool(passed), metrics, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# 1. Penrose margin and its linear control in epsilon
# ---------------------------------------------------------------------------

PENROSE_EPS = (0.0, 0.02, 0.05, 0.1)


def c0_samples(k_max: int = 8, Lambda: float = 40.0, Z: float = 20.0, n_lambda: int = 41, n_zeta: int = 11):
    """A coarse copy of the Penrose scan rectangle for the kernel distance."""
    lams = np.linspace(-Lambda, Lambda, n_lambda)
    zetas = np.linspace(-Z, 0.0, n_zeta)
    return [(complex(l, z), k) for k in range(1, k_max + 1) for l in lams for z in zetas]


def criterion_penrose(epsilons=PENROSE_EPS, kappa: float = 0.05, r2_min: float = 0.95,
                      time_limit: float = 120.0, **scan) -> CriterionResult:
    def run():
        t0 = time.perf_counter()
        samples = c0_samples()
        ok = True
        out = {}
        for model in MODELS:
            margins, certs = [], []
            for eps in epsilons:
                kern = KernelSpec(model, PhysicalParams(model=model, epsilon=eps))
                rep = penrose_margin(kern, kappa_target=kappa, **scan)
                margins.append(rep.margin)
                certs.append(rep.certified_margin)
            ratios = [kernel_distance(e, model, samples) / e for e in epsilons if e > 0]
            c0 = max(ratios)
            lower = [margins[0] - c0 * e for e in epsilons]
            _, slope, r2 = linear_fit(epsilons, margins)
            good = (min(certs) >= kappa and all(m >= lo - 1e-12 for m, lo in zip(margins, lower))
                    and r2 >= r2_min)
            ok &= good
            out[model.value] = {"margins": margins, "certified": certs, "c0": c0,
                                "slope": slope, "r2": r2, "passed": good}
        elapsed = time.perf_counter() - t0
        out["elapsed"] = elapsed
        return ok and elapsed <= time_limit, out

    return _timed(1, "Penrose margin certified and linearly controlled in epsilon", run)


# ---------------------------------------------------------------------------
# 2. kernel distance is linear in epsilon
# ---------------------------------------------------------------------------

def criterion_kernel_distance(epsilons=(0.01, 0.02, 0.04, 0.08), r2_min: float = 0.99) -> CriterionResult:
    def run():
        samples = c0_samples(k_max=4, Lambda=10.0, Z=5.0)
        ok, out = True, {}
        for model in MODELS:
            d = [kernel_distance(e, model, samples) for e in epsilons]
            _, expo, r2 = linear_fit(np.log(epsilons), np.log(d))
            good = 0.8 <= expo <= 1.2 and r2 >= r2_min
            ok &= good
            out[model.value] = {"distances": d, "exponent": expo, "r2": r2, "c0": float(max(np.divide(d, epsilons)))}
        return ok, out

    return _timed(2, "Kernel distance scales linearly in epsilon", run)


# ---------------------------------------------------------------------------
# 3. Volterra solver order
# ---------------------------------------------------------------------------

def manufactured_errors(dts=(0.1, 0.05, 0.025), t_end: float = 10.0) -> list:
    """Max errors for ``K = exp(-t)``, exact solution ``cos t``."""
    errs = []
    for dt in dts:
        g = TimeGrid.from_dt(t_end, dt)
        t = g.times
        src = np.cos(t) - 0.5 * (np.cos(t) + np.sin(t) - np.exp(-t))
        u = solve_volterra(lambda s: np.exp(-s), src, g).values
        errs.append(float(np.max(np.abs(u - np.cos(t)))))
    return errs


def constant_kernel_error(c: float, dt: float, t_end: float) -> float:
    g = TimeGrid.from_dt(t_end, dt)
    t = g.times
    u = solve_volterra(np.full(t.shape, c), np.ones_like(t), g).values
    return float(np.max(np.abs(u - np.exp(c * t)) / np.exp(c * t)))


def criterion_volterra_order(dts=(0.1, 0.05, 0.025)) -> CriterionResult:
    def run():
        errs = manufactured_errors(dts)
        orders = [math.log(errs[i] / errs[i + 1]) / math.log(dts[i] / dts[i + 1]) for i in range(len(dts) - 1)]
        const = {}
        ok = min(orders) >= 1.9
        for c, dt, T in ((1.0, 0.05, 5.0), (0.5, 0.025, 10.0)):
            err = constant_kernel_error(c, dt, T)
            bound = 0.5 * dt**2 * T * math.exp(c * T)
            const[f"c={c},dt={dt},T={T}"] = {"error": err, "bound": bound}
            ok &= err <= bound
        return ok, {"errors": errs, "orders": orders, "constant_kernel": const}

    return _timed(3, "Volterra product trapezoid is second order", run)


# ---------------------------------------------------------------------------
# 4. Volterra against the kinetic simulation
# ---------------------------------------------------------------------------

def relative_deviation(a, b) -> float:
    """``max_t ||a| - |b|| / max_t |b|``."""
    a, b = np.abs(a), np.abs(b)
    return float(np.max(np.abs(a - b)) / np.max(b))


def criterion_cross_validation(dt: float = 0.01, dxi: float = 0.05, extent: float = 60.0,
                               t_end: float = 40.0, tol: float = 1e-3, time_limit: float = 300.0) -> CriterionResult:
    def run():
        t0 = time.perf_counter()
        fam = GaussianHermite()
        grid = TimeGrid.from_dt(t_end, dt)
        vgrid = VelocityGrid(dxi, extent)
        ok, out = True, {}
        for model in MODELS:
            for eps in (0.0, 0.05):
                p = PhysicalParams(model=model, epsilon=eps)
                v = density_mode(p, fam, 1, grid).rho
                kin = kinetic_density(p, fam, 1, vgrid, t_end, dt)
                dev = relative_deviation(kin, v)
                ok &= dev <= tol
                out[f"{model.value}/eps={eps}"] = dev
        elapsed = time.perf_counter() - t0
        out["elapsed"] = elapsed
        return ok and elapsed <= time_limit, out

    return _timed(4, "Volterra and kinetic densities agree", run)


# ---------------------------------------------------------------------------
# 5, 7. density decay
# ---------------------------------------------------------------------------

def density_series(model: Model, epsilon: float, family=None, t_end: float = 40.0, dt: float = 0.01):
    family = family or FiniteSobolevTail(n_decl=4)
    grid = TimeGrid.from_dt(t_end, dt)
    p = PhysicalParams(model=model, epsilon=epsilon)
    return grid.times, density_norm(density_modes(p, family, grid), grid.N + 1)


def criterion_lb_decay(epsilon: float = 0.02, n: int = 4, min_exponent: float = 3.7) -> CriterionResult:
    def run():
        t, nrm = density_series(Model.LINEAR_BOLTZMANN, epsilon, FiniteSobolevTail(n_decl=n))
        env = envelope_sup(t, nrm, weight_fn(n))
        fit = fit_algebraic_decay(t, nrm, (5.0, 40.0))
        return env.bounded and fit.value >= min_exponent, {"envelope": env.to_dict(), "fit": fit.to_dict()}

    return _timed(5, "Linear Boltzmann density decays like <t>^-4", run)


def criterion_fp_decay(epsilon: float = 0.05, n: int = 4) -> CriterionResult:
    def run():
        t, nrm = density_series(Model.FOKKER_PLANCK, epsilon, FiniteSobolevTail(n_decl=n))
        env = envelope_sup(t, nrm, weight_fn(n, epsilon))
        return env.bounded, {"envelope": env.to_dict()}

    return _timed(7, "Fokker-Planck density decays like exp(-eps t) <t>^-4", run)


# ---------------------------------------------------------------------------
# 6. linear Boltzmann zero mode
# ---------------------------------------------------------------------------

def criterion_lb_zero_mode(epsilons=(0.02, 0.07), t_end: float = 40.0, dt: float = 0.01,
                           tol: float = 1e-10) -> CriterionResult:
    def run():
        fam = GaussianHermite(amplitudes={0: 1.0, 1: 1.0, -1: 1.0})
        out = {}
        for eps in epsilons:
            p = PhysicalParams(model=Model.LINEAR_BOLTZMANN, epsilon=eps)
            res = run_scenario(p, fam, VelocityGrid(0.05, 60.0), t_end, dt, modes=[0], probes=[(0, 1.0)])
            fit = fit_exponential_rate(res.times, res.probes[(0, 1.0)], (5.0, t_end))
            out[f"eps={eps}"] = {"relative_error": res.lb_k0_error, "rate": fit.value}
        return all(v["relative_error"] <= tol for v in out.values()), out

    return _timed(6, "Linear Boltzmann zero mode decays exactly like exp(-eps t)", run)


# ---------------------------------------------------------------------------
# 8. mode estimates at velocity-frequency probes
# ---------------------------------------------------------------------------

PROBES = (0.5, 1.0, 2.0, 4.0)


def criterion_mode_probes(n: int = 4, factor: float = 3.0, dt: float = 0.01, dxi: float = 0.05,
                          extent: float = 120.0, t_end: float = 40.0) -> CriterionResult:
    def run():
        fam = FiniteSobolevTail(n_decl=n)
        ok, out = True, {}
        for model, eps in ((Model.LINEAR_BOLTZMANN, 0.02), (Model.FOKKER_PLANCK, 0.05)):
            p = PhysicalParams(model=model, epsilon=eps)
            res = run_scenario(p, fam, VelocityGrid(dxi, extent), t_end, dt, modes=[1],
                               probes=[(1, x) for x in PROBES])
            sups, bounded = [], []
            for x in PROBES:
                env = envelope_sup(res.times, res.probes[(1, x)], weight_fn(n - 2))
                sups.append(env.sup)
                bounded.append(env.bounded)
            scaled = [s / (1.0 + x * x) ** ((n - 2) / 2.0) for s, x in zip(sups, PROBES)]
            worst = max(scaled[j] / scaled[i] for i in range(len(PROBES)) for j in range(i + 1, len(PROBES)))
            good = all(bounded) and worst <= factor
            ok &= good
            out[model.value] = {"sups": sups, "scaled": scaled, "worst_growth": worst, "bounded": bounded}
        return ok, out

    return _timed(8, "Mode estimates bounded with <xi>^2 constants", run)


# ---------------------------------------------------------------------------
# 9. homogeneous Fokker-Planck
# ---------------------------------------------------------------------------

def homogeneous_fp_run(epsilon: float, t_end: float = 20.0, dt: float = 0.05, dxi: float = 0.0025,
                       extent: float = 12.0):
    """Kinetic ``k = 0`` evolution of Hermite-1 data against the closed form.

    Returns ``(times, max error per step, weighted norms)``.
    """
    fam = GaussianHermite(amplitudes={0: 1.0})
    p = PhysicalParams(model=Model.FOKKER_PLANCK, epsilon=epsilon)
    vg = VelocityGrid(dxi, extent)
    st = ModeState.from_family(fam, 0, vg, p)
    n = int(round(t_end / dt))
    times = dt * np.arange(n + 1)
    errs, norms = [0.0], [weighted_l2_fourier(st.values, dxi)]
    for j in range(1, n + 1):
        st = step_fp(st, dt, p)
        errs.append(float(np.max(np.abs(st.values - exact_homogeneous_fp(fam, times[j], vg.nodes, epsilon)))))
        norms.append(weighted_l2_fourier(st.values, dxi))
    return times, np.array(errs), np.array(norms)


def criterion_homogeneous_fp(epsilons=(0.05, 0.1), tol: float = 1e-8, min_ratio: float = 0.8) -> CriterionResult:
    def run():
        ok, out = True, {}
        for eps in epsilons:
            t, errs, norms = homogeneous_fp_run(eps)
            fit = fit_exponential_rate(t, norms, (5.0, t[-1]))
            good = errs.max() <= tol and fit.value / eps >= min_ratio
            ok &= good
            out[f"eps={eps}"] = {"max_error": float(errs.max()), "rate": fit.value, "rate_over_eps": fit.value / eps}
        return ok, out

    return _timed(9, "Homogeneous Fokker-Planck matches the closed form and decays at rate ~eps", run)


# ---------------------------------------------------------------------------
# 10. uniformity in epsilon
# ---------------------------------------------------------------------------

def criterion_continuity(epsilons=(0.01, 0.02, 0.04), t_end: float = 40.0, dt: float = 0.01) -> CriterionResult:
    def run():
        grid = TimeGrid.from_dt(t_end, dt)
        ok, out = True, {}
        for model in MODELS:
            st = epsilon_continuity_study(model, epsilons, GaussianHermite(), grid)
            good = 0.8 <= st.exponent <= 1.2
            ok &= good
            out[model.value] = st.to_dict()
        return ok, out

    return _timed(10, "Density norms depend linearly on epsilon", run)


CRITERIA = {
    1: criterion_penrose,
    2: criterion_kernel_distance,
    3: criterion_volterra_order,
    4: criterion_cross_validation,
    5: criterion_lb_decay,
    6: criterion_lb_zero_mode,
    7: criterion_fp_decay,
    8: criterion_mode_probes,
    9: criterion_homogeneous_fp,
    10: criterion_continuity,
}


def run_criteria(numbers=None, overrides: Optional[dict] = None) -> list:
    """Run the selected criteria (all by default); ``overrides`` maps a number to keyword arguments."""
    numbers = sorted(CRITERIA) if numbers is None else list(numbers)
    overrides = overrides or {}
    return [CRITERIA[i](**overrides.get(i, {})) for i in numbers]
