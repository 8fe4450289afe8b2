"""Time-Fourier transforms of the kernels and the Penrose stability margin.

The transform ``K~(tau, k) = int_0^inf K(t, k) exp(-i t tau) dt`` is evaluated
for ``Im tau <= 0`` with composite Gauss-Legendre panels on ``[0, T*]``; ``T*``
comes from the kernel's analytic envelope so the neglected tail is bounded
rigorously.  On a rectangular ``(lambda, zeta)`` grid the exponential factors
separate, and the whole grid is a single matrix product.

Because ``1 - K~`` is analytic in the open lower half-plane and tends to 1 at
infinity, a zero winding number along the rectangle boundary certifies that
it has no zeros inside, so its modulus attains its minimum on the boundary.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .foundations import Model, PhysicalParams, coulomb_w, default_amplitude, knorm
from .kernels import KernelSpec, _gl_panels

logger = logging.getLogger(__name__)

GL_ORDER = 16
TAIL_TOL = 1e-14
MIN_REFINE_LEVELS = 5
#: complex entries per dense transform block (2**21 x 16 bytes = 32 MB)
CHUNK_ELEMENTS = 2**21


class CertificateError(RuntimeError):
    """A tail certificate fell below the requested margin."""


@dataclass(frozen=True)
class _Rule:
    nodes: np.ndarray
    wk: np.ndarray  # weights times kernel values
    tail: float


def _panel_width(k: float, lam_max: float, zeta_min: float) -> float:
    h = 0.5 / k
    if lam_max > 0:
        h = min(h, np.pi / lam_max)
    if zeta_min < 0:
        h = min(h, 2.0 / abs(zeta_min))
    return h


def _rule(kernel: KernelSpec, k, lam_max: float, zeta_min: float, refine: int = 1) -> _Rule:
    kk = knorm(k)
    T = kernel.cutoff(k, TAIL_TOL)
    h = _panel_width(kk, lam_max, zeta_min) / refine
    panels = max(4, int(math.ceil(T / h)))
    x, w = _gl_panels(0.0, T, panels, GL_ORDER)
    return _Rule(x, w * kernel(x, k), kernel.tail_bound(T, k))


def _check_tau(tau):
    tau = np.asarray(tau, dtype=complex)
    if np.any(tau.imag > 0):
        raise ValueError("the transform is only defined for Im tau <= 0")
    return tau


def laplace_kernel(kernel: KernelSpec, tau, k, tol: float = 1e-9, return_error: bool = False):
    """Fourier-in-time transform of a causal kernel on the closed lower half-plane.

    Parameters
    ----------
    kernel:
        The kernel to transform.
    tau:
        Complex frequency or array of them, each with ``Im tau <= 0``.
    k:
        Spatial mode (``k != 0``).
    tol:
        Target bound on the returned error estimate.
    return_error:
        Also return the error estimate (panel-halving difference plus the
        rigorous tail bound).
    """
    tau = _check_tau(tau)
    if kernel.zero:
        out = np.zeros(tau.shape, dtype=complex)
        return (out, 0.0) if return_error else out
    lam_max = float(np.max(np.abs(tau.real), initial=0.0))
    zeta_min = float(np.min(tau.imag, initial=0.0))
    flat = tau.ravel()

    def evaluate(refine):
        r = _rule(kernel, k, lam_max, zeta_min, refine)
        return _chunked(lambda z: np.exp(-1j * np.outer(z, r.nodes)) @ r.wk, flat, r.nodes.size), r.tail

    refine = 1
    coarse, tail = evaluate(refine)
    while True:
        fine, tail = evaluate(2 * refine)
        err = float(np.max(np.abs(fine - coarse), initial=0.0)) + tail
        if err <= tol or refine >= 64:
            break
        refine *= 2
        coarse = fine
    if err > tol:
        logger.warning("laplace_kernel error estimate %.2e exceeds tol %.2e", err, tol)
    out = fine.reshape(tau.shape)
    return (out, err) if return_error else out


def transform_grid(kernel: KernelSpec, k, lams, zetas) -> np.ndarray:
    """``K~(lambda + i zeta, k)`` on a tensor grid, shape ``(len(lams), len(zetas))``."""
    lams = np.asarray(lams, dtype=float)
    zetas = np.asarray(zetas, dtype=float)
    if np.any(zetas > 0):
        raise ValueError("the transform is only defined for Im tau <= 0")
    if kernel.zero:
        return np.zeros((lams.size, zetas.size), dtype=complex)
    r = _rule(kernel, k, float(np.max(np.abs(lams), initial=0.0)), float(np.min(zetas, initial=0.0)))
    left = np.exp(-1j * np.outer(lams, r.nodes))
    right = r.wk[:, None] * np.exp(np.outer(r.nodes, zetas))
    return left @ right


def _chunked(fn, flat, width: int):
    """Apply ``fn`` to slices of ``flat`` so the dense ``len x width`` matrix stays near 32 MB."""
    rows = max(1, CHUNK_ELEMENTS // max(width, 1))
    if flat.size <= rows:
        return fn(flat)
    return np.concatenate([fn(flat[i:i + rows]) for i in range(0, flat.size, rows)])


def dispersion_L(k, xi, params: PhysicalParams, c_M: Optional[float] = None,
                 lambda_dagger: float = 1.0):
    """``L(k, xi) = -int_0^inf exp(conj(xi) |k| t) M(kt) W(k) |k|**2 t dt``.

    Defined for ``Re xi < lambda_dagger``; the Gaussian makes the integral
    absolutely convergent there.  ``L(k, (zeta + i lambda)/|k|)`` equals the
    collisionless transform at ``tau = lambda + i zeta``.
    """
    xi = np.asarray(xi, dtype=complex)
    if lambda_dagger <= 0:
        raise ValueError("lambda_dagger must be positive")
    if np.any(xi.real >= lambda_dagger):
        raise ValueError(f"Re xi must stay below lambda_dagger = {lambda_dagger}")
    kk = knorm(k)
    cm = default_amplitude(params.d) if c_M is None else c_M
    growth = max(float(np.max(xi.real, initial=0.0)), 0.0) * kk
    # exp(growth t - k^2 t^2 / 2) < 1e-17 beyond T
    T = (growth + math.sqrt(growth**2 + 2 * 40.0 * kk**2)) / kk**2
    osc = float(np.max(np.abs(xi.imag), initial=0.0)) * kk
    h = min(0.5 / kk, np.pi / osc if osc > 0 else np.inf)
    x, w = _gl_panels(0.0, T, max(8, int(math.ceil(T / h))), GL_ORDER)
    amp = -coulomb_w(k, params.e0) * kk**2 * cm
    integrand = w * amp * x * np.exp(-0.5 * kk**2 * x**2)
    flat = np.conj(xi).ravel()
    return _chunked(lambda z: np.exp(np.outer(z, kk * x)) @ integrand, flat, x.size).reshape(xi.shape)


# ---------------------------------------------------------------------------
# Penrose margin
# ---------------------------------------------------------------------------

@dataclass
class PenroseReport:
    model: str
    epsilon: float
    margin: float
    argmin_k: float
    argmin_tau: complex
    k_max_checked: float
    Lambda: float
    Z: float
    per_k_margin: dict
    tail_k_bound: float
    tail_rect_bound: float
    winding: dict
    kappa_target: float
    epsilon0: Optional[float] = None
    lams: np.ndarray = field(default=None, repr=False)
    zetas: np.ndarray = field(default=None, repr=False)
    margin_map: np.ndarray = field(default=None, repr=False)

    @property
    def no_zeros_inside(self) -> bool:
        return all(w == 0 for w in self.winding.values())

    @property
    def certified_margin(self) -> float:
        """Lower bound of the margin over the whole lower half-plane and all modes."""
        return min(self.margin, self.tail_k_bound, self.tail_rect_bound)

    @property
    def certified(self) -> bool:
        return (self.no_zeros_inside and self.tail_k_bound >= self.kappa_target
                and self.tail_rect_bound >= self.kappa_target)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "epsilon": self.epsilon,
            "margin": self.margin,
            "certified_margin": self.certified_margin,
            "certified": self.certified,
            "argmin": {"k": self.argmin_k, "lambda": self.argmin_tau.real, "zeta": self.argmin_tau.imag},
            "k_max_checked": self.k_max_checked,
            "rectangle": {"Lambda": self.Lambda, "Z": self.Z},
            "per_k_margin": {str(k): v for k, v in self.per_k_margin.items()},
            "tail_certificates": {"k_tail": self.tail_k_bound, "rectangle_exterior": self.tail_rect_bound},
            "winding_numbers": {str(k): v for k, v in self.winding.items()},
            "no_zeros_inside": self.no_zeros_inside,
            "kappa_target": self.kappa_target,
            "epsilon0": self.epsilon0,
        }


def _lattice_norms(k_max: float, d: int) -> list:
    """Distinct norms of nonzero lattice vectors up to ``k_max``."""
    if d == 1:
        return [float(k) for k in range(1, int(math.floor(k_max)) + 1)]
    r = int(math.floor(k_max))
    grids = np.meshgrid(*[np.arange(-r, r + 1)] * d, indexing="ij")
    sq = sum(g.astype(int) ** 2 for g in grids).ravel()
    sq = np.unique(sq[(sq > 0) & (sq <= k_max**2)])
    return [float(math.sqrt(s)) for s in sq]


def _next_norm(k_max: float, d: int) -> float:
    if d == 1:
        return float(math.floor(k_max) + 1)
    return math.sqrt(math.floor(k_max**2) + 1)


def total_variation(kernel: KernelSpec, k, samples: int = 40001) -> float:
    """Total variation of ``t -> K(t, k)`` on ``[0, inf)`` from dense sampling."""
    T = kernel.cutoff(k)
    t = np.linspace(0.0, T, samples)
    vals = kernel(t, k)
    return float(np.sum(np.abs(np.diff(vals))) * (1 + 1e-6) + 2 * kernel.tail_bound(T, k) + 1e-15)


def exterior_bound(kernel: KernelSpec, k, Lambda: float, Z: float) -> float:
    """Upper bound of ``|K~(tau, k)|`` for ``Im tau <= 0`` outside the rectangle.

    Below ``zeta = -Z`` the modulus is at most ``int |K| exp(-Z t) dt``; for
    ``|lambda| > Lambda`` one integration by parts gives
    ``(|K(0)| + TV(K)) / Lambda``.
    """
    if kernel.zero:
        return 0.0
    T = kernel.cutoff(k)
    x, w = _gl_panels(0.0, T, max(64, int(math.ceil(T * knorm(k) * 8 + T * Z))), GL_ORDER)
    below = float(np.sum(w * np.abs(kernel(x, k)) * np.exp(-Z * x))) + kernel.tail_bound(T, k)
    k0 = abs(float(kernel(0.0, k)))
    side = (k0 + total_variation(kernel, k)) / Lambda
    return max(below, side)


def winding_number(kernel: KernelSpec, k, Lambda: float, Z: float, base: int = 400) -> int:
    """Winding number of ``1 - K~`` around the boundary of the rectangle."""
    if kernel.zero:
        return 0
    n = base
    while True:
        lam = np.linspace(-Lambda, Lambda, 2 * n + 1)
        zet = np.linspace(-Z, 0.0, n + 1)
        path = np.concatenate([
            lam + 1j * 0.0,                       # along the real axis, left to right
            Lambda + 1j * zet[::-1][1:],          # down the right side
            lam[::-1][1:] - 1j * Z,               # back along the bottom
            -Lambda + 1j * zet[1:],               # up the left side
        ])
        vals = 1.0 - laplace_kernel(kernel, path, k, tol=1e-8)
        steps = np.angle(vals[1:] / vals[:-1])
        if np.max(np.abs(steps)) < np.pi / 4 or n > 20000:
            return int(round(np.sum(steps) / (2 * np.pi)))
        n *= 2


def _scan_k(kernel, k, lams, zetas, refine_tol, max_refine):
    Lambda, Z = lams[-1], -zetas[0]
    vals = np.abs(1.0 - transform_grid(kernel, k, lams, zetas))
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    best, best_tau = float(vals[i, j]), complex(lams[i], zetas[j])
    dl, dz = lams[1] - lams[0], zetas[1] - zetas[0]
    quiet = 0
    for level in range(max_refine):
        dl, dz = dl / 2, dz / 2
        ll = np.clip(best_tau.real + dl * np.arange(-4, 5), -Lambda, Lambda)
        zz = np.clip(best_tau.imag + dz * np.arange(-4, 5), -Z, 0.0)
        local = np.abs(1.0 - transform_grid(kernel, k, ll, zz))
        a, b = np.unravel_index(np.argmin(local), local.shape)
        new = float(local[a, b])
        improvement = best - new
        if new < best:
            best, best_tau = new, complex(ll[a], zz[b])
        # a flat level can hide a minimum between nodes; need two in a row
        quiet = quiet + 1 if improvement < refine_tol else 0
        if quiet >= 2 and level >= MIN_REFINE_LEVELS:
            break
    return vals, best, best_tau


def penrose_margin(
    kernel: KernelSpec,
    Lambda: float = 40.0,
    Z: float = 20.0,
    k_max: float = 8.0,
    n_lambda: int = 161,
    n_zeta: int = 81,
    kappa_target: float = 0.05,
    refine_tol: float = 1e-4,
    max_refine: int = 30,
    threads: int = 1,
    check_winding: bool = True,
) -> PenroseReport:
    """Scan ``|1 - K~(tau, k)|`` over a rectangle and a range of modes.

    The grid minimum is refined locally until one refinement improves it by
    less than ``refine_tol``.  Two tail certificates bound the margin from
    below outside the scanned set: one for ``|k| > k_max`` from the kernel's
    L1 norm (pointwise non-increasing in ``|k|``), one for the exterior of the
    rectangle.

    Raises
    ------
    CertificateError
        If a tail certificate is below ``kappa_target`` or a winding number
        is nonzero.  The incomplete report is attached as ``err.report``.
    """
    if Lambda <= 0 or Z <= 0 or k_max < 1 or n_lambda < 3 or n_zeta < 3:
        raise ValueError("empty scan region")
    d = kernel.params.d
    norms = _lattice_norms(k_max, d)
    lams = np.linspace(-Lambda, Lambda, n_lambda)
    zetas = np.linspace(-Z, 0.0, n_zeta)

    def work(k):
        return _scan_k(kernel, k, lams, zetas, refine_tol, max_refine)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, norms))
    else:
        results = [work(k) for k in norms]

    per_k = {}
    margin_map = None
    best = (math.inf, None, None)
    for k, (vals, m, tau) in zip(norms, results):
        per_k[k] = m
        margin_map = vals if margin_map is None else np.minimum(margin_map, vals)
        if m < best[0]:
            best = (m, k, tau)

    k_next = _next_norm(k_max, d)
    tail_k = 1.0 - kernel.l1_norm(k_next)
    tail_rect = min(1.0 - exterior_bound(kernel, k, Lambda, Z) for k in norms)
    # a failed tail certificate already decides the verdict, so skip the costly contour
    tails_ok = min(tail_k, tail_rect) >= kappa_target
    winding = {k: winding_number(kernel, k, Lambda, Z) for k in norms} if check_winding and tails_ok else {}

    report = PenroseReport(
        model=kernel.model.value, epsilon=kernel.epsilon, margin=best[0], argmin_k=best[1],
        argmin_tau=best[2], k_max_checked=k_max, Lambda=Lambda, Z=Z, per_k_margin=per_k,
        tail_k_bound=tail_k, tail_rect_bound=tail_rect, winding=winding,
        kappa_target=kappa_target, lams=lams, zetas=zetas, margin_map=margin_map,
    )
    if not report.certified:
        err = CertificateError(
            f"Penrose certificate failed: k-tail {tail_k:.4f}, exterior {tail_rect:.4f}, "
            f"target {kappa_target}, winding {winding}"
        )
        err.report = report
        raise err
    return report


# ---------------------------------------------------------------------------
# epsilon dependence
# ---------------------------------------------------------------------------

def default_samples(k_values: Sequence = (1, 2, 4), Lambda: float = 10.0, Z: float = 5.0,
                    n_lambda: int = 41, n_zeta: int = 11) -> list:
    """A tensor sample of ``(tau, k)`` points in the closed lower half-plane."""
    lams = np.linspace(-Lambda, Lambda, n_lambda)
    zetas = np.linspace(-Z, 0.0, n_zeta)
    return [(complex(l, z), k) for k in k_values for l in lams for z in zetas]


def kernel_distance(epsilon: float, model: Model, samples, params: Optional[PhysicalParams] = None,
                    c_M: Optional[float] = None) -> float:
    """``max |K~_eps(tau, k) - K~_0(tau, k)|`` over a sample of ``(tau, k)`` pairs."""
    params = (params or PhysicalParams()).replace(model=Model(model), epsilon=epsilon)
    if epsilon == 0:
        return 0.0
    kern = KernelSpec(Model(model), params, c_M)
    lim = kern.limit()
    by_k: dict = {}
    for tau, k in samples:
        by_k.setdefault(k, []).append(tau)
    worst = 0.0
    for k, taus in by_k.items():
        taus = _check_tau(np.array(taus))
        diff = laplace_kernel(kern, taus, k) - laplace_kernel(lim, taus, k)
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


@dataclass
class Epsilon0Result:
    epsilon0: float
    kappa_target: float
    kappa0: float
    c0: float
    r2: float
    epsilons: list
    margins: list

    @property
    def predicted(self) -> float:
        """Linear-fit crossing ``(kappa0 - kappa_target) / c0``."""
        return (self.kappa0 - self.kappa_target) / self.c0 if self.c0 > 0 else math.inf

    def to_dict(self) -> dict:
        return {"epsilon0": self.epsilon0, "kappa_target": self.kappa_target, "kappa0": self.kappa0,
                "c0": self.c0, "r2": self.r2, "predicted": self.predicted,
                "epsilons": list(self.epsilons), "margins": list(self.margins)}


def linear_fit(x, y):
    """Least-squares ``y ~ a + b x``; returns ``(a, b, r2)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


def margin_curve(model: Model, epsilons, params: Optional[PhysicalParams] = None,
                 c_M: Optional[float] = None, **scan) -> list:
    """Margins (not certificates) for each epsilon of a grid."""
    params = params or PhysicalParams()
    scan.setdefault("check_winding", False)
    scan.setdefault("kappa_target", 0.0)
    out = []
    for eps in epsilons:
        kern = KernelSpec(Model(model), params.replace(model=Model(model), epsilon=float(eps)), c_M)
        out.append(penrose_margin(kern, **scan).margin)
    return out


def epsilon0_search(model: Model, kappa_target: float, epsilons, params: Optional[PhysicalParams] = None,
                    c_M: Optional[float] = None, margins=None, **scan) -> Epsilon0Result:
    """Largest grid epsilon whose margin, and that of every smaller grid value, reaches ``kappa_target``.

    The grid must start at 0. A linear fit ``margin ~ kappa0 - c0 eps`` is
    reported alongside.
    """
    eps = np.asarray(sorted(float(e) for e in epsilons))
    if eps.size < 2 or eps[0] != 0.0:
        raise ValueError("epsilon grid must contain 0 and at least one positive value")
    if margins is None:
        margins = margin_curve(model, eps, params, c_M, **scan)
    margins = np.asarray(margins, dtype=float)
    kappa0, slope, r2 = linear_fit(eps, margins)
    tol = 1e-12
    if margins[0] < kappa_target - tol:
        raise ValueError(f"no grid epsilon reaches kappa_target = {kappa_target}")
    last = 0
    for i in range(1, eps.size):
        if margins[i] >= kappa_target - tol:
            last = i
        else:
            break
    return Epsilon0Result(float(eps[last]), kappa_target, kappa0, -slope, r2, eps.tolist(), margins.tolist())
