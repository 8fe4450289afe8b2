"""Decay-rate fits, weighted envelopes and epsilon-continuity studies."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .foundations import Model, PhysicalParams
from .volterra import TimeGrid, density_modes, density_norm

#: Relative growth of the running sup over the trailing half window that
#: still counts as bounded.
BOUNDED_GROWTH = 0.05
MIN_SAMPLES = 10


@dataclass(frozen=True)
class DecayFit:
    t0: float
    t1: float
    value: float
    r2: float
    envelope: float
    kind: str = "algebraic"

    def to_dict(self) -> dict:
        return asdict(self)


def japanese(t):
    """``<t> = sqrt(1 + t**2)``."""
    return np.sqrt(1.0 + np.asarray(t, dtype=float) ** 2)


def _window(t, v, window):
    t = np.asarray(t, dtype=float)
    v = np.abs(np.asarray(v))
    if not np.any(v > 0):
        raise ValueError("degenerate series: all values vanish")
    t0, t1 = (t[0], t[-1]) if window is None else window
    m = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
    if m.sum() < MIN_SAMPLES:
        raise ValueError(f"fit window holds {m.sum()} samples, need {MIN_SAMPLES}")
    if np.any(v[m] <= 0):
        raise ValueError("series must be positive on the fit window")
    return t[m], v[m], float(t0), float(t1)


def _regress(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if ss == 0 else max(0.0, 1.0 - float(np.sum(resid**2) / ss))
    return float(slope), r2


def fit_algebraic_decay(t, values, window=None) -> DecayFit:
    """Sign-flipped slope of ``log|v|`` against ``log<t>`` on ``window``."""
    tw, vw, t0, t1 = _window(t, values, window)
    slope, r2 = _regress(np.log(japanese(tw)), np.log(vw))
    return DecayFit(t0, t1, -slope, r2, float(np.max(vw * japanese(tw) ** (-slope))), "algebraic")


def fit_exponential_rate(t, values, window=None) -> DecayFit:
    """Sign-flipped slope of ``log|v|`` against ``t`` on ``window``."""
    tw, vw, t0, t1 = _window(t, values, window)
    slope, r2 = _regress(tw, np.log(vw))
    return DecayFit(t0, t1, -slope, r2, float(np.max(vw * np.exp(-slope * tw))), "exponential")


@dataclass(frozen=True)
class Envelope:
    sup: float
    bounded: bool
    growth: float

    def to_dict(self) -> dict:
        return asdict(self)


def weight_fn(n: float, epsilon: float = 0.0):
    """``t -> exp(eps t) <t>**n``."""
    return lambda t: np.exp(epsilon * np.asarray(t, dtype=float)) * japanese(t) ** n


def envelope_sup(t, values, weight, threshold: float = BOUNDED_GROWTH) -> Envelope:
    """Sup of ``weight(t) |v(t)|`` and a boundedness verdict.

    The series counts as bounded when its running sup grows by less than
    ``threshold`` (relative) over the trailing half of the time window.
    """
    t = np.asarray(t, dtype=float)
    v = np.abs(np.asarray(values))
    if not np.all(np.isfinite(v)):
        raise ValueError("series must be finite")
    w = weight(t) if callable(weight) else np.asarray(weight, dtype=float)
    run = np.maximum.accumulate(w * v)
    sup = float(run[-1])
    if sup == 0:
        return Envelope(0.0, True, 0.0)
    mid = np.searchsorted(t, 0.5 * (t[0] + t[-1]))
    ref = run[min(mid, len(run) - 1)]
    growth = float(sup / ref - 1.0) if ref > 0 else math.inf
    return Envelope(sup, growth < threshold, growth)


# ---------------------------------------------------------------------------
# velocity-weighted norms
# ---------------------------------------------------------------------------

def weighted_l2_fourier(values, dxi: float) -> float:
    """``|| <v> f ||_{L^2_v}`` from samples of ``f_hat`` on a uniform grid.

    Plancherel gives ``||<v> f||**2 = ||f_hat||**2 + ||d_xi f_hat||**2``; the
    derivative uses fourth-order central differences.
    """
    f = np.asarray(values)
    df = np.gradient(f, dxi, edge_order=2)
    df[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12.0 * dxi)
    return float(np.sqrt(np.sum(np.abs(f) ** 2 + np.abs(df) ** 2) * dxi))


def sobolev_norm(family, n: int, modes=None, extent: float = 200.0, points: int = 400001) -> float:
    """``||h_in||_{L^2_x H^n_v}`` with the ``<xi>**n`` Fourier weight (Plancherel in ``v``).

    The ``xi`` integral runs over ``[-extent, extent]`` by Simpson's rule on
    each active mode.
    """
    xi = np.linspace(-extent, extent, points)
    total = 0.0
    for k in (family.active_modes if modes is None else modes):
        f = np.abs(family.mode(k, xi)) ** 2 * (1.0 + xi**2) ** n
        total += integrate.simpson(f, x=xi)
    return math.sqrt(total)


@dataclass(frozen=True)
class SobolevCheck:
    constant: float
    finite: bool
    running_sup: tuple
    growing: bool

    def to_dict(self) -> dict:
        return asdict(self)


def sobolev_fourier_check(family, n: int, samples) -> SobolevCheck:
    """``sup |h_in(k, xi)| <xi>**n / ||h_in||`` over ``samples`` of ``(k, xi)``.

    ``running_sup`` follows the samples sorted by ``|xi|``; ``growing`` flags a
    sup still rising by more than 5% over the outer half of the sample, which
    signals data outside the index-``n`` space.
    """
    samples = sorted(samples, key=lambda s: abs(s[1]))
    vals = np.array([abs(family.mode(k, x)) * (1.0 + x * x) ** (n / 2.0) for k, x in samples])
    if not np.any(vals > 0):
        return SobolevCheck(0.0, True, tuple(np.zeros(len(vals))), False)
    norm = sobolev_norm(family, n)
    run = np.maximum.accumulate(vals)
    growing = bool(run[-1] > (1.0 + BOUNDED_GROWTH) * run[len(run) // 2])
    const = float(run[-1] / norm) if norm > 0 else math.inf
    return SobolevCheck(const, bool(np.isfinite(const)), tuple(run / norm), growing)


# ---------------------------------------------------------------------------
# epsilon continuity
# ---------------------------------------------------------------------------

@dataclass
class ContinuityStudy:
    model: str
    epsilons: list
    deviations: list
    exponent: float
    r2: float

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self):
        return [{"epsilon": e, "deviation": d} for e, d in zip(self.epsilons, self.deviations)]


def epsilon_continuity_study(model, epsilons: Sequence[float], family, grid: TimeGrid,
                             params: Optional[PhysicalParams] = None, c_M: Optional[float] = None) -> ContinuityStudy:
    """``sup_t | ||rho_eps(t)|| - ||rho_0(t)|| |`` for each ``eps`` and its power law in ``eps``.

    The density comes from the Volterra solver for every active mode.
    """
    model = Model(model)
    base = (params or PhysicalParams()).replace(model=model)
    n_t = grid.N + 1
    ref = density_norm(density_modes(base.replace(epsilon=0.0), family, grid, c_M), n_t)
    devs = []
    for eps in epsilons:
        if eps == 0:
            devs.append(0.0)
            continue
        cur = density_norm(density_modes(base.replace(epsilon=eps), family, grid, c_M), n_t)
        devs.append(float(np.max(np.abs(cur - ref))))
    pos = [(e, d) for e, d in zip(epsilons, devs) if e > 0 and d > 0]
    if len(pos) >= 2:
        x, y = np.log([e for e, _ in pos]), np.log([d for _, d in pos])
        expo, r2 = _regress(x, y)
    else:
        expo, r2 = float("nan"), float("nan")
    return ContinuityStudy(model.value, [float(e) for e in epsilons], devs, expo, r2)


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def write_json(path, obj, header: str = "") -> None:
    payload = {"config_hash": header, **obj} if header else obj
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def write_csv(path, rows: list, header: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")
