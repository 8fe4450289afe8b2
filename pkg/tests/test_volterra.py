import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landau_eps.foundations import (
    FiniteSobolevTail,
    GaussianHermite,
    Model,
    PhysicalParams,
    chi,
    fp_damping_exponent,
    initial_mode,
    psi,
)
from landau_eps.kernels import KernelSpec
from landau_eps.volterra import (
    ModeTrajectory,
    StepSizeError,
    TimeGrid,
    density_mode,
    density_modes,
    density_norm,
    solve_volterra,
    source_fp,
    source_lb,
    weighted_sup_ratio,
)

FAM = GaussianHermite(amplitudes={1: 1.0})


def test_time_grid():
    g = TimeGrid(2.0, 4)
    assert g.dt == 0.5 and g.times.tolist() == [0, 0.5, 1, 1.5, 2]
    assert TimeGrid.from_dt(40.0, 0.01).N == 4000
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1)
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 10)


def test_zero_kernel_returns_source():
    g = TimeGrid(5.0, 50)
    src = np.sin(g.times) + 1j * g.times
    u = solve_volterra(np.zeros(51), src, g).values
    assert np.array_equal(u, src)


@pytest.mark.parametrize("c", [1.0, -0.7])
def test_constant_kernel_second_order(c):
    errs = []
    for N in (50, 100, 200):
        g = TimeGrid(5.0, N)
        u = solve_volterra(np.full(N + 1, c), np.ones(N + 1), g).values
        errs.append(np.max(np.abs(u - np.exp(c * g.times)) / np.exp(c * g.times)))
    ratios = np.array(errs[:-1]) / errs[1:]
    assert np.all(ratios > 3.8) and np.all(ratios < 4.2)


def test_manufactured_solution_order():
    errs = []
    for dt in (0.1, 0.05, 0.025):
        g = TimeGrid.from_dt(10.0, dt)
        t = g.times
        src = np.cos(t) - 0.5 * (np.cos(t) + np.sin(t) - np.exp(-t))
        errs.append(np.max(np.abs(solve_volterra(lambda s: np.exp(-s), src, g).values - np.cos(t))))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders >= 1.9)


def test_step_size_guard():
    g = TimeGrid(1.0, 10)
    with pytest.raises(StepSizeError):
        solve_volterra(np.full(11, 2.0 / g.dt), np.ones(11), g)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        solve_volterra(np.zeros(5), np.ones(11), TimeGrid(1.0, 10))


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_linearity(a, b):
    g = TimeGrid(10.0, 200)
    kern = KernelSpec(Model.COLLISIONLESS, PhysicalParams())
    s1, s2 = np.exp(-g.times), np.cos(3 * g.times)
    lhs = solve_volterra(kern, a * s1 + b * s2, g, 1).values
    rhs = a * solve_volterra(kern, s1, g, 1).values + b * solve_volterra(kern, s2, g, 1).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + abs(a) + abs(b))


@pytest.mark.parametrize("model", [Model.LINEAR_BOLTZMANN, Model.FOKKER_PLANCK])
def test_refinement_cauchy(model):
    p = PhysicalParams(model=model, epsilon=0.05)
    diffs = []
    for N in (200, 400, 800):
        a = density_mode(p, FAM, 1, TimeGrid(20.0, N)).rho
        b = density_mode(p, FAM, 1, TimeGrid(20.0, 2 * N)).rho[::2]
        diffs.append(np.max(np.abs(a - b)))
    assert np.all(np.log2(np.array(diffs[:-1]) / diffs[1:]) > 1.9)


# --- sources ----------------------------------------------------------------------------

def test_source_lb():
    p = PhysicalParams(epsilon=0.1)
    assert source_lb(FAM, 1, 0.0, p) == initial_mode(FAM, 1, 0.0)
    assert source_lb(FAM, 1, 2.0, p) == pytest.approx(math.exp(-0.2) * math.exp(-2.0), rel=1e-14)
    t = np.linspace(0, 5, 11)
    assert np.allclose(source_lb(FAM, 1, t, p.replace(epsilon=0.0)), FAM.mode(1, t), rtol=0, atol=0)


def test_source_fp():
    eps, t, k = 0.2, 5.0, 1
    p = PhysicalParams(model="fokker_planck", epsilon=eps)
    assert source_fp(FAM, k, 0.0, p) == initial_mode(FAM, k, 0.0)
    c = float(chi(t, eps))
    oracle = math.exp(eps * t) * math.exp(-eps * float(psi(t, eps))) * FAM.mode(k, c)
    assert source_fp(FAM, k, t, p) == pytest.approx(oracle, rel=1e-12)
    via_damping = math.exp(eps * t) * math.exp(-float(fp_damping_exponent(t, 0.0, k, eps))) * FAM.mode(k, c)
    assert source_fp(FAM, k, t, p) == pytest.approx(via_damping, rel=1e-12)


# --- trajectories ----------------------------------------------------------------------

def test_fp_trajectory_gauge():
    p = PhysicalParams(model="fokker_planck", epsilon=0.1)
    tr = density_mode(p, FAM, 1, TimeGrid(10.0, 1000))
    assert np.allclose(tr.rho, tr.values * np.exp(-0.1 * tr.times))
    assert tr.model is Model.FOKKER_PLANCK


def test_trajectory_rejects_bad_values():
    with pytest.raises(FloatingPointError):
        ModeTrajectory(1, np.zeros(2), np.array([0, np.nan]))
    with pytest.raises(ValueError):
        ModeTrajectory(1, np.zeros(2), np.zeros(3))


def test_trajectory_csv(tmp_path):
    tr = density_mode(PhysicalParams(), FAM, 1, TimeGrid(1.0, 10))
    path = tmp_path / "mode.csv"
    tr.to_csv(path, header="config_hash=abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_hash=abc" and lines[1] == "# t,re,im,abs"
    data = np.loadtxt(path, delimiter=",")
    assert data.shape == (11, 4)


def test_density_modes_skip_zero_mode():
    fam = GaussianHermite(amplitudes={0: 1.0, 1: 1.0, -1: 1.0})
    out = density_modes(PhysicalParams(), fam, TimeGrid(2.0, 20))
    assert sorted(out) == [-1, 1]
    nrm = density_norm(out, 21)
    assert nrm[0] == pytest.approx(math.sqrt(2))


def test_amplitude_rescales_density():
    g = TimeGrid(5.0, 500)
    a = density_mode(PhysicalParams(), FAM, 1, g)
    b = density_mode(PhysicalParams(), FAM, 1, g, c_M=1.0)
    assert b.c_norm == pytest.approx(math.sqrt(2 * math.pi))
    assert not np.allclose(a.rho, b.rho)


def test_weighted_sup_ratio_is_moderate():
    fam = FiniteSobolevTail(amplitudes={1: 1.0}, n_decl=4)
    tr = density_mode(PhysicalParams(epsilon=0.02), fam, 1, TimeGrid(40.0, 4000))
    ratio = weighted_sup_ratio(tr, fam, 4)
    assert 0 < ratio < 5
