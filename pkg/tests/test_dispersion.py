import math

import numpy as np
import pytest
from scipy import integrate

from landau_eps.dispersion import (
    CertificateError,
    default_samples,
    dispersion_L,
    epsilon0_search,
    exterior_bound,
    kernel_distance,
    laplace_kernel,
    linear_fit,
    penrose_margin,
    transform_grid,
    winding_number,
)
from landau_eps.foundations import Model, PhysicalParams
from landau_eps.kernels import KernelSpec

CM = (2 * math.pi) ** -0.5


def quad_transform(kern, tau, k):
    """Independent oracle: adaptive Gauss-Kronrod on real and imaginary parts."""
    T = kern.cutoff(k, 1e-16)
    f = lambda t: kern(t, k) * np.exp(-1j * tau * t)
    re, _ = integrate.quad(lambda t: float(np.real(f(t))), 0, T, limit=500, epsabs=1e-13, epsrel=1e-13)
    im, _ = integrate.quad(lambda t: float(np.imag(f(t))), 0, T, limit=500, epsabs=1e-13, epsrel=1e-13)
    return re + 1j * im


@pytest.fixture(scope="module")
def collisionless():
    return KernelSpec(Model.COLLISIONLESS, PhysicalParams())


def test_zero_kernel_transform_vanishes():
    z = KernelSpec(Model.COLLISIONLESS, PhysicalParams(), zero=True)
    assert laplace_kernel(z, 1.0 - 1j, 1) == 0


def test_deep_lower_half_plane_decays(collisionless):
    # K vanishes linearly at t = 0, so |K~(i zeta)| ~ c_M / zeta**2 rather than exponentially small
    vals = [abs(laplace_kernel(collisionless, 1j * z, 1)) for z in (-12.5, -25.0, -50.0)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] == pytest.approx(abs(quad_transform(collisionless, -50j, 1)), abs=1e-12)
    assert vals[2] * 50.0**2 / CM == pytest.approx(1.0, abs=3 / 50.0**2)


def test_transform_at_origin(collisionless):
    # int_0^inf -t exp(-t^2/2) c_M dt = -c_M
    val = laplace_kernel(collisionless, 0.0, 1)
    assert val == pytest.approx(-CM, abs=1e-12)
    assert abs(val - quad_transform(collisionless, 0.0, 1)) < 1e-10


@pytest.mark.parametrize("model, eps", [(Model.LINEAR_BOLTZMANN, 0.1), (Model.FOKKER_PLANCK, 0.1), (Model.COLLISIONLESS, 0.0)])
@pytest.mark.parametrize("tau", [0.7, -2.2 - 0.3j, 12.0 - 4j, -35.0])
def test_transform_matches_quadrature_oracle(model, eps, tau):
    kern = KernelSpec(model, PhysicalParams(model=model, epsilon=eps))
    for k in (1, 3):
        val, err = laplace_kernel(kern, tau, k, return_error=True)
        assert err <= 1e-9
        assert abs(val - quad_transform(kern, tau, k)) < 1e-9


def test_transform_rejects_upper_half_plane(collisionless):
    with pytest.raises(ValueError):
        laplace_kernel(collisionless, 1 + 0.5j, 1)


def test_grid_transform_agrees_with_pointwise(collisionless):
    lams, zetas = np.linspace(-5, 5, 7), np.linspace(-3, 0, 4)
    g = transform_grid(collisionless, 2, lams, zetas)
    p = laplace_kernel(collisionless, lams[:, None] + 1j * zetas[None, :], 2)
    assert np.max(np.abs(g - p)) < 1e-10


def test_dispersion_function_identities():
    p = PhysicalParams()
    kern = KernelSpec(Model.COLLISIONLESS, p)
    assert dispersion_L(1, 0.0, p) == pytest.approx(laplace_kernel(kern, 0.0, 1), abs=1e-9)
    small = dispersion_L(1, -0.3 + 0.2j, p.replace(e0=1e-3))
    assert small / dispersion_L(1, -0.3 + 0.2j, p) == pytest.approx(1e-3, rel=1e-12)
    ref, _ = integrate.quad(lambda t: -math.exp(-t) * CM * t * math.exp(-t * t / 2), 0, np.inf, epsabs=1e-14)
    assert dispersion_L(1, -1.0, p) == pytest.approx(ref, abs=1e-10)
    with pytest.raises(ValueError):
        dispersion_L(1, 2.0, p, lambda_dagger=1.0)


def test_dispersion_function_matches_transform_on_sample(collisionless):
    p = PhysicalParams()
    rng = np.random.default_rng(0)
    lam = rng.uniform(-10, 10, 20)
    zeta = rng.uniform(-5, 0, 20)
    for k in (1, 2):
        tau = lam + 1j * zeta
        lhs = laplace_kernel(collisionless, tau, k)
        rhs = dispersion_L(k, (zeta + 1j * lam) / k, p)
        assert np.max(np.abs(lhs - rhs)) < 1e-9


# --- Penrose ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def lb0_report():
    return penrose_margin(KernelSpec(Model.LINEAR_BOLTZMANN, PhysicalParams()))


def test_collisionless_margin_positive_at_unit_mode(lb0_report):
    r = lb0_report
    assert r.certified and r.no_zeros_inside
    assert 0.05 < r.margin < 1
    assert r.argmin_k == 1
    assert r.certified_margin == pytest.approx(r.margin)
    d = r.to_dict()
    assert d["argmin"]["k"] == 1 and d["tail_certificates"]["k_tail"] > 0.9


def test_margin_respects_l1_sanity_bound(lb0_report):
    kern = KernelSpec(Model.LINEAR_BOLTZMANN, PhysicalParams())
    for k, m in lb0_report.per_k_margin.items():
        assert m >= 1 - kern.l1_norm(k) - 1e-12


def test_margin_stable_under_grid_refinement(lb0_report):
    kern = KernelSpec(Model.LINEAR_BOLTZMANN, PhysicalParams())
    fine = penrose_margin(kern, n_lambda=321, n_zeta=161, check_winding=False)
    assert abs(fine.margin - lb0_report.margin) < 1e-3


def test_zero_kernel_margin_is_one():
    r = penrose_margin(KernelSpec(Model.LINEAR_BOLTZMANN, PhysicalParams(), zero=True), n_lambda=21, n_zeta=11)
    assert r.margin == 1.0 and r.certified


def test_gain_only_kernel_margin():
    kern = KernelSpec(Model.LINEAR_BOLTZMANN, PhysicalParams(epsilon=0.1), part="K0")
    r = penrose_margin(kern, n_lambda=81, n_zeta=41)
    assert r.margin >= 0.9


def test_certificate_failure_is_reported():
    # a huge coupling makes the L1 tail certificate impossible
    kern = KernelSpec(Model.COLLISIONLESS, PhysicalParams(e0=200.0))
    with pytest.raises(CertificateError) as info:
        penrose_margin(kern, k_max=2, n_lambda=21, n_zeta=11, check_winding=False)
    assert info.value.report.tail_k_bound < 0.05


def test_winding_and_exterior(collisionless):
    assert winding_number(collisionless, 1, 40.0, 20.0) == 0
    assert exterior_bound(collisionless, 1, 40.0, 20.0) < 0.05


def test_fp_margin_decreases_with_epsilon():
    margins = []
    for eps in (0.0, 0.05, 0.1):
        kern = KernelSpec(Model.FOKKER_PLANCK, PhysicalParams(model="fokker_planck", epsilon=eps))
        margins.append(penrose_margin(kern, check_winding=False).margin)
    assert margins[0] >= margins[1] >= margins[2]


# --- kernel distance and epsilon0 ---------------------------------------------------

@pytest.mark.parametrize("model", [Model.LINEAR_BOLTZMANN, Model.FOKKER_PLANCK])
def test_kernel_distance_linear(model):
    s = default_samples()
    assert kernel_distance(0.0, model, s) == 0.0
    d = [kernel_distance(e, model, s) for e in (0.01, 0.02, 0.04)]
    for a, b in zip(d, d[1:]):
        assert 1.5 <= b / a <= 2.5


@pytest.mark.parametrize("model", [Model.LINEAR_BOLTZMANN, Model.FOKKER_PLANCK])
def test_kernel_distance_decreases_with_mode(model):
    s1 = default_samples(k_values=(1,))
    s4 = default_samples(k_values=(4,))
    assert kernel_distance(0.05, model, s4) <= kernel_distance(0.05, model, s1)


def test_linear_fit_exact():
    a, b, r2 = linear_fit([0, 1, 2], [1, 3, 5])
    assert (a, b, r2) == pytest.approx((1, 2, 1))


def test_epsilon0_search_synthetic_curve():
    eps = np.linspace(0, 1, 21)
    margins = 0.9 - 0.6 * eps
    res = epsilon0_search(Model.FOKKER_PLANCK, 0.45, eps, margins=margins)
    assert res.kappa0 == pytest.approx(0.9) and res.c0 == pytest.approx(0.6)
    assert abs(res.epsilon0 - res.predicted) <= 0.25 * res.predicted
    assert epsilon0_search(Model.FOKKER_PLANCK, 0.9, eps, margins=margins).epsilon0 == 0.0
    with pytest.raises(ValueError):
        epsilon0_search(Model.FOKKER_PLANCK, 0.95, eps, margins=margins)
    with pytest.raises(ValueError):
        epsilon0_search(Model.FOKKER_PLANCK, 0.5, [0.1, 0.2], margins=[0.9, 0.8])


def test_epsilon0_search_fokker_planck():
    grid = [0.0, 0.05, 0.1]
    scan = dict(n_lambda=81, n_zeta=41)
    res = epsilon0_search(Model.FOKKER_PLANCK, 0.0, grid, **scan)
    assert res.c0 > 0
    at_zero = epsilon0_search(Model.FOKKER_PLANCK, res.margins[0], grid, margins=res.margins)
    assert at_zero.epsilon0 == 0.0
    mid = 0.5 * (res.margins[1] + res.margins[2])
    assert epsilon0_search(Model.FOKKER_PLANCK, mid, grid, margins=res.margins).epsilon0 == 0.05
