import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from landau_eps.foundations import (
    FiniteSobolevTail,
    GaussianHermite,
    Model,
    PhysicalParams,
    chi,
    coulomb_w,
    fp_damping_exponent,
    initial_mode,
    maxwellian_profile,
    psi,
)

mp.mp.dps = 40


def chi_mp(t, eps):
    t, eps = mp.mpf(t), mp.mpf(eps)
    return -mp.expm1(-eps * t) / eps


def psi_mp(t, eps):
    return mp.quad(lambda s: chi_mp(s, eps) ** 2, [0, t])


# --- parameters ---------------------------------------------------------------

def test_params_defaults_and_roundtrip():
    p = PhysicalParams()
    assert p.d == 1 and p.model is Model.LINEAR_BOLTZMANN
    q = p.replace(model="fokker_planck", epsilon=0.1)
    assert q.model is Model.FOKKER_PLANCK and q.to_dict()["epsilon"] == 0.1


@pytest.mark.parametrize("bad", [dict(epsilon=-0.1), dict(e0=0.0), dict(ell=0.5), dict(n=2), dict(d=0)])
def test_params_reject_invalid(bad):
    with pytest.raises(ValueError):
        PhysicalParams(**bad)


# --- Maxwellian ---------------------------------------------------------------

def test_maxwellian_values():
    assert maxwellian_profile(0.0) == pytest.approx(0.3989422804014327, abs=1e-15)
    assert maxwellian_profile(1.0) == pytest.approx(float(mp.exp(-0.5) / mp.sqrt(2 * mp.pi)), rel=1e-14)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_maxwellian_unit_mass(d):
    one_d, _ = integrate.quad(lambda v: float(maxwellian_profile(v)), -np.inf, np.inf, epsabs=1e-14)
    # the profile factorizes over coordinates
    assert one_d**d == pytest.approx(1.0, abs=1e-12)
    x = np.zeros((1, d))
    assert maxwellian_profile(x, d)[0] == pytest.approx((2 * np.pi) ** (-d / 2))


def test_maxwellian_is_its_own_fourier_transform():
    L, n = 40.0, 4096
    v = np.linspace(-L / 2, L / 2, n, endpoint=False)
    dv = v[1] - v[0]
    xi = 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(n, d=dv))
    f = maxwellian_profile(v)
    # symmetric convention: (2 pi)^(-1/2) int f(v) exp(-i v xi) dv
    fhat = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(f))) * dv / np.sqrt(2 * np.pi)
    assert np.max(np.abs(fhat - maxwellian_profile(xi))) < 1e-8


# --- chi and psi ----------------------------------------------------------------

def test_chi_examples():
    assert chi(5.0, 0.0) == 5.0
    assert chi(1.0, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-15)
    ref = float(chi_mp(1, mp.mpf("1e-12")))
    assert abs(chi(1.0, 1e-12) - ref) / ref < 1e-15


@pytest.mark.parametrize("eps", [1e-9, 1e-6, 1e-4 * 0.999, 1e-4 * 1.001, 1e-2, 0.3, 2.0])
@pytest.mark.parametrize("t", [0.01, 1.0, 7.5])
def test_chi_matches_extended_precision(eps, t):
    ref = float(chi_mp(t, eps))
    assert abs(float(chi(t, eps)) - ref) <= 1e-13 * ref


@pytest.mark.parametrize("eps", [1e-8, 1e-5, 1e-3, 0.05, 0.2, 0.49, 0.51, 1.0])
@pytest.mark.parametrize("t", [0.3, 1.0, 4.0])
def test_psi_matches_extended_precision(eps, t):
    ref = float(psi_mp(t, eps))
    assert abs(float(psi(t, eps)) - ref) <= 1e-12 * ref


def test_psi_examples():
    assert psi(0.0, 0.3) == 0.0
    assert psi(2.0, 0.0) == pytest.approx(8 / 3, abs=1e-10)
    assert psi(2.0, 1e-9) == pytest.approx(8 / 3, abs=1e-8)
    quad, _ = integrate.quad(lambda s: float(chi(s, 0.5)) ** 2, 0, 3, epsabs=1e-13, epsrel=1e-13)
    assert psi(3.0, 0.5) == pytest.approx(quad, abs=1e-10)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        chi(-1.0, 0.1)
    with pytest.raises(ValueError):
        psi(-1.0, 0.1)
    with pytest.raises(ValueError):
        fp_damping_exponent(-1.0, 0.0, 1, 0.1)


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 200), eps=st.floats(0, 5))
def test_chi_elementary_bounds(t, eps):
    c = float(chi(t, eps))
    assert c <= t * (1 + 1e-15)
    assert t - c <= eps * t * t / 2 * (1 + 1e-12) + 4 * np.finfo(float).eps * t


@settings(max_examples=200, deadline=None)
@given(eps=st.floats(1e-3, 2), frac=st.floats(0, 1))
def test_chi_lower_bound_on_collisional_window(eps, frac):
    t = frac * 3 / eps
    assert float(chi(t, eps)) >= math.exp(-3) * t * (1 - 1e-14)


@pytest.mark.parametrize("eps", [1e-3, 0.1, 0.5, 2.0])
@pytest.mark.parametrize("t", [0.5, 2.0, 6.0])
def test_psi_derivative_is_chi_squared(eps, t):
    h = 1e-5 * t
    fd = (psi(t + h, eps) - psi(t - h, eps)) / (2 * h)
    assert fd == pytest.approx(float(chi(t, eps)) ** 2, rel=1e-6)


# --- damping exponent -----------------------------------------------------------

def test_damping_exponent_examples():
    assert fp_damping_exponent(3.0, 2.0, 1, 0.0) == 0.0
    assert fp_damping_exponent(2.5, 0.0, 2, 0.2) == pytest.approx(0.2 * 4 * float(psi(2.5, 0.2)), rel=1e-12)
    eps = 0.3
    quad, _ = integrate.quad(lambda s: eps * (math.exp(-eps * s) * 2 + float(chi(s, eps))) ** 2, 0, 4,
                             epsabs=1e-13, epsrel=1e-13)
    assert fp_damping_exponent(4.0, 2.0, 1, eps) == pytest.approx(quad, abs=1e-9)


def test_damping_exponent_two_dimensional():
    eps, t, xi, k = 0.2, 3.0, np.array([0.5, -1.0]), np.array([1.0, 2.0])
    quad, _ = integrate.quad(lambda s: eps * np.sum((np.exp(-eps * s) * xi + float(chi(s, eps)) * k) ** 2), 0, t,
                             epsabs=1e-13)
    assert fp_damping_exponent(t, xi, k, eps, d=2) == pytest.approx(quad, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(xi=st.floats(-10, 10), k=st.integers(-5, 5), eps=st.floats(1e-3, 1.0))
def test_damping_exponent_nonnegative_and_monotone(xi, k, eps):
    t = np.linspace(0, 20, 201)
    D = fp_damping_exponent(t, xi, k, eps)
    assert np.all(D >= -1e-12)
    assert np.all(np.diff(D) >= -1e-10 * np.maximum(1, D[1:]))


# --- Coulomb ------------------------------------------------------------------

def test_coulomb():
    assert coulomb_w(1, 1.0) == 1.0
    assert coulomb_w((3, 4), 1.0) == pytest.approx(0.04)
    assert coulomb_w(2, 2.5) == pytest.approx(0.625)
    with pytest.raises(ValueError):
        coulomb_w(0)


# --- initial data ---------------------------------------------------------------

def test_initial_data_mean_zero():
    for fam in (GaussianHermite(amplitudes={0: 1.0, 1: 1.0}), FiniteSobolevTail(amplitudes={0: 2.0, 1: 1.0})):
        assert initial_mode(fam, 0, 0.0) == 0


def test_gaussian_hermite_definition():
    fam = GaussianHermite(amplitudes={1: 1.0})
    assert initial_mode(fam, 1, 0.0) == 1.0
    assert initial_mode(fam, 1, 2.0) == pytest.approx(math.exp(-2.0))
    assert initial_mode(fam, 3, 0.0) == 0.0
    with pytest.raises(ValueError):
        GaussianHermite(amplitudes={0: 1.0}, zero_mode_poly=(1.0,))


def test_finite_sobolev_tail_rate():
    fam = FiniteSobolevTail(n_decl=4)
    xi = np.linspace(10, 100, 200)
    scaled = np.abs(fam.mode(1, xi)) * (1 + xi**2) ** 2.5
    assert scaled.max() / scaled.min() < 1.05


def test_families_serialize():
    assert GaussianHermite().to_dict()["kind"] == "gaussian_hermite"
    assert FiniteSobolevTail().to_dict()["n_decl"] == 4
