import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbx.bath import CorrelationMethod, correlation
from sbx.core import DomainError, ModelParams, QuadratureError, from_lab_units, GHZ
from sbx.kernels import (AnalyticKernels, KernelQuadrature, LocalizationWarning, RatePair,
                         drive_factor, eff_bias, effective_bias, h_pm, kernel_transforms,
                         kernels_analytic, n_pm, rates_fb, w_function)
from sbx.response import spectrum
from sbx.specfun import bessel_zero

EXACT, SCALING, LONG = (CorrelationMethod.EXACT, CorrelationMethod.SCALING_LIMIT,
                        CorrelationMethod.LONG_TIME)


@pytest.fixture
def bench():
    return ModelParams.build(delta=1.0, alpha=0.2, omega_c=10.0, theta=0.5)


# ---------------------------------------------------------------- h+-(t)

def test_drive_factor_off():
    t = np.linspace(0, 10, 11)
    assert np.all(drive_factor(t, 0.0, 3.0) == 1.0)


def test_h_at_zero(bench):
    hp, hm = h_pm(0.0, bench)
    assert hp == pytest.approx(1.0) and hm == 0.0


@given(st.floats(0.01, 30.0))
def test_h_ratio_is_tan(t):
    p = ModelParams.build(delta=1.3, alpha=0.2, omega_c=10.0, theta=0.5, eps_d=2.0, omega_d=3.0)
    hp, hm = h_pm(t, p)
    if abs(hp) > 1e-12:
        assert hm / hp == pytest.approx(math.tan(correlation(t, p.bath).imag), rel=1e-9)


# ---------------------------------------------------------------- transforms

def test_symmetric_point_odd_transforms(bench):
    ks = kernel_transforms(0.3, 0.7, bench)
    assert ks.k_minus_0 == 0.0
    assert ks.h_minus == 0.0


def test_k_plus_against_analytic(bench):
    q = KernelQuadrature(bench, LONG, max_frequency=0.0)
    ana = AnalyticKernels(bench).k_plus(0.0).real
    assert q.k_plus(0.0).real == pytest.approx(ana, rel=1e-6)


def test_all_transforms_against_analytic():
    p = ModelParams.build(delta=1.0, alpha=0.15, omega_c=10.0, theta=0.7, eps0=0.4)
    num = kernel_transforms(0.9j, 0.9, p, LONG, rtol=1e-8)
    ana = kernels_analytic(0.9j, 0.9, p)
    for a, b in [(num.k_plus_at_lambda, ana.k_plus_at_lambda), (num.k_minus_0, ana.k_minus_0),
                 (num.h_plus, ana.h_plus), (num.h_minus, ana.h_minus), (num.gamma_d, ana.gamma_d)]:
        assert abs(a - b) <= 1e-6 * abs(b)


def test_h_plus_static_limit(bench):
    # H+(w_p -> 0) -> (1/2) dK-(0)/d eps0 at eps0 = 0
    q = KernelQuadrature(bench, SCALING, max_frequency=0.02)
    d = 1e-4
    dk = (q.k_minus(0.0, d).real - q.k_minus(0.0, -d).real) / (2 * d)
    hp = q.h_plus(1e-3, 0.0)
    assert abs(hp.real - 0.5 * dk) < 1e-3 * abs(0.5 * dk)
    # the imaginary part is the first-order correction and vanishes linearly
    assert q.h_plus(5e-4, 0.0).imag / hp.imag == pytest.approx(0.5, rel=1e-3)


def test_quadrature_doubling(bench):
    q1 = KernelQuadrature(bench, SCALING, max_frequency=2.0)
    q2 = KernelQuadrature(bench, SCALING, max_frequency=2.0, panel_scale=2.0)
    for f in (lambda q: q.k_plus(0.0), lambda q: q.k_plus(1.2j), lambda q: q.h_plus(1.2)):
        a, b = f(q1), f(q2)
        assert abs(a - b) < 1e-6 * abs(b)


def test_mesh_frequency_guard(bench):
    q = KernelQuadrature(bench, SCALING, max_frequency=1.0)
    with pytest.raises(DomainError):
        q.h_plus(3.0)


def test_unreachable_tolerance(bench):
    q = KernelQuadrature(bench, SCALING, max_frequency=1.0, rtol=1e-16)
    with pytest.raises(QuadratureError) as err:
        q.k_plus(0.0)
    assert err.value.bound is not None


def test_zero_coupling_rejected():
    p = ModelParams.build(delta=1.0, alpha=0.0, omega_c=10.0, theta=0.5)
    with pytest.raises(DomainError):
        KernelQuadrature(p)


# ---------------------------------------------------------------- rates

def test_symmetric_rates(bench):
    r = rates_fb(bench)
    assert r.k_f == pytest.approx(r.k_b, rel=1e-14)
    eb = eff_bias(bench)
    assert eb.eps_eff == 0.0 and eb.p0 == 0.0


def test_detailed_balance_exact(bench):
    p = bench.with_drive(eps0=0.5 * bench.theta)
    r = rates_fb(p, EXACT)
    assert r.k_f / r.k_b == pytest.approx(math.exp(0.5), rel=1e-4)


@pytest.mark.parametrize("x", [-2.0, -0.7, 0.3, 1.0, 2.0])
def test_eps_eff_equals_eps0(bench, x):
    e0 = x * bench.theta
    eb = eff_bias(bench.with_drive(eps0=e0), EXACT)
    assert eb.eps_eff == pytest.approx(e0, rel=1e-4)
    assert eb.p0 == pytest.approx(math.tanh(e0 / (2 * bench.theta)), abs=1e-10)


def test_p0_cross_check():
    eb = effective_bias(RatePair(3.0, 1.0), 0.5)
    assert eb.p0 == pytest.approx(0.5, abs=1e-15)
    assert math.tanh(eb.eps_eff / 1.0) == pytest.approx(0.5, abs=1e-12)


def test_localization_warning():
    with pytest.warns(LocalizationWarning):
        eb = effective_bias(RatePair(1.0, 0.0), 0.5)
    assert eb.p0 == 1.0 and eb.eps_eff == math.inf


@pytest.fixture
def device2():
    return from_lab_units(delta_ghz=7.23, alpha=0.21, omega_c_ghz=65, t_mk=175, n_factor=1.1)


def test_cdt_suppression():
    # Device II bath and drive frequency, cold enough that omega_d tau_env >> 1
    p = from_lab_units(delta_ghz=7.23, alpha=0.21, omega_c_ghz=65, t_mk=20)
    wd = 9 * GHZ
    k0 = KernelQuadrature(p, SCALING, 0.0).k_plus(0.0).real
    pd = p.with_drive(eps_d=bessel_zero(0, 1) * wd, omega_d=wd)
    k1 = KernelQuadrature(pd, SCALING, 0.0).k_plus(0.0).real
    assert k0 / k1 > 10.0


def test_population_inversion(device2):
    wd = 9 * GHZ
    p = device2.with_drive(eps0=wd, eps_d=3.0 * wd, omega_d=wd)
    assert bessel_zero(0, 1) < 3.0 < bessel_zero(1, 1)
    assert eff_bias(p, EXACT).p0 < 0


# ---------------------------------------------------------------- analytic path

@settings(max_examples=50)
@given(st.floats(-50, 50), st.floats(0.01, 0.49), st.floats(0.05, 2.0))
def test_w_conjugate(x, alpha, kappa):
    assert w_function(-x, alpha, kappa) == pytest.approx(np.conj(w_function(x, alpha, kappa)),
                                                         rel=1e-12, abs=1e-300)


def test_n_plus_small_alpha():
    p = ModelParams.build(delta=1.0, alpha=1e-4, omega_c=10.0, theta=0.5)
    n_plus, _ = n_pm(p)
    assert n_plus == pytest.approx(0.5 * p.bath.kappa, rel=1e-3)


def test_analytic_domain():
    with pytest.raises(DomainError):
        n_pm(ModelParams.build(delta=1.0, alpha=0.5, omega_c=10.0, theta=0.5))
    with pytest.raises(DomainError):
        AnalyticKernels(ModelParams.build(delta=1.0, alpha=0.2, omega_c=10.0, theta=0.5,
                                          eps_d=1.0, omega_d=2.0))


def test_analytic_vs_numeric_transmission(bench):
    p = bench.with_n_factor(1.0)
    wp = np.linspace(0.1, 2.0, 39)
    ta = np.abs(spectrum(wp, p, path="analytic").transmission)
    # the closed forms are exact for the long-time Q ...
    tl = np.abs(spectrum(wp, p, path="exact", method=LONG).transmission)
    assert np.max(np.abs(tl - ta) / ta) < 1e-8
    # ... and approximate the scaling-limit kernels at the few-percent level
    ts = np.abs(spectrum(wp, p, path="exact", method=SCALING).transmission)
    assert np.max(np.abs(ts - ta) / ta) < 0.03


def test_analytic_rates_detailed_balance():
    p = ModelParams.build(delta=1.0, alpha=0.2, omega_c=10.0, theta=0.5)
    r = AnalyticKernels(p).rates(0.3)
    assert r.k_f / r.k_b == pytest.approx(math.exp(0.3 / 0.5), rel=1e-12)
