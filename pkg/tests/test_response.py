import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbx.bath import tau_env
from sbx.core import DomainError, ModelParams, from_lab_units
from sbx.response import (IncoherentValidityWarning, Regime, ResponseEngine, ResponsePath,
                          peak_analysis, pole_quadratic, spectrum, susceptibility,
                          transmission, weak_coupling_peak)


def dimless(alpha, theta=0.5, **kw):
    return ModelParams.build(delta=1.0, alpha=alpha, omega_c=10.0, theta=theta, **kw)


def test_transmission_without_coupling():
    chi = np.array([1 + 2j, -3j, 0.5])
    assert np.all(transmission(chi, np.array([1.0, 2.0, 3.0]), 0.0) == 1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.02, 0.45), st.floats(0.2, 1.0), st.floats(0.05, 3.0))
def test_absorption_sign(alpha, theta, wp):
    # absorption -Im chi >= 0 at the symmetry point
    p = dimless(alpha, theta)
    chi = ResponseEngine(p, "analytic").point(wp).chi
    assert chi.imag <= 1e-9 * abs(chi)


def test_absorption_sign_numeric():
    wp = np.linspace(0.05, 3.0, 30)
    for a in (0.1, 0.3, 0.7):
        sp = spectrum(wp, dimless(a))
        assert np.all(sp.chi.imag <= 1e-9 * np.abs(sp.chi))


def test_incoherent_limit_close_to_niba():
    p = from_lab_units(delta_ghz=8.0, alpha=0.8, omega_c_ghz=65, t_mk=90)
    tau = tau_env(p.bath)
    errs = []
    for x in (0.05, 0.002):
        wp = x / tau
        a = ResponseEngine(p, "incoherent", max_omega_p=wp).point(wp).chi
        b = ResponseEngine(p, "exact", max_omega_p=wp).point(wp).chi
        errs.append(abs(a - b) / abs(b))
    assert errs[0] < 0.06
    # first-order accurate in omega_p tau_env
    assert errs[1] < 0.15 * errs[0]


def test_incoherent_validity_warning():
    p = dimless(0.8)
    with pytest.warns(IncoherentValidityWarning):
        ResponseEngine(p, "incoherent", max_omega_p=5.0).point(5.0)


def test_weak_coupling_peak():
    p = dimless(0.01)
    pa = peak_analysis(p)
    assert weak_coupling_peak(p) == pytest.approx(pa.omega_star, rel=0.02)


def test_weak_path_guards():
    with pytest.raises(DomainError):
        ResponseEngine(dimless(0.2), "weak")
    with pytest.raises(DomainError):
        ResponseEngine(dimless(0.01, eps0=0.3), "weak")


def test_weak_path_matches_analytic_off_resonance():
    p = dimless(0.005)
    wp = np.concatenate([np.linspace(0.2, 0.6, 5), np.linspace(1.5, 2.5, 5)])
    a = spectrum(wp, p, "weak").chi
    b = spectrum(wp, p, "analytic").chi
    assert np.max(np.abs(a - b) / np.abs(b)) < 0.02


def test_coherent_benchmark():
    pa = peak_analysis(dimless(0.01))
    assert pa.regime is Regime.COHERENT
    assert pa.omega_star == pytest.approx(0.9891, abs=5e-4)
    assert pa.gamma == pytest.approx(0.0191, abs=5e-4)
    assert pa.omega_renorm == pytest.approx(math.sqrt(pa.omega_star ** 2 - pa.gamma ** 2))


def test_incoherent_benchmark():
    pa = peak_analysis(dimless(0.6))
    assert pa.regime is Regime.INCOHERENT
    assert pa.gamma_r > 0


def test_transition_benchmark():
    pa = peak_analysis(dimless(0.3))
    assert abs(pa.omega_star - pa.gamma) / pa.omega_star < 0.5


def test_pole_quadratic_coherent():
    roots = pole_quadratic(dimless(0.01))
    assert roots[0] == pytest.approx(np.conj(roots[1]))
    pa = peak_analysis(dimless(0.01))
    assert abs(roots[0].imag) == pytest.approx(pa.omega_renorm, rel=0.1)
    assert roots[0].real < 0


def test_pole_quadratic_incoherent():
    roots = np.array(pole_quadratic(dimless(0.6)))
    assert np.all(np.abs(roots.imag) < 1e-12)
    assert np.all(roots.real < 0)


def test_pole_quadratic_undamped_limit():
    roots = pole_quadratic(dimless(1e-4))
    assert roots[0] == pytest.approx(1j, abs=2e-2)
    assert roots[1] == pytest.approx(-1j, abs=2e-2)


def test_susceptibility_point_and_spectrum_agree():
    p = dimless(0.2, eps0=0.3)
    pt = susceptibility(0.7, p)
    sp = spectrum([0.5, 0.7, 0.9], p)
    assert sp.chi[1] == pytest.approx(pt.chi, rel=1e-9)
    assert pt.abs_t_sq == pytest.approx(abs(1 - 1j * 0.7 * pt.chi) ** 2)


def test_path_parse():
    assert ResponsePath.parse("Exact") is ResponsePath.EXACT_NIBA
    with pytest.raises(ValueError):
        ResponsePath.parse("nope")
