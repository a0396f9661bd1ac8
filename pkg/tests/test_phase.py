import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbx.core import BracketError, DomainError
from sbx.response import Regime
from sbx.phase import (PhaseMethod, classify, delta_r, drive_factor, phase_diagram,
                       t_star_approx, t_star_driven, t_star_exact, t_star_numeric)
from sbx.specfun import bessel_zero


def test_delta_r_unrenormalized():
    assert delta_r(0.0, 1.3, 10.0) == pytest.approx(1.3, rel=1e-15)


def test_delta_r_quarter():
    g = (math.gamma(0.5) * math.cos(math.pi / 4)) ** (2.0 / 3.0)
    assert delta_r(0.25, 1.0, 10.0) == pytest.approx(0.1 ** (1.0 / 3.0) * g, rel=1e-14)
    assert delta_r(0.25, 1.0, 10.0) == pytest.approx(0.5395602646429831, rel=1e-12)


def test_delta_r_monotone():
    a = np.linspace(0.0, 0.4, 41)
    v = [delta_r(x, 1.0, 10.0) for x in a]
    assert np.all(np.diff(v) < 0)


@pytest.mark.parametrize("alpha", [0.5, 0.7, -0.1])
def test_delta_r_domain(alpha):
    with pytest.raises(DomainError):
        delta_r(alpha, 1.0, 10.0)


def test_approx_estimates_agree_weak_coupling():
    est = t_star_approx(0.05, 1.0, 10.0)
    assert abs(est.theta_star / est.weak_coupling - 1) < 0.25


def test_approx_diverges_as_inverse_alpha():
    small = [t_star_approx(a, 1.0, 10.0).theta_star * a for a in (1e-3, 1e-4, 1e-5)]
    assert small[-1] == pytest.approx(1.0, rel=1e-3)
    assert t_star_approx(1e-5, 1.0, 10.0).theta_star > 1e4


def test_approx_finite_strong():
    v = t_star_approx(0.4, 1.0, 10.0).theta_star
    assert 0 < v < 10 and math.isfinite(v)


def test_exact_anchor():
    pt = t_star_numeric(0.5, 1.0, 10.0)
    assert pt.method is PhaseMethod.EXACT_ANCHOR
    assert pt.theta_star == 0.05
    assert t_star_exact(2.0, 10.0) == 0.2


def test_ultrastrong_has_no_crossover():
    pt = t_star_numeric(0.7)
    assert pt.theta_star is None and pt.regime is Regime.INCOHERENT


@pytest.fixture(scope="module")
def diagram():
    with ProcessPoolExecutor() as ex:
        return phase_diagram((0.05, 0.1, 0.2, 0.3, 0.4, 0.45), mapper=ex.map)


def test_numeric_curve_monotone(diagram):
    numeric = [p for p in diagram if p.method is PhaseMethod.NUMERIC_PEAK]
    ts = [p.theta_star for p in numeric]
    assert all(t > 0 for t in ts)
    assert np.all(np.diff(ts) < 0)
    # the anchor closes the curve from below
    assert diagram[-1].theta_star < ts[-1]


def test_numeric_tracks_approx_shape(diagram):
    # same alpha dependence as the closed-form estimate, offset by a constant
    # factor close to pi; checked as a narrow ratio band
    ratios = [t_star_approx(p.alpha, 1.0, 10.0).theta_star / p.theta_star
              for p in diagram if p.method is PhaseMethod.NUMERIC_PEAK and p.alpha <= 0.4]
    assert max(ratios) / min(ratios) < 1.15
    assert 2.8 < np.median(ratios) < 3.5


def test_boundary_separates_regimes(diagram):
    pt = next(p for p in diagram if p.alpha == 0.2)
    assert classify(0.2, 1.1 * pt.theta_star, 1.0, 10.0).regime is Regime.INCOHERENT
    assert classify(0.2, 0.9 * pt.theta_star, 1.0, 10.0).regime is Regime.COHERENT


def test_bad_bracket():
    with pytest.raises(BracketError):
        t_star_numeric(0.2, bracket=(5.0, 10.0))


def test_numeric_domain():
    with pytest.raises(DomainError):
        t_star_numeric(0.0)


def test_drive_factor_cases():
    assert drive_factor(0.2, 0, 0.0) == 1.0
    assert drive_factor(0.2, 0, bessel_zero(0, 1)) < 1e-14
    assert t_star_driven(0.21, 1, 1.0, 2.0) < 2.0
    with pytest.raises(DomainError):
        drive_factor(0.2, -1, 1.0)
    with pytest.raises(DomainError):
        drive_factor(1.0, 0, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.001, 0.999), st.integers(0, 6), st.floats(0.0, 30.0))
def test_drive_never_enhances(alpha, n, ratio):
    assert 0.0 <= drive_factor(alpha, n, ratio) <= 1.0
