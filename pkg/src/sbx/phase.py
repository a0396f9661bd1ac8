"""Coherent/incoherent crossover: renormalized splitting and T*(alpha)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from .bath import CorrelationMethod
from .core import BracketError, DomainError, ModelParams, ValidationError
from .response import PeakAnalysis, Regime, ResponsePath, peak_analysis
from .specfun import bessel_j


class PhaseMethod(enum.Enum):
    NUMERIC_PEAK = "numeric_peak"
    APPROX_FORMULA = "approx_formula"
    EXACT_ANCHOR = "exact_anchor"
    INCOHERENT_ONLY = "incoherent_only"


@dataclass(frozen=True)
class PhasePoint:
    alpha: float
    theta_star: float | None
    method: PhaseMethod
    omega_star: float | None = None
    gamma: float | None = None
    regime: Regime | None = None


class TStarEstimate(NamedTuple):
    theta_star: float
    weak_coupling: float


def _check_alpha(alpha, upper=0.5):
    if not 0.0 <= alpha < upper:
        raise DomainError(f"alpha must lie in [0, {upper}), got {alpha}")


def delta_r(alpha: float, delta: float, omega_c: float) -> float:
    """Renormalized splitting Delta (Delta/omega_c)^(alpha/(1-alpha)) g(alpha)."""
    _check_alpha(alpha)
    if delta <= 0 or omega_c <= 0:
        raise ValidationError("delta and omega_c must be > 0")
    g = (math.gamma(1.0 - 2.0 * alpha) * math.cos(math.pi * alpha)) ** (0.5 / (1.0 - alpha))
    return delta * (delta / omega_c) ** (alpha / (1.0 - alpha)) * g


def t_star_approx(alpha: float, delta: float, omega_c: float) -> TStarEstimate:
    """Approximate crossover thermal frequency and its alpha << 1 form Delta_r/alpha."""
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"t_star_approx needs 0 < alpha < 0.5, got {alpha}")
    dr = delta_r(alpha, delta, omega_c)
    ratio = math.gamma(alpha) / (alpha * math.gamma(1.0 - alpha))
    return TStarEstimate(dr * ratio ** (0.5 / (1.0 - alpha)), dr / alpha)


def t_star_exact(delta: float, omega_c: float) -> float:
    """Crossover at alpha = 1/2: theta* = Delta^2 / (2 omega_c)."""
    return delta * delta / (2.0 * omega_c)


def classify(alpha, theta, delta, omega_c, method=CorrelationMethod.SCALING_LIMIT,
             path=ResponsePath.EXACT_NIBA) -> PeakAnalysis:
    params = ModelParams.build(delta=delta, alpha=alpha, omega_c=omega_c, theta=theta)
    return peak_analysis(params, path=path, method=method)


def t_star_numeric(alpha: float, delta: float = 1.0, omega_c: float = 10.0,
                   rtol=1e-3, method=CorrelationMethod.SCALING_LIMIT,
                   bracket=None) -> PhasePoint:
    """Crossover temperature by bisection in theta on the sign of omega* - gamma.

    alpha = 1/2 returns the exact anchor; 1/2 < alpha < 1 is incoherent at any
    temperature and carries no theta*.
    """
    if alpha == 0.5:
        return PhasePoint(alpha, t_star_exact(delta, omega_c), PhaseMethod.EXACT_ANCHOR)
    if 0.5 < alpha < 1.0:
        return PhasePoint(alpha, None, PhaseMethod.INCOHERENT_ONLY, regime=Regime.INCOHERENT)
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"t_star_numeric needs 0 < alpha < 1, got {alpha}")

    def coherent(theta):
        pa = classify(alpha, theta, delta, omega_c, method)
        return pa.regime is Regime.COHERENT, pa

    if bracket is None:
        guess = t_star_approx(alpha, delta, omega_c).theta_star
        lo, hi = 0.5 * guess, 2.0 * guess
        c_lo, _ = coherent(lo)
        # close to alpha = 1/2 the NIBA peak criterion has no coherent window;
        # give up after a few halvings instead of chasing theta -> 0
        for _ in range(5):
            if c_lo:
                break
            lo *= 0.5
            c_lo, _ = coherent(lo)
        c_hi, _ = coherent(hi)
        for _ in range(8):
            if not c_hi:
                break
            hi *= 2.0
            c_hi, _ = coherent(hi)
        if not c_lo or c_hi:
            raise BracketError(f"no coherent/incoherent sign change found for alpha = {alpha}")
    else:
        lo, hi = bracket
        if not coherent(lo)[0] or coherent(hi)[0]:
            raise BracketError(f"bracket {bracket!r} does not straddle the crossover")

    last = None
    while hi - lo > rtol * lo:
        mid = math.sqrt(lo * hi)
        c, pa = coherent(mid)
        last = pa
        if c:
            lo = mid
        else:
            hi = mid
    theta_star = math.sqrt(lo * hi)
    return PhasePoint(alpha, theta_star, PhaseMethod.NUMERIC_PEAK,
                      last.omega_star if last else None, last.gamma if last else None)


def drive_factor(alpha: float, n: int, ratio: float) -> float:
    """|J_n(ratio)|^(1/(1 - alpha)), the pump reduction of the crossover temperature."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 0:
        raise DomainError("photon index n must be >= 0")
    return abs(bessel_j(n, ratio)) ** (1.0 / (1.0 - alpha))


def t_star_driven(alpha: float, n: int, ratio: float, base: float) -> float:
    return base * drive_factor(alpha, n, ratio)


DEFAULT_ALPHAS = (0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45)


def phase_diagram(alphas=DEFAULT_ALPHAS, delta=1.0, omega_c=10.0, with_anchor=True,
                  mapper=map):
    """theta*(alpha) on a grid, plus the alpha = 1/2 anchor."""
    pts = list(mapper(_numeric_point, [(a, delta, omega_c) for a in alphas]))
    if with_anchor:
        pts.append(t_star_numeric(0.5, delta, omega_c))
    return pts


def _numeric_point(args):
    a, delta, omega_c = args
    return t_star_numeric(a, delta, omega_c)
