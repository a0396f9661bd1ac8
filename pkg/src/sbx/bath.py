"""Ohmic bath: spectral density, correlation function Q(t), memory time."""

from __future__ import annotations

import enum
import math

import numpy as np

from .core import BathParams, DomainError
from .specfun import ln_gamma_complex

_LN2 = math.log(2.0)


class CorrelationMethod(enum.Enum):
    EXACT = "exact"
    SCALING_LIMIT = "scaling"
    LONG_TIME = "long_time"

    @classmethod
    def parse(cls, value) -> "CorrelationMethod":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"scaling_limit": "scaling", "longtime": "long_time"}
        return cls(aliases.get(key, key))


def spectral_density(omega, bath: BathParams):
    """G(w) = 2 alpha w exp(-w / w_c) for w >= 0."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise DomainError("spectral density is defined for omega >= 0")
    out = 2.0 * bath.alpha * w * np.exp(-w / bath.omega_c)
    return float(out) if out.ndim == 0 else out


def tau_env(bath: BathParams) -> float:
    """Environmental memory time 1 / (2 pi alpha theta)."""
    if bath.alpha <= 0:
        raise DomainError(
            "alpha = 0 means infinite bath memory; use the dissipationless "
            "(Q = 0) path instead"
        )
    return 1.0 / (2.0 * math.pi * bath.alpha * bath.theta)


def log_sinhc(y):
    """log(sinh(y) / y) for y >= 0, overflow free."""
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.shape)
    pos = y > 0
    yp = y[pos]
    # sinh y = e^y (1 - e^{-2y}) / 2
    out[pos] = yp + np.log(-np.expm1(-2.0 * yp)) - np.log(2.0 * yp)
    return out


def log_sinh(y):
    """log(sinh(y)) for y > 0."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        return y + np.log(-np.expm1(-2.0 * y)) - _LN2


def correlation(t, bath: BathParams, method=CorrelationMethod.SCALING_LIMIT):
    """Bath correlation function Q(t) = Q'(t) + i Q''(t) for t >= 0.

    ``EXACT`` uses the Gamma-function form for the exponential cutoff,
    ``SCALING_LIMIT`` drops theta/omega_c, and ``LONG_TIME`` is the
    omega_c t >> 1 asymptote (only meaningful for alpha < 0.5; its real part
    diverges to -inf at t = 0).
    """
    method = CorrelationMethod.parse(method)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("correlation is only defined for t >= 0")
    a, wc, th = bath.alpha, bath.omega_c, bath.theta

    if method is CorrelationMethod.LONG_TIME:
        if a >= 0.5:
            raise DomainError("long-time correlation form requires alpha < 0.5")
        y = math.pi * th * t_arr
        q_re = 2.0 * a * (math.log(wc / (math.pi * th)) + log_sinh(y))
        q_im = np.full(t_arr.shape, math.pi * a)
    else:
        wt = wc * t_arr
        q_im = 2.0 * a * np.arctan(wt)
        if method is CorrelationMethod.SCALING_LIMIT:
            q_re = 2.0 * a * (0.5 * np.log1p(wt * wt) + log_sinhc(math.pi * th * t_arr))
        else:
            s = th / wc
            lg0 = ln_gamma_complex(1.0 + s).real
            lg = ln_gamma_complex(1.0 + s + 1j * th * np.atleast_1d(t_arr)).real
            q_re = a * np.log1p(wt * wt) + 4.0 * a * (lg0 - lg.reshape(t_arr.shape))
    q = q_re + 1j * q_im
    return complex(q) if q.ndim == 0 else q
