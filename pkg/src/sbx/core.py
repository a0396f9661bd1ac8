"""Parameter containers, unit conversion and the shared exception hierarchy.

Every energy-like quantity is stored as an angular frequency (hbar = k_B = 1).
Dimensionless studies use delta = 1; the CLI converts GHz / mK at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi
# k_B / h in GHz per kelvin
KB_OVER_H_GHZ_PER_K = 20.836619
GHZ = TWO_PI * 1e9  # rad/s per GHz of cyclic frequency


class SbxError(Exception):
    """Base class for all errors raised by the package."""


class ValidationError(SbxError, ValueError):
    pass


class DomainError(SbxError, ValueError):
    pass


class NumericalError(SbxError, ArithmeticError):
    pass


class QuadratureError(NumericalError):
    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class InstabilityError(NumericalError):
    pass


class StationarityError(NumericalError):
    pass


class WindowError(NumericalError):
    pass


class BracketError(NumericalError):
    pass


class FitError(NumericalError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateDataError(SbxError, ValueError):
    pass


class ConfigError(SbxError, ValueError):
    pass


def _finite(name, value):
    if not np.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class QubitParams:
    delta: float

    def __post_init__(self):
        _finite("delta", self.delta)
        if self.delta <= 0:
            raise ValidationError(f"delta must be > 0, got {self.delta}")


@dataclass(frozen=True)
class BathParams:
    """Ohmic bath: coupling ``alpha``, cutoff ``omega_c``, thermal frequency ``theta``."""

    alpha: float
    omega_c: float
    theta: float

    def __post_init__(self):
        for name in ("alpha", "omega_c", "theta"):
            _finite(name, getattr(self, name))
        if self.alpha < 0:
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        if self.omega_c <= 0:
            raise ValidationError(f"omega_c must be > 0, got {self.omega_c}")
        if self.theta <= 0:
            raise ValidationError(
                f"theta must be > 0 (zero temperature is not supported), got {self.theta}"
            )

    @property
    def kappa(self) -> float:
        """Thermal time hbar*beta/(2*pi)."""
        return 1.0 / (TWO_PI * self.theta)

    def scaling_limit_questionable(self, delta: float = 0.0) -> bool:
        return self.omega_c < 5.0 * max(self.theta, delta)


@dataclass(frozen=True)
class DriveParams:
    eps0: float = 0.0
    eps_p: float = 0.0
    omega_p: float = 0.0
    eps_d: float = 0.0
    omega_d: float = 0.0

    def __post_init__(self):
        for name in ("eps0", "eps_p", "omega_p", "eps_d", "omega_d"):
            _finite(name, getattr(self, name))
        if self.eps_p < 0 or self.eps_d < 0:
            raise ValidationError("drive amplitudes eps_p and eps_d must be >= 0")
        if self.eps_p != 0 and self.omega_p <= 0:
            raise ValidationError("omega_p must be > 0 when eps_p != 0")
        if self.eps_d != 0 and self.omega_d <= 0:
            raise ValidationError("omega_d must be > 0 when eps_d != 0")

    @property
    def drive_ratio(self) -> float:
        """eps_d / omega_d, zero when the pump is off."""
        return self.eps_d / self.omega_d if self.eps_d else 0.0


@dataclass(frozen=True)
class ModelParams:
    qubit: QubitParams
    bath: BathParams
    drive: DriveParams = field(default_factory=DriveParams)
    n_factor: float = 1.0

    def __post_init__(self):
        _finite("n_factor", self.n_factor)
        if self.n_factor < 0:
            raise ValidationError(f"n_factor must be >= 0, got {self.n_factor}")

    @classmethod
    def build(cls, *, delta=1.0, alpha, omega_c, theta, eps0=0.0, eps_p=0.0,
              omega_p=0.0, eps_d=0.0, omega_d=0.0, n_factor=1.0) -> "ModelParams":
        """Flat keyword constructor, handy for dimensionless studies."""
        return cls(
            QubitParams(delta),
            BathParams(alpha, omega_c, theta),
            DriveParams(eps0, eps_p, omega_p, eps_d, omega_d),
            n_factor,
        )

    # shortcuts used all over the numerics
    @property
    def delta(self) -> float:
        return self.qubit.delta

    @property
    def alpha(self) -> float:
        return self.bath.alpha

    @property
    def theta(self) -> float:
        return self.bath.theta

    @property
    def omega_c(self) -> float:
        return self.bath.omega_c

    @property
    def eps0(self) -> float:
        return self.drive.eps0

    @property
    def scaling_limit_questionable(self) -> bool:
        return self.bath.scaling_limit_questionable(self.qubit.delta)

    def with_drive(self, **changes) -> "ModelParams":
        return replace(self, drive=replace(self.drive, **changes))

    def with_bath(self, **changes) -> "ModelParams":
        return replace(self, bath=replace(self.bath, **changes))

    def with_delta(self, delta: float) -> "ModelParams":
        return replace(self, qubit=QubitParams(delta))

    def with_n_factor(self, n_factor: float) -> "ModelParams":
        return replace(self, n_factor=n_factor)


def _scale(x, factor):
    out = np.asarray(x, dtype=float) * factor
    return float(out) if out.ndim == 0 else out


def ghz_to_angular(f_ghz):
    """Cyclic frequency in GHz -> angular frequency in rad/s."""
    return _scale(f_ghz, GHZ)


def angular_to_ghz(omega):
    return _scale(omega, 1.0 / GHZ)


def mk_to_theta(t_mk: float) -> float:
    """Temperature in mK -> thermal angular frequency k_B T / hbar in rad/s."""
    _finite("temperature", t_mk)
    if t_mk < 0:
        raise ValidationError(f"temperature must be >= 0, got {t_mk} mK")
    return TWO_PI * KB_OVER_H_GHZ_PER_K * 1e9 * (t_mk * 1e-3)


def theta_to_mk(theta: float) -> float:
    return theta / (TWO_PI * KB_OVER_H_GHZ_PER_K * 1e9) * 1e3


def from_lab_units(*, delta_ghz, alpha, omega_c_ghz, t_mk, eps0_ghz=0.0, eps_p_ghz=0.0,
                   omega_p_ghz=0.0, eps_d_ghz=0.0, omega_d_ghz=0.0,
                   n_factor=1.0) -> ModelParams:
    """Build :class:`ModelParams` from lab units (cyclic GHz, mK).

    All frequencies become angular frequencies in rad/s. A zero temperature
    passes the unit conversion but is rejected by :class:`BathParams`.
    """
    for name, value in (("delta_ghz", delta_ghz), ("omega_c_ghz", omega_c_ghz),
                        ("eps0_ghz", eps0_ghz), ("eps_p_ghz", eps_p_ghz),
                        ("omega_p_ghz", omega_p_ghz), ("eps_d_ghz", eps_d_ghz),
                        ("omega_d_ghz", omega_d_ghz), ("alpha", alpha)):
        _finite(name, value)
    return ModelParams.build(
        delta=ghz_to_angular(delta_ghz),
        alpha=alpha,
        omega_c=ghz_to_angular(omega_c_ghz),
        theta=mk_to_theta(t_mk),
        eps0=ghz_to_angular(eps0_ghz),
        eps_p=ghz_to_angular(eps_p_ghz),
        omega_p=ghz_to_angular(omega_p_ghz),
        eps_d=ghz_to_angular(eps_d_ghz),
        omega_d=ghz_to_angular(omega_d_ghz),
        n_factor=n_factor,
    )


def to_lab_units(params: ModelParams) -> dict:
    d = params.drive
    return {
        "delta_ghz": angular_to_ghz(params.delta),
        "alpha": params.alpha,
        "omega_c_ghz": angular_to_ghz(params.omega_c),
        "t_mk": theta_to_mk(params.theta),
        "eps0_ghz": angular_to_ghz(d.eps0),
        "eps_p_ghz": angular_to_ghz(d.eps_p),
        "omega_p_ghz": angular_to_ghz(d.omega_p),
        "eps_d_ghz": angular_to_ghz(d.eps_d),
        "omega_d_ghz": angular_to_ghz(d.omega_d),
        "n_factor": params.n_factor,
    }


def power_db(eps_d: float, delta: float) -> float:
    """Drive power (eps_d/delta)**2 in dB; ``-inf`` flags a switched-off pump."""
    if eps_d < 0 or delta <= 0:
        raise ValidationError("power_db needs eps_d >= 0 and delta > 0")
    if eps_d == 0:
        return -math.inf
    return 20.0 * math.log10(eps_d / delta)


def eps_from_db(db: float, delta: float) -> float:
    """Inverse of :func:`power_db`."""
    if delta <= 0:
        raise ValidationError("delta must be > 0")
    if db == -math.inf:
        return 0.0
    return delta * 10.0 ** (db / 20.0)
