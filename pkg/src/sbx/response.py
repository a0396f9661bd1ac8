"""Linear susceptibility, transmission and peak analysis.

Sign convention: with T = 1 - i N w chi, a transmission dip needs Im chi < 0,
so the absorptive part is reported as ``chi_abs = -Im chi`` (non-negative at
the symmetry point). Peak analysis works on ``chi_abs``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .bath import CorrelationMethod, tau_env
from .core import (DomainError, ModelParams, NumericalError, ValidationError,
                   WindowError)
from .kernels import (AnalyticKernels, KernelQuadrature, RatePair, effective_bias,
                      n_pm)

_GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


class ResponsePath(enum.Enum):
    EXACT_NIBA = "exact"
    INCOHERENT_LIMIT = "incoherent"
    WEAK_COUPLING = "weak"
    ANALYTIC = "analytic"

    @classmethod
    def parse(cls, value) -> "ResponsePath":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"exact_niba": "exact", "niba": "exact", "incoherent_limit": "incoherent",
                   "weak_coupling": "weak"}
        return cls(aliases.get(key, key))


class Regime(enum.Enum):
    COHERENT = "coherent"
    INCOHERENT = "incoherent"


class IncoherentValidityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ResponsePoint:
    omega_p: float
    chi: complex
    transmission: complex
    p0: float
    eps_eff: float
    gamma_d: float
    path: ResponsePath

    @property
    def chi_abs(self) -> float:
        return -self.chi.imag

    @property
    def abs_t_sq(self) -> float:
        return abs(self.transmission) ** 2


@dataclass(frozen=True)
class Spectrum:
    """Vectorised counterpart of :class:`ResponsePoint` over an omega_p grid."""

    omega_p: np.ndarray
    chi: np.ndarray
    transmission: np.ndarray
    p0: float
    eps_eff: float
    gamma_d: float
    path: ResponsePath

    @property
    def abs_t_sq(self):
        return np.abs(self.transmission) ** 2

    def point(self, i) -> ResponsePoint:
        return ResponsePoint(float(self.omega_p[i]), complex(self.chi[i]),
                             complex(self.transmission[i]), self.p0, self.eps_eff,
                             self.gamma_d, self.path)


@dataclass(frozen=True)
class PeakAnalysis:
    omega_star: float
    gamma: float
    regime: Regime
    omega_renorm: float | None
    gamma_r: float | None
    multimodal: bool = False
    peak_height: float = math.nan


def transmission(chi, omega_p, n_factor):
    """T = 1 - i N omega_p chi."""
    return 1.0 - 1j * n_factor * np.asarray(omega_p) * np.asarray(chi)


class ResponseEngine:
    """Evaluates chi on many (omega_p, eps0) points of one parameter set.

    The numeric kernel mesh is built once for the largest |eps0| and omega_p
    that will be requested; the pump-averaged h+-(t) do not depend on eps0.
    """

    def __init__(self, params: ModelParams, path=ResponsePath.EXACT_NIBA,
                 method=CorrelationMethod.SCALING_LIMIT, max_omega_p=None,
                 max_abs_eps0=None, rtol=1e-7):
        self.params = params
        self.path = ResponsePath.parse(path)
        self.method = CorrelationMethod.parse(method)
        wp = params.drive.omega_p if max_omega_p is None else max_omega_p
        e0 = abs(params.eps0) if max_abs_eps0 is None else max_abs_eps0
        if params.alpha <= 0:
            raise DomainError("response needs alpha > 0 (undamped kernels do not converge)")
        if self.path is ResponsePath.ANALYTIC:
            self._analytic = AnalyticKernels(params)
            self._quad = None
        elif self.path is ResponsePath.WEAK_COUPLING:
            if params.alpha > 0.05:
                raise DomainError("weak-coupling closed forms need alpha <= 0.05")
            if e0 != 0:
                raise DomainError("weak-coupling closed forms need eps0 = 0")
            if params.drive.eps_d != 0:
                raise DomainError("weak-coupling closed forms need eps_d = 0")
            self._quad = None
        else:
            # headroom for the eps0 finite-difference step
            f = e0 * (1.0 + 2e-4) + 2e-4 * params.theta + wp
            self._quad = KernelQuadrature(params, self.method, max_frequency=f, rtol=rtol)

    @property
    def quadrature(self) -> KernelQuadrature | None:
        return self._quad

    def _eps(self, eps0):
        return self.params.eps0 if eps0 is None else float(eps0)

    def rates(self, eps0=None) -> RatePair:
        if self.path is ResponsePath.ANALYTIC:
            return self._analytic.rates(self._eps(eps0))
        if self._quad is None:
            raise DomainError("rates are not available on the weak-coupling path")
        return self._quad.rates(eps0)

    def sweep(self, omega_p, eps0=None) -> Spectrum:
        wp = np.atleast_1d(np.asarray(omega_p, dtype=float))
        if np.any(wp <= 0):
            raise ValidationError("omega_p must be > 0")
        eps = self._eps(eps0)
        p = self.params
        path = self.path

        if path is ResponsePath.WEAK_COUPLING:
            n_plus, n_minus = n_pm(p)
            a, kappa = p.alpha, p.bath.kappa
            den = a * a + kappa * kappa * wp * wp
            fac = 1.0 - 1j * kappa * wp / a
            k_plus = 2.0 * a * n_plus * fac / den
            h_plus = kappa * n_minus * fac / den
            chi = h_plus / (1j * wp + k_plus)
            gd = 2.0 * n_plus / a
            return self._pack(wp, chi, 0.0, 0.0, gd)

        rates = self.rates(eps)
        eb = effective_bias(rates, p.theta)
        gamma_d = rates.total

        if path is ResponsePath.INCOHERENT_LIMIT:
            tau = tau_env(p.bath)
            if np.max(wp) * tau > 0.3:
                warnings.warn(
                    f"incoherent limit used at omega_p*tau_env = {np.max(wp) * tau:.2g} > 0.3",
                    IncoherentValidityWarning, stacklevel=2)
            from .kernels import deps_eff_deps0
            slope = deps_eff_deps0(p, self.method, quad=self._quad, eps0=eps)
            th = p.theta
            amp = slope / (4.0 * th * math.cosh(eb.eps_eff / (2.0 * th)) ** 2)
            chi = amp * gamma_d / (gamma_d + 1j * wp)
            return self._pack(wp, chi, eb.p0, eb.eps_eff, gamma_d)

        if path is ResponsePath.ANALYTIC:
            k_lam, h_p, h_m = self._analytic.probe_transforms(wp, eps)
        else:
            k_lam, h_p, h_m = self._quad.probe_transforms(wp, eps)
        chi = (h_p - h_m * eb.p0) / (1j * wp + k_lam)
        return self._pack(wp, chi, eb.p0, eb.eps_eff, gamma_d)

    def _pack(self, wp, chi, p0, eps_eff, gamma_d):
        chi = np.asarray(chi, dtype=complex)
        return Spectrum(wp, chi, transmission(chi, wp, self.params.n_factor),
                        float(p0), float(eps_eff), float(gamma_d), self.path)

    def point(self, omega_p, eps0=None) -> ResponsePoint:
        return self.sweep([omega_p], eps0).point(0)


def susceptibility(omega_p, params: ModelParams, path=ResponsePath.EXACT_NIBA,
                   method=CorrelationMethod.SCALING_LIMIT) -> ResponsePoint:
    """chi(omega_p) and T(omega_p) at one probe frequency."""
    if omega_p <= 0:
        raise ValidationError("omega_p must be > 0")
    eng = ResponseEngine(params, path, method, max_omega_p=omega_p)
    return eng.point(omega_p)


def spectrum(omega_p, params: ModelParams, path=ResponsePath.EXACT_NIBA,
             method=CorrelationMethod.SCALING_LIMIT) -> Spectrum:
    wp = np.asarray(omega_p, dtype=float)
    eng = ResponseEngine(params, path, method, max_omega_p=float(np.max(wp)))
    return eng.sweep(wp)


# ---------------------------------------------------------------- peak analysis

def default_window(params: ModelParams, gamma_d=None):
    """(0, 3 Delta] for coherent scans, (0, 5 gamma_d] when gamma_d is the smaller.

    Weak damping gives gamma_d ~ Delta^2 tau_env >> Delta, where the coherent
    window applies; the relaxation peak of an incoherent response sits at
    gamma_d < Delta. The lower edge is a small positive fraction.
    """
    hi = 3.0 * params.delta
    lo = 1e-3 * params.delta
    if gamma_d is not None and gamma_d > 0:
        hi = min(hi, 5.0 * gamma_d)
        lo = min(lo, 1e-3 * gamma_d)
    return lo, hi


def _golden_max(f, a, b, tol):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol * (abs(a) + abs(b)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _bisect(f, a, b, tol):
    fa = f(a)
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = f(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
        if abs(b - a) <= tol * abs(m):
            break
    return 0.5 * (a + b)


def peak_analysis(params: ModelParams, window=None, path=ResponsePath.EXACT_NIBA,
                  method=CorrelationMethod.SCALING_LIMIT, n_grid=121,
                  engine: ResponseEngine | None = None, rtol=1e-6) -> PeakAnalysis:
    """Locate the absorption peak omega*, its half width gamma and the regime.

    A geometric coarse grid over the window is refined by golden section
    around the maximum; the half-maximum crossings are found by bisection.
    With the default window, a maximum at the upper edge triples the window
    (up to three times) before giving up.
    """
    path = ResponsePath.parse(path)
    auto = window is None
    if auto:
        if path is ResponsePath.WEAK_COUPLING:
            gd = None
        else:
            gd = ResponseEngine(params, path, method, max_omega_p=0.0).rates().total
        window = default_window(params, gd)
    for _ in range(4):
        lo, hi = window
        if not 0 < lo < hi:
            raise ValidationError(f"bad peak window {window!r}")
        eng = engine if engine is not None else ResponseEngine(params, path, method,
                                                               max_omega_p=hi)
        try:
            return _analyze(eng, lo, hi, n_grid, rtol)
        except _UpperEdge as exc:
            if not auto:
                raise WindowError(str(exc)) from None
            window = (lo, 3.0 * hi)
    raise WindowError(f"no interior chi'' maximum below omega = {window[1]:g}")


class _UpperEdge(WindowError):
    pass


def _analyze(engine, lo, hi, n_grid, rtol):
    grid = np.geomspace(lo, hi, n_grid)
    ca = -engine.sweep(grid).chi.imag
    i = int(np.argmax(ca))
    if i == grid.size - 1:
        raise _UpperEdge(f"chi'' maximum at upper window edge (omega = {grid[i]:g})")
    if i == 0:
        raise WindowError(f"chi'' maximum at lower window edge (omega = {grid[i]:g})")
    inner = (ca[1:-1] > ca[:-2]) & (ca[1:-1] > ca[2:]) & (ca[1:-1] > 0.1 * ca[i])
    multimodal = int(np.count_nonzero(inner)) > 1

    def f(x):
        return float(-engine.sweep([x]).chi.imag[0])

    w_star, peak = _golden_max(f, grid[i - 1], grid[i + 1], rtol)
    half = 0.5 * peak

    def g(x):
        return f(x) - half

    def bracket(sign):
        # walk outward from the peak until chi'' drops below half maximum
        d = 1e-3
        inner = w_star
        while True:
            x = w_star * math.exp(sign * d)
            if x <= lo:
                raise WindowError("left half-maximum crossing below the window")
            if x >= hi:
                raise _UpperEdge("right half-maximum crossing above the window")
            if g(x) < 0:
                return (x, inner) if sign < 0 else (inner, x)
            inner = x
            d *= 2.0

    left = _bisect(g, *bracket(-1), rtol)
    right = _bisect(g, *bracket(+1), rtol)
    gamma = 0.5 * (right - left)

    if w_star > gamma:
        return PeakAnalysis(w_star, gamma, Regime.COHERENT,
                            math.sqrt(w_star * w_star - gamma * gamma), None,
                            multimodal, peak)
    return PeakAnalysis(w_star, gamma, Regime.INCOHERENT, None, w_star, multimodal, peak)


def weak_coupling_peak(params: ModelParams) -> float:
    """Closed-form peak position sqrt(2 N+ kappa - alpha^2) / kappa."""
    n_plus, _ = n_pm(params)
    kappa = params.bath.kappa
    arg = 2.0 * n_plus * kappa - params.alpha ** 2
    if arg <= 0:
        raise DomainError("weak-coupling peak formula has no real solution here")
    return math.sqrt(arg) / kappa


# ---------------------------------------------------------------- poles

def kernel_derivatives(params: ModelParams, method=CorrelationMethod.SCALING_LIMIT,
                       quad: KernelQuadrature | None = None):
    """(K+(0), K+'(0), K+''(0)) from moment integrals, checked by finite differences."""
    if quad is None:
        quad = KernelQuadrature(params, method)
    m = [quad.transform(0.0, +1, moment=k)[0].real for k in range(3)]
    k0, k1, k2 = m[0], -m[1], m[2]
    # finite-difference cross-check along the real lambda axis, step set by
    # the kernel's mean time
    h = 1e-3 * abs(k0 / m[1]) if m[1] != 0 else 1e-3 / quad.tau_env
    kp, km = (quad.transform(x, +1)[0].real for x in (h, 2 * h))
    fd1 = (-3 * k0 + 4 * kp - km) / (2 * h)
    if abs(fd1 - k1) > 1e-3 * abs(k1):
        raise NumericalError(f"K+'(0) moment {k1:g} disagrees with finite difference {fd1:g}")
    return k0, k1, k2


def pole_quadratic(params: ModelParams, method=CorrelationMethod.SCALING_LIMIT,
                   form="pade", quad: KernelQuadrature | None = None):
    """The two small-lambda poles of 1/(lambda + K+(lambda)).

    ``form="taylor"`` solves lambda + K + lambda K' + lambda^2 K''/2 = 0.
    ``form="pade"`` (default) resums the same three coefficients into the
    [1/1] Pade approximant K+ ~ (K0 + a1 lambda)/(1 + b1 lambda), with
    b1 = -K''/(2 K') and a1 = K' + K0 b1, so the pole condition reads
    b1 lambda^2 + (1 + a1) lambda + K0 = 0. The truncated Taylor series
    loses the undamped limit (roots -> +-i Delta) and, when the kernel has a
    negative long-time tail (alpha > 1/2), produces a spurious positive root;
    the Pade form keeps both right.
    """
    if params.drive.eps_p != 0:
        raise DomainError("pole analysis is defined without the probe (eps_p = 0)")
    k0, k1, k2 = kernel_derivatives(params, method, quad)
    if form == "taylor":
        coeffs = [0.5 * k2, 1.0 + k1, k0]
    elif form == "pade":
        b1 = -k2 / (2.0 * k1)
        coeffs = [b1, 1.0 + k1 + k0 * b1, k0]
    else:
        raise ValidationError(f"unknown pole form {form!r}")
    roots = np.roots(coeffs).astype(complex)
    roots = roots[np.argsort(roots.imag)[::-1]]
    return complex(roots[0]), complex(roots[1])


# ---------------------------------------------------------------- 2-D maps

def _map_row(args):
    params, eps_d, omega_p, eps0, path, method = args
    p = params.with_drive(eps_d=eps_d)
    eng = ResponseEngine(p, path, method, max_omega_p=omega_p,
                         max_abs_eps0=float(np.max(np.abs(eps0))))
    return np.array([eng.sweep([omega_p], e).abs_t_sq[0] for e in eps0])


def transmission_map(params: ModelParams, eps0, eps_d, omega_p=None,
                     path=ResponsePath.EXACT_NIBA, method=CorrelationMethod.SCALING_LIMIT,
                     mapper=map) -> np.ndarray:
    """|T|^2 on the grid eps_d (rows) x eps0 (columns) at a fixed probe frequency.

    ``mapper`` may be any order-preserving map, e.g. ``ProcessPoolExecutor.map``.
    """
    eps0 = np.atleast_1d(np.asarray(eps0, dtype=float))
    eps_d = np.atleast_1d(np.asarray(eps_d, dtype=float))
    wp = params.drive.omega_p if omega_p is None else float(omega_p)
    if not wp > 0:
        raise ValidationError("a positive probe frequency is required for a map")
    jobs = [(params, float(e), wp, eps0, path, method) for e in eps_d]
    return np.vstack(list(mapper(_map_row, jobs)))
