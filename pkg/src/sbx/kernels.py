"""NIBA kernels: h+-(t), their Laplace/Fourier transforms, rates and effective bias.

Numeric transforms use composite 16-point Gauss-Legendre panels on a graded
mesh: panels start at a fraction of 1/omega_c and grow geometrically up to a
width of 1/20 of the fastest oscillation period (or half the envelope decay
scale), and the mesh is truncated where Q'(t) exceeds 34 (at most
200 tau_env). Every integral is evaluated on the mesh and on the mesh with all
panels halved; the two results must agree to ``rtol`` relative to the L1 norm
of the integrand.

The analytic path evaluates the same transforms in closed form with the
long-time correlation function, through W(x) = Gamma(alpha + i kappa x) /
Gamma(1 - alpha + i kappa x).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .bath import CorrelationMethod, correlation, tau_env
from .core import DomainError, ModelParams, QuadratureError
from .specfun import bessel_j, ln_gamma_complex

GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
_GL_X01 = 0.5 * (_GL_X + 1.0)
_GL_W01 = 0.5 * _GL_W

Q_CUTOFF = 34.0
TAU_CAP = 200.0
DEFAULT_RTOL = 1e-7
_CHUNK = 32


class Provenance(enum.Enum):
    NUMERIC = "numeric"
    ANALYTIC = "analytic"


class LocalizationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class KernelSet:
    k_plus_at_lambda: complex
    k_minus_0: float
    h_plus: complex
    h_minus: complex
    gamma_d: float
    provenance: Provenance

    @property
    def p0(self) -> float:
        return self.k_minus_0 / self.gamma_d


@dataclass(frozen=True)
class RatePair:
    k_f: float
    k_b: float

    @property
    def total(self) -> float:
        return self.k_f + self.k_b


@dataclass(frozen=True)
class EffectiveBias:
    eps_eff: float
    p0: float


def drive_factor(t, eps_d, omega_d):
    """Pump-averaging factor J0[(2 eps_d/omega_d) sin(omega_d t / 2)]."""
    t = np.asarray(t, dtype=float)
    if eps_d == 0:
        return np.ones(t.shape)
    return bessel_j(0, 2.0 * eps_d / omega_d * np.sin(0.5 * omega_d * t))


def h_pm(t, params: ModelParams, method=CorrelationMethod.SCALING_LIMIT):
    """Pump-averaged kernel functions (h+(t), h-(t)) for t >= 0."""
    q = np.asarray(correlation(t, params.bath, method))
    env = params.delta ** 2 * np.exp(-q.real) * drive_factor(t, params.drive.eps_d,
                                                              params.drive.omega_d)
    hp, hm = env * np.cos(q.imag), env * np.sin(q.imag)
    if hp.ndim == 0:
        return float(hp), float(hm)
    return hp, hm


def _graded_edges(w0, h_base, t_max, growth=1.5):
    edges = [0.0]
    w = min(w0, h_base)
    t = 0.0
    while t < t_max:
        t = min(t + w, t_max)
        edges.append(t)
        w = min(w * growth, h_base)
    return np.array(edges)


def _nodes(edges, singular_exponent=0.0):
    a, b = edges[:-1], edges[1:]
    width = (b - a)[:, None]
    t = (a[:, None] + width * _GL_X01[None, :]).ravel()
    w = (width * _GL_W01[None, :]).ravel()
    if singular_exponent > 0:
        # t = w0 v^q with q = 1/(1 - s) cancels a t^-s endpoint singularity
        q = 1.0 / (1.0 - singular_exponent)
        w0 = edges[1]
        t[:GL_ORDER] = w0 * _GL_X01 ** q
        w[:GL_ORDER] = w0 * q * _GL_X01 ** (q - 1.0) * _GL_W01
    return t, w


def design_frequency(params: ModelParams, lam=0.0, omega_p=0.0, extra=()):
    """Fastest oscillation frequency any transform integrand can contain."""
    d = params.drive
    f = abs(d.eps0) + max(abs(complex(lam).imag), abs(omega_p), *[abs(e) for e in extra], 0.0)
    if d.eps_d > 0:
        f += d.eps_d + d.omega_d
    return f


class KernelQuadrature:
    """Cached quadrature of the NIBA transform integrals for one parameter set.

    ``max_frequency`` bounds |eps0| + max(|Im lambda|, omega_p) over every
    transform requested later (the drive contribution is added internally).
    ``eps0`` may be overridden per call, since h+-(t) do not depend on it.
    """

    def __init__(self, params: ModelParams, method=CorrelationMethod.SCALING_LIMIT,
                 max_frequency=None, rtol=DEFAULT_RTOL, panel_scale=1.0):
        self.params = params
        self.method = CorrelationMethod.parse(method)
        self.rtol = rtol
        bath = params.bath
        if bath.alpha <= 0:
            raise DomainError("kernel transforms diverge for alpha = 0 (no damping)")
        if self.method is CorrelationMethod.LONG_TIME and bath.alpha >= 0.5:
            raise DomainError("long-time correlation form requires alpha < 0.5")
        self.tau_env = tau_env(bath)
        if max_frequency is None:
            max_frequency = design_frequency(params)
        d = params.drive
        self.max_frequency = float(max_frequency)
        f_int = self.max_frequency + (d.eps_d + d.omega_d if d.eps_d > 0 else 0.0)

        h_env = 0.5 * min(self.tau_env, 1.0 / (math.pi * bath.theta))
        h_osc = 2.0 * math.pi / f_int / 20.0 if f_int > 0 else math.inf
        self.h_base = min(h_env, h_osc) / panel_scale
        self.t_max = self._truncation()
        w0 = min(0.25 / bath.omega_c, self.h_base)
        edges = _graded_edges(w0, self.h_base, self.t_max)
        fine = np.empty(2 * edges.size - 1)
        fine[0::2] = edges
        fine[1::2] = 0.5 * (edges[:-1] + edges[1:])
        s = 2.0 * bath.alpha if self.method is CorrelationMethod.LONG_TIME else 0.0
        self._levels = [self._level(edges, s), self._level(fine, s)]
        q_end = correlation(self.t_max, bath, self.method).real
        self.tail_bound = params.delta ** 2 * math.exp(-q_end) * self.tau_env

    def _truncation(self):
        bath = self.params.bath
        cap = TAU_CAP * self.tau_env
        ts = np.geomspace(1e-3 / bath.omega_c, cap, 2000)
        q = correlation(ts, bath, self.method).real
        above = np.nonzero(q > Q_CUTOFF)[0]
        if above.size == 0:
            return cap
        i = above[0]
        if i == 0:
            return ts[0]
        lo, hi = ts[i - 1], ts[i]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if correlation(mid, bath, self.method).real > Q_CUTOFF:
                hi = mid
            else:
                lo = mid
        return hi

    def _level(self, edges, s):
        t, w = _nodes(edges, s)
        hp, hm = h_pm(t, self.params, self.method)
        env = np.hypot(hp, hm)
        return {"t": t, "w": w, "hp": hp, "hm": hm, "env": env}

    @property
    def n_nodes(self):
        return self._levels[1]["t"].size

    def _check(self, freq):
        if np.max(np.abs(freq)) > self.max_frequency * (1 + 1e-9) + 1e-300:
            raise DomainError(
                f"quadrature mesh built for frequencies up to {self.max_frequency:g}, "
                f"asked for {np.max(np.abs(freq)):g}; rebuild with a larger max_frequency"
            )

    def _integrate(self, build, what, tail_factor=1.0):
        """Integrate ``build(level) -> (values, l1)`` on both levels and compare.

        ``tail_factor`` scales the truncation bound for outputs that carry an
        extra prefactor (the 1/omega_p of H+-).
        """
        coarse, _ = build(self._levels[0])
        fine, scale = build(self._levels[1])
        scale = np.maximum(scale, 1e-300)
        change = np.abs(fine - coarse) / scale
        if np.any(change > self.rtol):
            worst = float(np.max(change))
            raise QuadratureError(
                f"{what}: mesh doubling changed the result by {worst:.2e} (relative)",
                bound=worst,
            )
        tail = self.tail_bound * tail_factor / scale
        if np.any(tail > self.rtol):
            raise QuadratureError(f"{what}: truncation tail {float(np.max(tail)):.2e} too large",
                                  bound=float(np.max(tail)))
        self.last_change = float(np.max(change))
        return fine

    def _eps(self, eps0):
        return self.params.drive.eps0 if eps0 is None else float(eps0)

    def transform(self, lam, sign=+1, eps0=None, moment=0):
        """Laplace transform K+(lam) (sign=+1) or K-(lam) (sign=-1).

        ``moment = k`` returns the integral of t^k e^{-lam t} h(t) trig(eps0 t),
        i.e. (-1)^k times the k-th lam-derivative.
        """
        eps = self._eps(eps0)
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        if np.any(lam.real < 0):
            raise DomainError("Laplace variable needs Re(lambda) >= 0")
        self._check(np.abs(lam.imag) + abs(eps))

        def build(lv):
            t, w = lv["t"], lv["w"]
            base = (lv["hp"] * np.cos(eps * t)) if sign > 0 else (lv["hm"] * np.sin(eps * t))
            wt = w * base * t ** moment
            l1 = np.sum(w * lv["env"] * t ** moment)
            out = np.empty(lam.shape, dtype=complex)
            for i in range(0, lam.size, _CHUNK):
                sl = slice(i, i + _CHUNK)
                out[sl] = np.exp(-np.outer(lam[sl], t)) @ wt
            return out, l1

        out = self._integrate(build, "K+" if sign > 0 else "K-",
                              (self.t_max + self.tau_env) ** moment)
        return out

    def k_plus(self, lam=0.0, eps0=None):
        out = self.transform(lam, +1, eps0)
        return complex(out[0]) if np.ndim(lam) == 0 else out

    def k_minus(self, lam=0.0, eps0=None):
        out = self.transform(lam, -1, eps0)
        return complex(out[0]) if np.ndim(lam) == 0 else out

    def h_transform(self, omega_p, sign=+1, eps0=None):
        """H+(omega_p) (sign=+1) or H-(omega_p) (sign=-1)."""
        eps = self._eps(eps0)
        wp = np.atleast_1d(np.asarray(omega_p, dtype=float))
        if np.any(wp <= 0):
            raise DomainError("H+- need omega_p > 0")
        self._check(wp + abs(eps))

        def build(lv):
            t, w = lv["t"], lv["w"]
            if sign > 0:
                base = lv["hm"] * np.cos(eps * t)
            else:
                base = -lv["hp"] * np.sin(eps * t)
            wt = w * base
            out = np.empty(wp.shape, dtype=complex)
            l1 = np.empty(wp.shape)
            for i in range(0, wp.size, _CHUNK):
                sl = slice(i, i + _CHUNK)
                half = 0.5 * np.outer(wp[sl], t)
                # e^{-i x} sin(x) = (1 - e^{-2 i x}) / 2i
                fac = (1.0 - np.exp(-2j * half)) / 2j
                out[sl] = (fac @ wt) / wp[sl]
                l1[sl] = (np.abs(np.sin(half)) @ (w * lv["env"])) / wp[sl]
            return out, l1

        out = self._integrate(build, "H+" if sign > 0 else "H-", 1.0 / wp)
        return complex(out[0]) if np.ndim(omega_p) == 0 else out

    def probe_transforms(self, omega_p, eps0=None):
        """(K+(i omega_p), H+(omega_p), H-(omega_p)) from one shared exponential."""
        eps = self._eps(eps0)
        wp = np.atleast_1d(np.asarray(omega_p, dtype=float))
        if np.any(wp <= 0):
            raise DomainError("probe transforms need omega_p > 0")
        self._check(wp + abs(eps))

        def build(lv):
            t, w = lv["t"], lv["w"]
            c, s = np.cos(eps * t), np.sin(eps * t)
            cols = np.stack([w * lv["hp"] * c, w * lv["hm"] * c, -w * lv["hp"] * s], axis=1)
            wenv = w * lv["env"]
            out = np.empty((3, wp.size), dtype=complex)
            l1 = np.empty((3, wp.size))
            for i in range(0, wp.size, _CHUNK):
                sl = slice(i, i + _CHUNK)
                ph = np.outer(wp[sl], t)
                e = np.exp(-1j * ph)
                r = e @ cols
                out[0, sl] = r[:, 0]
                # e^{-i x/2} sin(x/2) = (1 - e^{-i x}) / 2i
                tot = cols[:, 1:].sum(axis=0)
                out[1:, sl] = ((tot[None, :] - r[:, 1:]) / 2j / wp[sl, None]).T
                l1[0, sl] = wenv.sum()
                l1[1:, sl] = (np.abs(1.0 - e) @ wenv) / (2.0 * wp[sl])
            return out, l1

        factor = np.vstack([np.ones_like(wp), 1.0 / wp, 1.0 / wp])
        k, hp, hm = self._integrate(build, "K+/H+-", factor)
        return k, hp, hm

    def h_plus(self, omega_p, eps0=None):
        return self.h_transform(omega_p, +1, eps0)

    def h_minus(self, omega_p, eps0=None):
        return self.h_transform(omega_p, -1, eps0)

    def rates(self, eps0=None, check=True) -> RatePair:
        """Forward/backward rates K^f/b = (1/2) int env cos(Q'' -+ eps0 t)."""
        eps = self._eps(eps0)
        self._check(abs(eps))

        def build(lv):
            t, w = lv["t"], lv["w"]
            c, s = np.cos(eps * t), np.sin(eps * t)
            # cos(Q'' -+ e t) = cos Q'' cos e t +- sin Q'' sin e t
            a = np.sum(w * lv["hp"] * c)
            b = np.sum(w * lv["hm"] * s)
            l1 = np.sum(w * lv["env"])
            return np.array([0.5 * (a + b), 0.5 * (a - b)]), l1

        if check:
            kf, kb = self._integrate(build, "K^f/b")
        else:
            kf, kb = build(self._levels[1])[0]
        return RatePair(float(kf), float(kb))

    def t_moment_ratio(self):
        """2 theta int t h- dt / int h+ dt, the eps0 -> 0 limit of d eps_eff / d eps0."""
        def build(lv):
            t, w = lv["t"], lv["w"]
            return (np.array([np.sum(w * t * lv["hm"]), np.sum(w * lv["hp"])]),
                    np.array([np.sum(w * t * lv["env"]), np.sum(w * lv["env"])]))

        # the t-weighted tail beyond t_max is bounded by (t_max + tau_env) times the plain one
        num, den = self._integrate(build, "moment ratio",
                                   np.array([self.t_max + self.tau_env, 1.0]))
        return 2.0 * self.params.theta * num / den

    def kernel_set(self, lam, omega_p, eps0=None) -> KernelSet:
        kp = self.k_plus(lam, eps0)
        k0p = self.k_plus(0.0, eps0).real
        k0m = self.k_minus(0.0, eps0).real
        hp = self.h_plus(omega_p, eps0)
        hm = self.h_minus(omega_p, eps0)
        return KernelSet(kp, k0m, hp, hm, k0p, Provenance.NUMERIC)


def kernel_transforms(lam, omega_p, params: ModelParams,
                      method=CorrelationMethod.SCALING_LIMIT, rtol=DEFAULT_RTOL) -> KernelSet:
    """K+(lam), K-(0), H+-(omega_p) and gamma_d = K+(0) by quadrature."""
    f = design_frequency(params, lam=lam, omega_p=omega_p)
    quad = KernelQuadrature(params, method, max_frequency=f, rtol=rtol)
    return quad.kernel_set(lam, omega_p)


def rates_fb(params: ModelParams, method=CorrelationMethod.SCALING_LIMIT,
             rtol=DEFAULT_RTOL) -> RatePair:
    """Nonequilibrium forward/backward rates at lambda = 0 (probe ignored)."""
    return KernelQuadrature(params, method, rtol=rtol).rates()


def effective_bias(rates: RatePair, theta: float) -> EffectiveBias:
    """eps_eff = theta ln(K^f/K^b), P0 = (K^f - K^b)/(K^f + K^b)."""
    kf, kb = rates.k_f, rates.k_b
    if kf <= 0 or kb <= 0:
        warnings.warn(f"vanishing rate (K^f={kf:g}, K^b={kb:g}): localization",
                      LocalizationWarning, stacklevel=2)
        p0 = (kf - kb) / (kf + kb) if kf + kb != 0 else math.nan
        eps = math.copysign(math.inf, kf - kb) if kf != kb else math.nan
        return EffectiveBias(eps, p0)
    eps_eff = theta * math.log(kf / kb)
    p0_ratio = (kf - kb) / (kf + kb)
    p0_tanh = math.tanh(eps_eff / (2.0 * theta))
    if abs(p0_ratio - p0_tanh) > 1e-10:
        raise ArithmeticError(f"P0 cross-check failed: {p0_ratio} vs {p0_tanh}")
    return EffectiveBias(eps_eff, p0_ratio)


def eff_bias(params: ModelParams, method=CorrelationMethod.SCALING_LIMIT,
             rtol=DEFAULT_RTOL) -> EffectiveBias:
    return effective_bias(rates_fb(params, method, rtol), params.theta)


def deps_eff_deps0(params: ModelParams, method=CorrelationMethod.SCALING_LIMIT,
                   quad: KernelQuadrature | None = None, eps0=None) -> float:
    """d eps_eff / d eps0: closed moment form at eps0 = 0, central difference elsewhere."""
    eps = params.eps0 if eps0 is None else eps0
    step = 1e-4 * max(abs(eps), params.theta)
    if quad is None:
        p = params.with_drive(eps0=eps)
        quad = KernelQuadrature(p, method, max_frequency=abs(eps) + step)
    if eps == 0:
        return float(quad.t_moment_ratio())
    up = quad.rates(eps + step, check=False)
    dn = quad.rates(eps - step, check=False)
    th = params.theta
    return th * (math.log(up.k_f / up.k_b) - math.log(dn.k_f / dn.k_b)) / (2.0 * step)


# ---------------------------------------------------------------- analytic path

def w_function(x, alpha, kappa):
    """W(x) = Gamma(alpha + i kappa x) / Gamma(1 - alpha + i kappa x)."""
    z = 1j * kappa * np.asarray(x, dtype=complex)
    out = np.exp(ln_gamma_complex(alpha + z) - ln_gamma_complex(1.0 - alpha + z))
    return complex(out) if np.ndim(out) == 0 else out


def n_pm(params: ModelParams):
    """Prefactors (N+, N-) of the analytic kernels."""
    a = params.alpha
    if a >= 0.5:
        raise DomainError("analytic kernels need alpha < 0.5 (Gamma(1 - 2 alpha) pole)")
    if a <= 0:
        raise DomainError("analytic kernels need alpha > 0")
    kappa = params.bath.kappa
    base = 0.5 * params.delta ** 2 * kappa ** (1 - 2 * a) / params.omega_c ** (2 * a) \
        * math.gamma(1 - 2 * a)
    return base * math.cos(math.pi * a), base * math.sin(math.pi * a)


class AnalyticKernels:
    """Closed-form K+(lam), K-(0), H+-(omega_p) for an undriven bath with alpha < 0.5."""

    def __init__(self, params: ModelParams):
        if params.drive.eps_d != 0:
            raise DomainError("analytic kernels are only available without the pump (eps_d = 0)")
        self.params = params
        self.n_plus, self.n_minus = n_pm(params)
        self.alpha = params.alpha
        self.kappa = params.bath.kappa

    def w(self, x):
        return w_function(x, self.alpha, self.kappa)

    def _eps(self, eps0):
        return self.params.eps0 if eps0 is None else eps0

    def k_plus(self, lam=0.0, eps0=None):
        e = self._eps(eps0)
        x = -1j * np.asarray(lam, dtype=complex)
        return self.n_plus * (self.w(x + e) + self.w(x - e))

    def k_minus0(self, eps0=None):
        e = self._eps(eps0)
        return (1j * self.n_minus * (self.w(e) - self.w(-e))).real

    def h_plus(self, omega_p, eps0=None):
        e = self._eps(eps0)
        wp = np.asarray(omega_p, dtype=float)
        return 1j * self.n_minus / (2.0 * wp) * (
            self.w(wp + e) + self.w(wp - e) - self.w(e) - self.w(-e))

    def h_minus(self, omega_p, eps0=None):
        e = self._eps(eps0)
        wp = np.asarray(omega_p, dtype=float)
        return self.n_plus / (2.0 * wp) * (
            self.w(wp + e) - self.w(wp - e) - self.w(e) + self.w(-e))

    def probe_transforms(self, omega_p, eps0=None):
        """(K+(i omega_p), H+(omega_p), H-(omega_p)) sharing the W evaluations."""
        e = self._eps(eps0)
        wp = np.asarray(omega_p, dtype=float)
        w_up = self.w(wp + e)
        w_dn = w_up if e == 0 else self.w(wp - e)
        w0p = self.w(e)
        w0m = np.conj(w0p)  # W(-x) = W(x)*
        k = self.n_plus * (w_up + w_dn)
        hp = 1j * self.n_minus / (2.0 * wp) * (w_up + w_dn - w0p - w0m)
        hm = self.n_plus / (2.0 * wp) * (w_up - w_dn - w0p + w0m)
        return k, hp, hm

    def rates(self, eps0=None) -> RatePair:
        e = self._eps(eps0)
        kp = self.k_plus(0.0, e).real
        km = self.k_minus0(e)
        return RatePair(0.5 * (kp + km), 0.5 * (kp - km))

    def kernel_set(self, lam, omega_p, eps0=None) -> KernelSet:
        return KernelSet(
            complex(self.k_plus(lam, eps0)),
            float(self.k_minus0(eps0)),
            complex(self.h_plus(omega_p, eps0)),
            complex(self.h_minus(omega_p, eps0)),
            float(self.k_plus(0.0, eps0).real),
            Provenance.ANALYTIC,
        )


def kernels_analytic(lam, omega_p, params: ModelParams) -> KernelSet:
    return AnalyticKernels(params).kernel_set(lam, omega_p)
