"""NIBA generalized master equation for P(t) and Fourier analysis of its cycle.

The GME

    P'(t) = int_0^t dt' [K-(t, t') - K+(t, t') P(t')],
    K+(t, t') = h+(t - t') cos zeta(t, t'),  K-(t, t') = h-(t - t') sin zeta(t, t')

is solved on a uniform grid. The dynamical phase separates,
exp(i zeta) = exp(i eps0 tau) exp(i phi(t)) exp(-i phi(t')), so both memory
integrals are convolutions of g+-(tau) = h+-(tau) exp(i eps0 tau) with
u(t') = exp(-i phi(t')) and u(t') P(t'). They are discretised with product
trapezoid weights (g integrated exactly against the linear interpolant of the
history), and P is advanced with the trapezoid rule, whose implicit equation
is linear in the new value and solved in closed form.

``PUMP_AVERAGED`` uses the J0-averaged h+- and phi = (eps_p/omega_p) sin(omega_p t).
``EXACT_DRIVEN`` uses the bare h+- and adds (eps_d/omega_d) sin(omega_d t) to phi.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .bath import CorrelationMethod, correlation, tau_env
from .core import (DomainError, InstabilityError, ModelParams, StationarityError,
                   ValidationError)
from .kernels import drive_factor

_SUB_X, _SUB_W = np.polynomial.legendre.leggauss(8)
_SUB_X = 0.5 * (_SUB_X + 1.0)
_SUB_W = 0.5 * _SUB_W


class KernelMode(enum.Enum):
    PUMP_AVERAGED = "pump_averaged"
    EXACT_DRIVEN = "exact_driven"

    @classmethod
    def parse(cls, value) -> "KernelMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"averaged": "pump_averaged", "pumpaveraged": "pump_averaged",
                   "exact": "exact_driven", "exactdriven": "exact_driven"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    p: np.ndarray
    step: float
    window: int
    mode: KernelMode
    max_truncated_kernel: float
    params: ModelParams = field(repr=False)

    @property
    def p_init(self) -> float:
        return float(self.p[0])


def max_step(params: ModelParams, mode=KernelMode.PUMP_AVERAGED) -> float:
    """Largest admissible step: 1/20 of the shortest period or memory time."""
    mode = KernelMode.parse(mode)
    d = params.drive
    periods = [2.0 * math.pi / max(abs(d.eps0), params.delta)]
    if d.eps_p > 0:
        periods.append(2.0 * math.pi / d.omega_p)
    if d.eps_d > 0:
        periods.append(2.0 * math.pi / d.omega_d)
        if mode is KernelMode.EXACT_DRIVEN:
            # phi(t) then swings at up to eps_d
            periods.append(2.0 * math.pi / (d.eps_d + d.eps_p))
    if params.alpha > 0:
        periods.append(tau_env(params.bath))
    return min(periods) / 20.0


def default_step(params: ModelParams, mode=KernelMode.PUMP_AVERAGED) -> float:
    """Default step; commensurate with the probe period when a probe is on."""
    h = max_step(params, mode)
    d = params.drive
    if d.eps_p > 0:
        period = 2.0 * math.pi / d.omega_p
        h = period / math.ceil(period / h - 1e-9)
    return h


def _phase(t, params: ModelParams, mode: KernelMode):
    d = params.drive
    phi = np.zeros_like(t)
    if d.eps_p > 0:
        phi += d.eps_p / d.omega_p * np.sin(d.omega_p * t)
    if mode is KernelMode.EXACT_DRIVEN and d.eps_d > 0:
        phi += d.eps_d / d.omega_d * np.sin(d.omega_d * t)
    return phi


def _kernels(tau, params, mode, method):
    q = correlation(tau, params.bath, method)
    q = np.asarray(q)
    env = params.delta ** 2 * np.exp(-q.real)
    if mode is KernelMode.PUMP_AVERAGED:
        env = env * drive_factor(tau, params.drive.eps_d, params.drive.omega_d)
    return env * np.cos(q.imag), env * np.sin(q.imag)


def _product_weights(n_int, h, params, mode, method):
    """Product-trapezoid weights (a_k, b_k) of g+- on intervals [k h, (k+1) h]."""
    sub = max(1, int(math.ceil(h * params.omega_c / 0.5)))
    # sub-panel nodes as fractions of one interval
    frac = ((np.arange(sub)[:, None] + _SUB_X[None, :]) / sub).ravel()
    wfrac = np.tile(_SUB_W / sub, sub)
    a = np.empty((2, n_int), dtype=complex)
    b = np.empty((2, n_int), dtype=complex)
    eps0 = params.eps0
    chunk = max(1, 2_000_000 // frac.size)
    for s in range(0, n_int, chunk):
        k = np.arange(s, min(s + chunk, n_int))
        tau = (k[:, None] + frac[None, :]) * h
        hp, hm = _kernels(tau, params, mode, method)
        rot = np.exp(1j * eps0 * tau)
        for i, hk in enumerate((hp, hm)):
            g = hk * rot * (h * wfrac)[None, :]
            a[i, k] = g @ (1.0 - frac)
            b[i, k] = g @ frac
    return a, b


def _memory_window(n_steps, h, params, method, envelope_tol):
    """Number of history intervals kept and the envelope where the cut falls."""
    if params.alpha == 0:
        return n_steps, 1.0
    span = 200.0 * tau_env(params.bath) / h
    cap = n_steps if span >= n_steps else int(math.ceil(span))
    k = np.arange(1, cap + 1)
    q = np.asarray(correlation(k * h, params.bath, method)).real
    small = np.nonzero(q > -math.log(envelope_tol))[0]
    if small.size:
        m = int(k[small[0]])
        return m, float(math.exp(-q[small[0]]))
    return cap, float(math.exp(-q[-1]))


def solve_gme(p_init=1.0, t_end=10.0, params: ModelParams | None = None,
              mode=KernelMode.PUMP_AVERAGED, method=CorrelationMethod.SCALING_LIMIT,
              step=None, headroom=1e-6, envelope_tol=1e-12) -> Trajectory:
    """Integrate the GME from P(0) = ``p_init`` up to ``t_end``.

    Parameters
    ----------
    step : float, optional
        Uniform time step. Defaults to :func:`default_step`; larger values than
        :func:`max_step` are rejected.
    headroom : float
        |P| may exceed 1 by this much before an InstabilityError is raised.
    envelope_tol : float
        History is dropped once Delta^2 exp(-Q') falls below this fraction of
        Delta^2 (never beyond 200 tau_env).
    """
    if params is None:
        raise ValidationError("params are required")
    mode = KernelMode.parse(mode)
    method = CorrelationMethod.parse(method)
    if method is CorrelationMethod.LONG_TIME:
        raise DomainError("the long-time correlation form is singular at t = 0; "
                          "use the exact or scaling-limit form for dynamics")
    if not -1.0 <= p_init <= 1.0:
        raise ValidationError(f"p_init must lie in [-1, 1], got {p_init}")
    if not t_end > 0:
        raise ValidationError("t_end must be > 0")
    h_max = max_step(params, mode)
    if step is None:
        h = default_step(params, mode)
    else:
        h = float(step)
        if not h > 0:
            raise ValidationError("step must be > 0")
        if h > h_max * (1 + 1e-9):
            raise ValidationError(
                f"step {h:g} too coarse: must resolve 1/20 of the shortest period ({h_max:g})")

    n = int(math.ceil(t_end / h - 1e-9))
    t = h * np.arange(n + 1)
    m_win, env_cut = _memory_window(n, h, params, method, envelope_tol)
    (a_p, a_m), (b_p, b_m) = _product_weights(m_win, h, params, mode, method)
    # c_k multiplies y_{n-k} for 1 <= k <= M-1; index 0 unused
    c_p = np.zeros(m_win + 1, dtype=complex)
    c_m = np.zeros(m_win + 1, dtype=complex)
    c_p[1:m_win] = a_p[1:] + b_p[:-1]
    c_m[1:m_win] = a_m[1:] + b_m[:-1]

    phi = _phase(t, params, mode)
    u = np.exp(-1j * phi)
    e_phi = np.conj(u)
    w = np.zeros(n + 1, dtype=complex)
    p = np.zeros(n + 1)
    p[0] = p_init
    w[0] = u[0] * p_init
    # reversed views let the history sum be a single dot product
    u_rev = u[::-1].copy()
    w_rev = np.zeros(n + 1, dtype=complex)
    w_rev[n] = w[0]
    denom = 1.0 + 0.5 * h * a_p[0].real
    f_prev = 0.0
    limit = 1.0 + headroom

    for j in range(1, n + 1):
        kmax = min(j - 1, m_win - 1)
        # y_{j-k} for k = 1..kmax sits at reversed index n - j + k
        lo = n - j + 1
        hist_m = c_m[1:kmax + 1] @ u_rev[lo:lo + kmax] + a_m[0] * u[j]
        hist_p = c_p[1:kmax + 1] @ w_rev[lo:lo + kmax]
        if j <= m_win:
            hist_m += b_m[j - 1] * u[0]
            hist_p += b_p[j - 1] * w[0]
        g = (e_phi[j] * hist_m).imag - (e_phi[j] * hist_p).real
        pj = (p[j - 1] + 0.5 * h * (f_prev + g)) / denom
        if not abs(pj) <= limit:
            raise InstabilityError(
                f"|P| = {abs(pj):.6g} exceeds 1 + {headroom:g} at t = {t[j]:.6g}; "
                "reduce the step")
        p[j] = pj
        w[j] = u[j] * pj
        w_rev[n - j] = w[j]
        f_prev = g - a_p[0].real * pj

    return Trajectory(t, p, h, m_win, mode, env_cut, params)


def fourier_coeff(traj: Trajectory, m: int, n_periods=1, omega=None,
                  drift_tol=1e-4, atol=1e-9) -> complex:
    """p_m = (omega/2 pi) int P(t) exp(-i m omega t) dt over the last periods.

    ``omega`` defaults to the probe frequency. The last ``n_periods`` periods
    must hold an integer number of steps, and the cycle before them must agree
    with the final cycle to ``drift_tol`` (relative to max|P| there) or
    ``atol``, whichever is larger.
    """
    if omega is None:
        omega = traj.params.drive.omega_p
    if not omega > 0:
        raise ValidationError("a positive analysis frequency is required")
    period = 2.0 * math.pi / omega
    per = period / traj.step
    n_per = int(round(per))
    if abs(per - n_per) > 1e-6 * per:
        raise ValidationError("step does not divide the analysis period")
    n_win = n_per * n_periods
    if traj.p.size < n_win + n_per + 1:
        raise StationarityError("trajectory shorter than the analysis window plus one cycle")
    last = traj.p[-n_win - 1:]
    prev = traj.p[-n_win - 1 - n_per:-n_per]
    drift = float(np.max(np.abs(last - prev)))
    scale = float(np.max(np.abs(last)))
    if drift > max(drift_tol * scale, atol):
        raise StationarityError(
            f"cycle-to-cycle drift {drift:.3g} exceeds {max(drift_tol * scale, atol):.3g}")
    tt = traj.t[-n_win - 1:]
    # trapezoid over whole periods; end points share the same phase
    f = last * np.exp(-1j * m * omega * tt)
    integral = traj.step * (f[1:-1].sum() + 0.5 * (f[0] + f[-1]))
    return complex(integral / (n_periods * period))
