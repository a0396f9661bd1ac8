"""Least-squares extraction of (alpha, Delta, N) from |T|^2 spectra.

Parameters are optimised in log space with Nelder-Mead, started from the
supplied guess and then restarted from jittered copies of the best point.
``scan_match`` implements the grid protocol for strongly coupled devices:
for each candidate (Delta, N) the coupling alpha is fitted alone, and the
candidates are ranked by total residual over all supplied cuts.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .bath import CorrelationMethod
from .core import (ConfigError, DegenerateDataError, FitError, GHZ, ModelParams,
                   ValidationError)
from .kernels import AnalyticKernels, effective_bias
from .response import ResponseEngine, ResponsePath

ANALYTIC_ALPHA_MAX = 0.49


@dataclass(frozen=True)
class SpectrumData:
    """|T|^2 versus probe frequency (or versus eps0 at fixed probe frequency).

    ``axis = "omega_p"`` (default): ``x`` holds omega_p and ``eps0`` is fixed.
    ``axis = "eps0"``: ``x`` holds eps0 and ``omega_p`` is fixed.
    All frequencies are angular.
    """

    x: np.ndarray
    t_sq: np.ndarray
    theta: float
    omega_c: float
    weights: np.ndarray | None = None
    axis: str = "omega_p"
    eps0: float = 0.0
    omega_p: float = 0.0
    eps_d: float = 0.0
    omega_d: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.t_sq, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t_sq", y)
        if self.axis not in ("omega_p", "eps0"):
            raise ValidationError(f"axis must be 'omega_p' or 'eps0', got {self.axis!r}")
        if x.ndim != 1 or x.shape != y.shape:
            raise ValidationError("x and t_sq must be 1-D arrays of equal length")
        if x.size < 8:
            raise ValidationError(f"need at least 8 points, got {x.size}")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValidationError("spectrum contains non-finite values")
        if np.any(np.diff(x) <= 0):
            raise ValidationError(f"{self.axis} must be strictly increasing")
        if self.axis == "omega_p" and x[0] <= 0:
            raise ValidationError("omega_p must be > 0")
        if self.axis == "eps0" and not self.omega_p > 0:
            raise ValidationError("an eps0 cut needs a fixed omega_p > 0")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != x.shape or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValidationError("weights must be finite, non-negative, one per point")
            object.__setattr__(self, "weights", w)

    @property
    def omega_p_grid(self):
        return self.x if self.axis == "omega_p" else None

    def w(self):
        return np.ones_like(self.x) if self.weights is None else self.weights

    def params(self, alpha, delta, n_factor) -> ModelParams:
        return ModelParams.build(delta=delta, alpha=alpha, omega_c=self.omega_c,
                                 theta=self.theta, eps0=self.eps0, eps_d=self.eps_d,
                                 omega_d=self.omega_d, n_factor=n_factor)

    @classmethod
    def from_csv(cls, path, *, theta, omega_c, eps0=0.0, omega_p=0.0, eps_d=0.0, omega_d=0.0):
        """Read ``omega_p_ghz,t_sq[,weight]`` or ``eps0_ghz,t_sq[,weight]``.

        The first column is a cyclic frequency in GHz; an ``eps0_ghz`` cut is
        taken at the fixed probe frequency ``omega_p`` (angular).
        """
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader, [])]
            if (len(header) not in (2, 3) or header[0] not in ("omega_p_ghz", "eps0_ghz")
                    or header[1] != "t_sq" or (len(header) == 3 and header[2] != "weight")):
                raise ConfigError(f"{path}:1: header must be omega_p_ghz|eps0_ghz,t_sq[,weight]; "
                                  f"got {','.join(header)}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields")
                try:
                    rows.append([float(c) for c in row])
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: {exc}") from None
        arr = np.array(rows, dtype=float).reshape(-1, len(header))
        weights = arr[:, 2] if len(header) == 3 else None
        axis = "omega_p" if header[0] == "omega_p_ghz" else "eps0"
        return cls(arr[:, 0] * GHZ, arr[:, 1], theta, omega_c, weights=weights, axis=axis,
                   eps0=eps0, omega_p=omega_p, eps_d=eps_d, omega_d=omega_d)


@dataclass(frozen=True)
class FitResult:
    alpha: float
    delta: float
    n_factor: float
    residual: float
    covariance: np.ndarray = field(repr=False)
    iterations: int
    converged: bool = True

    @property
    def rel_sigma(self) -> np.ndarray:
        """One-sigma relative uncertainties of (alpha, delta, N) from the covariance proxy."""
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def model_t_sq(data: SpectrumData, alpha, delta, n_factor, path=ResponsePath.ANALYTIC,
               method=CorrelationMethod.SCALING_LIMIT):
    """Model |T|^2 on the data grid."""
    path = ResponsePath.parse(path)
    p = data.params(alpha, delta, n_factor)
    if path is ResponsePath.ANALYTIC:
        ak = AnalyticKernels(p)
        if data.axis == "omega_p":
            wp, eps = data.x, data.eps0
            chi = _analytic_chi(ak, wp, eps, p.theta)
        else:
            wp = data.omega_p
            chi = np.array([_analytic_chi(ak, np.array([wp]), e, p.theta)[0] for e in data.x])
        return np.abs(1.0 - 1j * n_factor * wp * chi) ** 2

    if data.axis == "omega_p":
        eng = ResponseEngine(p, path, method, max_omega_p=float(data.x[-1]),
                             max_abs_eps0=abs(data.eps0))
        return eng.sweep(data.x).abs_t_sq
    eng = ResponseEngine(p, path, method, max_omega_p=data.omega_p,
                         max_abs_eps0=float(np.max(np.abs(data.x))))
    return np.array([eng.sweep([data.omega_p], e).abs_t_sq[0] for e in data.x])


def _analytic_chi(ak: AnalyticKernels, wp, eps, theta):
    p0 = effective_bias(ak.rates(eps), theta).p0 if eps != 0 else 0.0
    k, hp, hm = ak.probe_transforms(wp, eps)
    return (hp - hm * p0) / (1j * wp + k)


def _objective_factory(data, path, method, scale):
    y = data.t_sq
    w = data.w()
    alpha_max = ANALYTIC_ALPHA_MAX if ResponsePath.parse(path) is ResponsePath.ANALYTIC else 0.99

    def resid(x):
        alpha = math.exp(x[0])
        delta = scale * math.exp(x[1])
        n = math.exp(x[2])
        if not 0.0 < alpha <= alpha_max:
            return None
        return model_t_sq(data, alpha, delta, n, path, method) - y

    def objective(x):
        r = resid(x)
        if r is None or not np.all(np.isfinite(r)):
            return 1e30
        return float(np.sum(w * r * r))

    return resid, objective


def fit_spectrum(data: SpectrumData, init, path=ResponsePath.ANALYTIC,
                 method=CorrelationMethod.SCALING_LIMIT, restarts=3, seed=0,
                 jitter=0.3, maxiter=4000) -> FitResult:
    """Fit (alpha, Delta, N) to |T|^2 data.

    Parameters
    ----------
    init : (alpha, delta, n_factor)
        Starting point; Delta in the same angular units as the data.
    restarts : int
        Extra Nelder-Mead runs from the best point so far, each jittered by a
        factor exp(jitter * N(0, 1)) per parameter.
    seed : int
        Seed of the jitter generator; equal seeds give identical results.
    """
    path = ResponsePath.parse(path)
    a0, d0, n0 = (float(v) for v in init)
    if not (a0 > 0 and d0 > 0 and n0 > 0):
        raise ValidationError("initial alpha, delta and n_factor must be > 0")
    if path is ResponsePath.ANALYTIC:
        if data.eps_d != 0:
            raise ValidationError("the analytic fit path needs eps_d = 0")
        if a0 > ANALYTIC_ALPHA_MAX:
            raise ValidationError(f"analytic path needs alpha <= {ANALYTIC_ALPHA_MAX}")
    if np.var(data.t_sq) < 1e-6:
        raise DegenerateDataError("t_sq is flat (variance < 1e-6): nothing to fit")

    resid, objective = _objective_factory(data, path, method, d0)
    rng = np.random.default_rng(seed)
    x_best = np.array([math.log(a0), 0.0, math.log(n0)])
    f_best = objective(x_best)
    iters = 0
    converged = False
    opts = {"xatol": 1e-7, "fatol": 1e-14 * max(f_best, 1e-300), "maxiter": maxiter,
            "maxfev": 2 * maxiter}
    for k in range(restarts + 1):
        x_start = x_best if k == 0 else x_best + jitter * rng.standard_normal(3)
        res = minimize(objective, x_start, method="Nelder-Mead", options=opts)
        iters += int(res.nit)
        converged = converged or bool(res.success)
        if res.fun <= f_best:
            x_best, f_best = res.x.copy(), float(res.fun)

    # A Lorentzian dip is invariant under c -> 2 - c, c ~ N * peak(chi'').
    # Refit from both mirror images of the current N and compare branches.
    branches = [(x_best, f_best)]
    r = resid(x_best)
    if r is not None:
        s = math.sqrt(max(float(np.min(r + data.t_sq)), 0.0))
        if s < 1.0:
            for factor in ((1.0 - s) / (1.0 + s), (1.0 + s) / (1.0 - s)):
                x_m = x_best + np.array([0.0, 0.0, math.log(factor)])
                res = minimize(objective, x_m, method="Nelder-Mead", options=opts)
                iters += int(res.nit)
                converged = converged or bool(res.success)
                branches.append((res.x.copy(), float(res.fun)))
    x_best, f_best = _pick_branch(branches, math.log(n0), data.x.size)

    alpha, delta, n = math.exp(x_best[0]), d0 * math.exp(x_best[1]), math.exp(x_best[2])
    rms = math.sqrt(f_best / float(np.sum(data.w())))
    cov = _covariance(resid, x_best, data.w(), f_best)
    out = FitResult(alpha, delta, n, rms, cov, iters, converged)
    if not converged:
        raise FitError("Nelder-Mead hit the iteration cap on every run", best=out)
    return out


def _pick_branch(branches, log_n0, n_points):
    """Lowest residual, unless another branch is within delta chi^2 < 1.

    The data cannot tell such branches apart, so the one whose N lies closest
    (in log) to the initial guess wins.
    """
    f_min = min(f for _, f in branches)
    tol = f_min / max(n_points - 3, 1)
    close = [(x, f) for x, f in branches if f - f_min <= tol]
    return min(close, key=lambda b: (abs(b[0][2] - log_n0), b[1]))


def _covariance(resid, x, w, rss, step=1e-5):
    """Gauss-Newton covariance of the log-parameters, s^2 (J^T W J)^-1."""
    r0 = resid(x)
    if r0 is None:
        return np.full((3, 3), np.nan)
    jac = np.empty((r0.size, 3))
    for i in range(3):
        dx = np.zeros(3)
        dx[i] = step
        rp, rm = resid(x + dx), resid(x - dx)
        if rp is None or rm is None:
            return np.full((3, 3), np.nan)
        jac[:, i] = (rp - rm) / (2 * step)
    dof = max(r0.size - 3, 1)
    jtj = jac.T @ (w[:, None] * jac)
    try:
        return rss / dof * np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        return np.full((3, 3), np.inf)


# ---------------------------------------------------------------- scan protocol

@dataclass(frozen=True)
class ScanRow:
    delta: float
    n_factor: float
    alpha: float
    residual: float


def _scan_one(args):
    cuts, delta, n, bounds, path, method, xatol = args
    y = np.concatenate([c.t_sq for c in cuts])
    w = np.concatenate([c.w() for c in cuts])

    def total(alpha):
        r = np.concatenate([model_t_sq(c, alpha, delta, n, path, method) for c in cuts]) - y
        return float(np.sum(w * r * r))

    res = minimize_scalar(total, bounds=bounds, method="bounded", options={"xatol": xatol})
    return ScanRow(delta, n, float(res.x), math.sqrt(float(res.fun) / float(np.sum(w))))


def scan_match(cuts, delta_candidates, n_box, alpha_bounds=(0.05, 0.95),
               path=ResponsePath.EXACT_NIBA, method=CorrelationMethod.SCALING_LIMIT,
               threads=1, xatol=1e-4):
    """Best alpha for every (Delta, N) candidate, ranked by total RMS residual.

    ``cuts`` is a sequence of :class:`SpectrumData` (omega_p or eps0 cuts) that
    share theta and omega_c. Returns a list of :class:`ScanRow`, best first.
    """
    cuts = list(cuts)
    if not cuts:
        raise ConfigError("scan_match needs at least one spectrum cut")
    deltas = list(delta_candidates)
    ns = list(n_box)
    if not deltas or not ns:
        raise ConfigError("empty delta or N candidate set")
    path = ResponsePath.parse(path)
    lo, hi = alpha_bounds
    if path is ResponsePath.ANALYTIC:
        hi = min(hi, ANALYTIC_ALPHA_MAX)
    if not 0 < lo < hi:
        raise ConfigError(f"bad alpha bounds {alpha_bounds!r}")
    jobs = [(cuts, d, n, (lo, hi), path, method, xatol) for d in deltas for n in ns]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(_scan_one, jobs))
    else:
        rows = [_scan_one(j) for j in jobs]
    return sorted(rows, key=lambda r: (r.residual, r.delta, r.n_factor))
