"""Command-line front end.

    sbx <subcommand> --config FILE [--set section.key=value]... [--threads N] [--out DIR]

The config is an INI file. ``[model]`` holds the device either in lab units
(``units = lab``: *_ghz cyclic frequencies, t_mk) or in internal units
(``units = internal``: angular frequencies, theta). ``[solver]`` and
``[grid]`` hold numerical settings and sweep axes; ``[fit]`` and ``[scan]``
configure the fitting subcommands. Grid axes are either ``start:stop:count``
(inclusive linspace) or a comma-separated list.

Exit status: 0 on success, 2 for configuration/validation problems, 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .bath import CorrelationMethod
from .core import (GHZ, ConfigError, ModelParams, NumericalError, SbxError, angular_to_ghz,
                   eps_from_db, from_lab_units, theta_to_mk)
from .dynamics import KernelMode, solve_gme
from .fit import SpectrumData, fit_spectrum, scan_match
from .kernels import effective_bias, rates_fb
from .phase import t_star_numeric
from .response import ResponseEngine, ResponsePath, transmission_map

SUBCOMMANDS = ("dynamics", "chi", "map", "rates", "phase", "fit", "scan")
FLOAT = "%.17g"
# probe frequencies per chi work unit
_CHUNK = 16

_LAB_KEYS = ("delta_ghz", "alpha", "omega_c_ghz", "t_mk", "eps0_ghz", "eps_p_ghz",
             "omega_p_ghz", "eps_d_ghz", "omega_d_ghz", "n_factor")
_INTERNAL_KEYS = ("delta", "alpha", "omega_c", "theta", "eps0", "eps_p", "omega_p",
                  "eps_d", "omega_d", "n_factor")
_REQUIRED = {"lab": ("delta_ghz", "alpha", "omega_c_ghz", "t_mk"),
             "internal": ("alpha", "omega_c", "theta")}


# ---------------------------------------------------------------- config

class Config:
    """Parsed INI plus overrides, with line numbers kept for diagnostics."""

    def __init__(self, path, overrides=()):
        self.path = Path(path)
        self.parser = configparser.ConfigParser(interpolation=None)
        self.lines = {}
        try:
            text = self.path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {self.path}: {exc.strerror}") from None
        try:
            self.parser.read_string(text, source=str(self.path))
        except configparser.Error as exc:
            raise ConfigError(f"{self.path}: {exc}") from None
        section = None
        for i, line in enumerate(text.splitlines(), start=1):
            m = re.match(r"\s*\[([^\]]+)\]", line)
            if m:
                section = m.group(1).strip()
                continue
            m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
            if m and section:
                self.lines[(section, m.group(1).strip().lower())] = i
        for item in overrides:
            key, sep, value = item.partition("=")
            sec, dot, opt = key.strip().partition(".")
            if not sep or not dot or not sec or not opt:
                raise ConfigError(f"--set {item!r}: expected section.key=value")
            if not self.parser.has_section(sec):
                self.parser.add_section(sec)
            self.parser.set(sec, opt.strip(), value.strip())
            self.lines[(sec, opt.strip().lower())] = "--set"

    def where(self, section, key):
        line = self.lines.get((section, key))
        if line == "--set":
            return f"--set {section}.{key}"
        if line is None:
            return f"{self.path} [{section}] {key}"
        return f"{self.path}:{line} [{section}] {key}"

    def has(self, section, key):
        return self.parser.has_option(section, key)

    def raw(self, section, key, default=None):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key)
        if default is None:
            raise ConfigError(f"{self.path} [{section}] {key}: required key missing")
        return default

    def float(self, section, key, default=None):
        raw = self.raw(section, key, None if default is None else repr(default))
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: not a number: {raw!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"{self.where(section, key)}: must be finite")
        return value

    def int(self, section, key, default=None):
        value = self.float(section, key, default)
        if value != int(value):
            raise ConfigError(f"{self.where(section, key)}: must be an integer")
        return int(value)

    def grid(self, section, key):
        raw = self.raw(section, key)
        where = self.where(section, key)
        try:
            if ":" in raw:
                start, stop, count = (s.strip() for s in raw.split(":"))
                a, b, n = float(start), float(stop), int(count)
            else:
                values = np.array([float(v) for v in raw.split(",") if v.strip()])
        except ValueError:
            raise ConfigError(f"{where}: bad grid {raw!r}") from None
        if ":" in raw:
            if n < 1:
                raise ConfigError(f"{where}: grid count must be >= 1")
            if n > 1 and not a < b:
                raise ConfigError(f"{where}: range must be ordered (start < stop)")
            values = np.linspace(a, b, n)
        if values.size == 0:
            raise ConfigError(f"{where}: empty grid")
        if not np.all(np.isfinite(values)):
            raise ConfigError(f"{where}: grid values must be finite")
        return values

    def as_dict(self):
        return {s: dict(self.parser.items(s)) for s in self.parser.sections()}


class Setup:
    """Resolved model and solver settings shared by every subcommand."""

    def __init__(self, cfg: Config):
        self.cfg = cfg
        units = cfg.raw("model", "units", "lab").strip().lower()
        if units not in ("lab", "internal"):
            raise ConfigError(f"{cfg.where('model', 'units')}: must be 'lab' or 'internal'")
        self.lab = units == "lab"
        keys = _LAB_KEYS if self.lab else _INTERNAL_KEYS
        if cfg.parser.has_section("model"):
            for k in cfg.parser.options("model"):
                if k != "units" and k not in keys:
                    raise ConfigError(f"{cfg.where('model', k)}: unknown key for units = {units}")
        for k in _REQUIRED[units]:
            cfg.raw("model", k)
        values = {k: cfg.float("model", k, 0.0) for k in keys}
        if not self.lab and not cfg.has("model", "delta"):
            values["delta"] = 1.0
        if not cfg.has("model", "n_factor"):
            values["n_factor"] = 1.0
        try:
            self.params = from_lab_units(**values) if self.lab else ModelParams.build(**values)
        except SbxError as exc:
            raise ConfigError(f"{cfg.path} [model]: {exc}") from None
        self.method = self._enum(CorrelationMethod, "method", "scaling")
        self.path = self._enum(ResponsePath, "path", "exact")
        self.mode = self._enum(KernelMode, "mode", "pump_averaged")
        self.rtol = cfg.float("solver", "rtol", 1e-7)

    def _enum(self, cls, key, default):
        raw = self.cfg.raw("solver", key, default)
        try:
            return cls.parse(raw)
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ConfigError(f"{self.cfg.where('solver', key)}: {raw!r} not one of {choices}") from None

    # unit helpers: lab frequencies are cyclic GHz, internal ones pass through
    @property
    def freq(self):
        return GHZ if self.lab else 1.0

    def to_freq(self, x):
        return np.asarray(x, dtype=float) * self.freq

    def from_freq(self, w):
        return angular_to_ghz(w) if self.lab else w

    @property
    def time(self):
        # lab times are in ns
        return 1e-9 if self.lab else 1.0


# ---------------------------------------------------------------- output

def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([FLOAT % float(v) for v in row])


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


@contextmanager
def _pool(threads):
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            yield ex.map
    else:
        yield map


# workers must be module level to be picklable

def _chi_worker(args):
    params, path, method, wp, wp_max, rtol = args
    # the mesh is sized for the whole grid, so chunking cannot change any value
    eng = ResponseEngine(params, path, method, max_omega_p=wp_max, rtol=rtol)
    sp = eng.sweep(wp)
    return list(zip(sp.chi, sp.transmission))


def _rates_worker(args):
    params, method, rtol = args
    r = rates_fb(params, method, rtol)
    eb = effective_bias(r, params.theta)
    return r.k_f, r.k_b, eb.eps_eff, eb.p0, r.total


def _omega_row_worker(args):
    params, eps0, wp, path, method = args
    return transmission_map(params, eps0, [params.drive.eps_d], omega_p=wp, path=path,
                            method=method)[0]


def _phase_worker(args):
    alpha, omega_c, method = args
    return t_star_numeric(alpha, 1.0, omega_c, method=method)


class _Indexed:
    """Picklable worker that drops the trailing grid label and names it on failure."""

    def __init__(self, fn, name):
        self.fn = fn
        self.name = name

    def __call__(self, args):
        try:
            return self.fn(args[:-1])
        except NumericalError as exc:
            raise type(exc)(f"{self.name} at {args[-1]}: {exc}") from exc


# ---------------------------------------------------------------- subcommands

def cmd_dynamics(setup: Setup, out: Path, threads):
    cfg = setup.cfg
    tu = setup.time
    t_end = cfg.float("solver", "t_end_ns" if setup.lab else "t_end", 10.0 if setup.lab else 30.0)
    step = None
    key = "step_ns" if setup.lab else "step"
    if cfg.has("solver", key):
        step = cfg.float("solver", key) * tu
    p_init = cfg.float("solver", "p_init", 1.0)
    traj = solve_gme(p_init, t_end * tu, setup.params, setup.mode, setup.method, step=step)
    _write_csv(out / "dynamics.csv", ["t", "p"], zip(traj.t / tu, traj.p))


def cmd_chi(setup: Setup, out: Path, threads):
    wp = setup.to_freq(setup.cfg.grid("grid", "omega_p"))
    if np.any(wp <= 0):
        raise ConfigError(f"{setup.cfg.where('grid', 'omega_p')}: probe frequencies must be > 0")
    wp_max = float(np.max(wp))
    chunks = [wp[i:i + _CHUNK] for i in range(0, wp.size, _CHUNK)]
    jobs = [(setup.params, setup.path, setup.method, c, wp_max, setup.rtol,
             f"omega_p in [{setup.from_freq(c[0]):.6g}, {setup.from_freq(c[-1]):.6g}]")
            for c in chunks]
    with _pool(threads) as pmap:
        res = [r for part in pmap(_Indexed(_chi_worker, "chi"), jobs) for r in part]
    # chi is reported per unit frequency of the config (1/(2 pi GHz) in lab units)
    rows = [(setup.from_freq(w), (c * setup.freq).real, (c * setup.freq).imag, t.real, t.imag,
             abs(t) ** 2) for w, (c, t) in zip(wp, res)]
    _write_csv(out / "chi.csv", ["omega_p", "re_chi", "im_chi", "re_t", "im_t", "abs_t_sq"], rows)


def cmd_map(setup: Setup, out: Path, threads):
    cfg = setup.cfg
    x = cfg.grid("grid", "eps0")
    y_axis = cfg.raw("grid", "y_axis", "power_db").strip().lower()
    p = setup.params
    eps0 = setup.to_freq(x)
    if y_axis == "power_db":
        y = cfg.grid("grid", "power_db")
        eps_d = np.array([eps_from_db(v, p.delta) for v in y])
        if p.drive.omega_d <= 0:
            raise ConfigError(f"{cfg.path} [model]: a power map needs omega_d > 0")
        with _pool(threads) as pmap:
            grid = transmission_map(p, eps0, eps_d, path=setup.path, method=setup.method,
                                    mapper=pmap)
    elif y_axis == "omega_p":
        y = cfg.grid("grid", "omega_p")
        wps = setup.to_freq(y)
        if np.any(wps <= 0):
            raise ConfigError(f"{cfg.where('grid', 'omega_p')}: probe frequencies must be > 0")
        jobs = [(p, eps0, float(w), setup.path, setup.method, f"omega_p = {v:.6g}")
                for w, v in zip(wps, y)]
        with _pool(threads) as pmap:
            grid = np.vstack(list(pmap(_Indexed(_omega_row_worker, "map"), jobs)))
    else:
        raise ConfigError(f"{cfg.where('grid', 'y_axis')}: must be 'power_db' or 'omega_p'")
    rows = ((xv, yv, grid[i, j]) for i, yv in enumerate(y) for j, xv in enumerate(x))
    _write_csv(out / "map.csv", ["x", "y", "abs_t_sq"], rows)


def cmd_rates(setup: Setup, out: Path, threads):
    cfg = setup.cfg
    axis = cfg.raw("grid", "axis", "eps0").strip().lower()
    p = setup.params
    if axis == "eps0":
        vals = cfg.grid("grid", "eps0")
        params = [p.with_drive(eps0=float(e)) for e in setup.to_freq(vals)]
    elif axis == "power_db":
        vals = cfg.grid("grid", "power_db")
        params = [p.with_drive(eps_d=eps_from_db(float(v), p.delta)) for v in vals]
    else:
        raise ConfigError(f"{cfg.where('grid', 'axis')}: must be 'eps0' or 'power_db'")
    jobs = [(q, setup.method, setup.rtol, f"{axis} = {v:.6g}") for q, v in zip(params, vals)]
    with _pool(threads) as pmap:
        res = list(pmap(_Indexed(_rates_worker, "rates"), jobs))
    f = setup.freq
    rows = [(v, kf / f, kb / f, ee / f, p0, g / f) for v, (kf, kb, ee, p0, g) in zip(vals, res)]
    _write_csv(out / "rates.csv", [axis, "k_f", "k_b", "eps_eff", "p0", "gamma_d"], rows)


def cmd_phase(setup: Setup, out: Path, threads):
    alphas = setup.cfg.grid("grid", "alpha")
    if np.any(alphas <= 0) or np.any(alphas >= 1):
        raise ConfigError(f"{setup.cfg.where('grid', 'alpha')}: alpha must lie in (0, 1)")
    p = setup.params
    ratio = p.omega_c / p.delta
    # solved with delta = 1, then rescaled
    jobs = [(float(a), ratio, setup.method, f"alpha = {a:.6g}") for a in alphas]
    with _pool(threads) as pmap:
        pts = list(pmap(_Indexed(_phase_worker, "phase"), jobs))

    def scale(v, kind):
        if v is None:
            return math.nan
        v = v * p.delta
        if not setup.lab:
            return v
        return theta_to_mk(v) if kind == "theta" else angular_to_ghz(v)

    rows = [(pt.alpha, scale(pt.theta_star, "theta"), scale(pt.omega_star, "freq"),
             scale(pt.gamma, "freq")) for pt in pts]
    _write_csv(out / "phase.csv", ["alpha", "theta_star", "omega_star", "gamma"], rows)


def _load_cut(setup: Setup, file, base: Path):
    p = setup.params
    path = Path(file.strip())
    if not path.is_absolute():
        path = base / path
    return SpectrumData.from_csv(path, theta=p.theta, omega_c=p.omega_c, eps0=p.eps0,
                                 omega_p=p.drive.omega_p, eps_d=p.drive.eps_d,
                                 omega_d=p.drive.omega_d)


def cmd_fit(setup: Setup, out: Path, threads):
    cfg = setup.cfg
    path = ResponsePath.parse(cfg.raw("fit", "path", "analytic"))
    data = _load_cut(setup, cfg.raw("fit", "data"), cfg.path.parent)
    p = setup.params
    init = (cfg.float("fit", "init_alpha", p.alpha),
            (cfg.float("fit", "init_delta_ghz") * GHZ if setup.lab and cfg.has("fit", "init_delta_ghz")
             else cfg.float("fit", "init_delta", p.delta)),
            cfg.float("fit", "init_n", p.n_factor))
    res = fit_spectrum(data, init, path=path, method=setup.method,
                       restarts=cfg.int("fit", "restarts", 3),
                       seed=cfg.int("run", "seed", 0), jitter=cfg.float("fit", "jitter", 0.3))
    _write_json(out / "fit.json", {
        "alpha": res.alpha,
        "delta": setup.from_freq(res.delta),
        "n_factor": res.n_factor,
        "residual": res.residual,
        "rel_sigma": [float(v) for v in res.rel_sigma],
        "iterations": res.iterations,
        "converged": res.converged,
    })


def cmd_scan(setup: Setup, out: Path, threads):
    cfg = setup.cfg
    files = [f for f in cfg.raw("scan", "cuts").split(",") if f.strip()]
    if not files:
        raise ConfigError(f"{cfg.where('scan', 'cuts')}: no spectrum files given")
    cuts = [_load_cut(setup, f, cfg.path.parent) for f in files]
    deltas = setup.to_freq(cfg.grid("scan", "delta_ghz" if setup.lab else "delta"))
    ns = cfg.grid("scan", "n_factor")
    bounds = (cfg.float("scan", "alpha_min", 0.05), cfg.float("scan", "alpha_max", 0.95))
    path = ResponsePath.parse(cfg.raw("scan", "path", "exact"))
    rows = scan_match(cuts, deltas, ns, bounds, path=path, method=setup.method, threads=threads)
    _write_json(out / "fit.json", {"scan": [
        {"delta": setup.from_freq(r.delta), "n_factor": r.n_factor, "alpha": r.alpha,
         "residual": r.residual} for r in rows]})


COMMANDS = {"dynamics": cmd_dynamics, "chi": cmd_chi, "map": cmd_map, "rates": cmd_rates,
            "phase": cmd_phase, "fit": cmd_fit, "scan": cmd_scan}


# ---------------------------------------------------------------- entry point

def build_parser():
    ap = argparse.ArgumentParser(prog="sbx", description="Driven dissipative qubit toolkit (NIBA).")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="INI configuration file")
    ap.add_argument("--set", dest="overrides", action="append", default=[],
                    metavar="SECTION.KEY=VALUE", help="override one config key (repeatable)")
    ap.add_argument("--threads", type=int, default=None, help="worker processes")
    ap.add_argument("--out", default=None, help="output directory")
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = Config(args.config, args.overrides)
        threads = args.threads if args.threads is not None else cfg.int("run", "threads", 1)
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = Path(args.out if args.out is not None else cfg.raw("run", "out", "."))
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {out}: {exc.strerror}") from None
        setup = Setup(cfg)
        resolved = {"subcommand": args.subcommand, "threads": threads, "out": str(out),
                    "config": cfg.as_dict()}
        COMMANDS[args.subcommand](setup, out, threads)
        _write_json(out / "run.json", resolved)
    except NumericalError as exc:
        print(f"sbx: numerical error: {exc}", file=sys.stderr)
        return 3
    except (SbxError, ValueError) as exc:
        print(f"sbx: config error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())
