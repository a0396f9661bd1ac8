"""Driven spin-boson qubit in the NIBA: kernels, dynamics, linear response and fits."""

from .bath import CorrelationMethod, correlation, spectral_density, tau_env
from .core import (GHZ, BathParams, BracketError, ConfigError, DegenerateDataError, DomainError,
                   DriveParams, FitError, InstabilityError, ModelParams, NumericalError,
                   QuadratureError, QubitParams, SbxError, StationarityError, ValidationError,
                   WindowError, eps_from_db, from_lab_units, power_db, to_lab_units)
from .dynamics import KernelMode, Trajectory, fourier_coeff, solve_gme
from .fit import FitResult, SpectrumData, fit_spectrum, scan_match
from .kernels import (AnalyticKernels, KernelQuadrature, effective_bias, eff_bias,
                      kernel_transforms, kernels_analytic, rates_fb)
from .phase import (PhaseMethod, PhasePoint, classify, phase_diagram, t_star_approx,
                    t_star_exact, t_star_numeric)
from .response import (ResponseEngine, ResponsePath, Regime, peak_analysis, pole_quadratic,
                       spectrum, susceptibility, transmission_map)

__version__ = "0.1.0"
