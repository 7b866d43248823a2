"""Numerics for the half-wave equation i u_t + (-Delta)^{1/2} u = |u|^p:
fractional Laplacians, test-function estimates, a pseudospectral blowup
solver, an exact advection oracle and lifespan sweeps."""
from .advection import AdvectionProblem, exact_lifespan, exact_solution, integrate_advection
from .fraclap import (
    QuadratureError,
    RadialProfile,
    cordoba_check,
    fraclap_quadrature,
    fraclap_spectral,
)
from .grid import GridSpec, ScalarField
from .lifespan import FitResult, LifespanRecord, OdiTrace, SweepConfig, fit_critical, odi_diagnostic, run_sweep
from .solver import BlowupResult, SimConfig, SolutionTrace, integrate
from .specfun import FracIdentityQuery, c0, c0_double_factorial, frac_power_at_origin, gamma
from .testfn import TestFunctionParams, phi_r, psi_r
from .verdict import EstimateVerdict

__version__ = "0.1.0"

__all__ = [
    "AdvectionProblem",
    "BlowupResult",
    "EstimateVerdict",
    "FitResult",
    "FracIdentityQuery",
    "GridSpec",
    "LifespanRecord",
    "OdiTrace",
    "QuadratureError",
    "RadialProfile",
    "ScalarField",
    "SimConfig",
    "SolutionTrace",
    "SweepConfig",
    "TestFunctionParams",
    "c0",
    "c0_double_factorial",
    "cordoba_check",
    "exact_lifespan",
    "exact_solution",
    "fit_critical",
    "frac_power_at_origin",
    "fraclap_quadrature",
    "fraclap_spectral",
    "gamma",
    "integrate",
    "integrate_advection",
    "odi_diagnostic",
    "phi_r",
    "psi_r",
    "run_sweep",
]
