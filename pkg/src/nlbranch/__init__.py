"""Continuous-state branching processes whose branching rates depend on the population size.

Analytic quantities and the boundary classifier live beside an Euler
simulator with stable jumps; Monte Carlo estimators check the simulator
against closed-form oracles.
"""

__version__ = "0.1.0"

from .analytics import c_alpha_a, g_a, ga_function, h_a
from .classifier import BoundaryReport, Verdict, classify_all
from .exceptions import ConfigError, NLBranchError, NumericalError, ParameterError
from .model import BranchingModel, PowerLawRates, StableJumpMeasure, make_power_law
from .montecarlo import Estimate, PsiSpec, estimate_event_prob, solve_ut
from .sampler import make_rng
from .simulator import Path, SimConfig, Status, simulate_path

__all__ = [
    "__version__",
    "BoundaryReport", "BranchingModel", "ConfigError", "Estimate", "NLBranchError", "NumericalError",
    "ParameterError", "Path", "PowerLawRates", "PsiSpec", "SimConfig", "StableJumpMeasure", "Status",
    "Verdict", "c_alpha_a", "classify_all", "estimate_event_prob", "g_a", "ga_function", "h_a",
    "make_power_law", "make_rng", "simulate_path", "solve_ut",
]
