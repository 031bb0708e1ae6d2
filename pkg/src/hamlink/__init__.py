"""Homoclinic orbits of first-order Hamiltonian systems computed by a spectral linking minimax."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import ConfigurationError, HamlinkError, HyperbolicityError, InputError, NumericalError
from .functional import action, derivative, gradient, make_context, phi_quantity
from .hypotheses import AuditConfig, audit
from .problem import ProblemSpec, benchmark_problem, load_problem, power_problem
from .solver import GeometryConfig, SolverConfig, solve, verify_linking_geometry
from .spectral import assemble_symbol, make_grid
from .validate import ode_residual, oracle_compare, validate

__all__ = [
    "AuditConfig", "ConfigurationError", "GeometryConfig", "HamlinkError", "HyperbolicityError", "InputError",
    "NumericalError", "ProblemSpec", "SolverConfig", "action", "assemble_symbol", "audit", "benchmark_problem",
    "derivative", "gradient", "load_problem", "make_context", "make_grid", "ode_residual", "oracle_compare",
    "phi_quantity", "power_problem", "solve", "validate", "verify_linking_geometry",
]
