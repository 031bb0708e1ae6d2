"""Action functional, its derivative and Riesz gradient in the X-inner product.

    J(z) = 1/2 ||z+||^2 - 1/2 ||z-||^2 - int Gamma F(z) dt + lam int Gamma G(z) dt

Nonlinear terms are evaluated on a grid oversampled by ``DEALIAS`` and
integrated with the trapezoidal rule.  Because retained modes satisfy
``|k| <= M < n_fine / 2``, pairing the oversampled nonlinearity with a
trajectory equals the coefficient-space pairing exactly, so ``derivative`` is
the exact derivative of the discrete ``action``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HyperbolicityError, InputError
from .problem import ProblemSpec
from .spectral import DEALIAS, OperatorSymbol, SpectralGrid, SplitState, assemble_symbol

CONDITIONING_MARGIN = 1e-6


@dataclass(frozen=True, eq=False)
class FunctionalContext:
    problem: ProblemSpec
    grid: SpectralGrid
    symbol: OperatorSymbol
    gamma_fine: np.ndarray
    dealias: int = DEALIAS

    @property
    def lam(self) -> float:
        return self.problem.lam

    def with_lambda(self, lam: float) -> FunctionalContext:
        return FunctionalContext(self.problem.with_lambda(lam), self.grid, self.symbol, self.gamma_fine)


def make_context(problem: ProblemSpec, grid: SpectralGrid) -> FunctionalContext:
    if grid.dim != problem.dim:
        raise InputError(f"grid dimension {grid.dim} does not match problem dimension {problem.dim}")
    cert = problem.hyperbolicity
    if not cert.passed:
        raise HyperbolicityError(f"sigma(JA) touches the imaginary axis (margin {cert.margin:.3e})")
    symbol = assemble_symbol(grid, problem.A)
    gamma = problem.weight(grid.fine_times)
    return FunctionalContext(problem, grid, symbol, gamma)


@dataclass(frozen=True, eq=False)
class GradientReport:
    value: float
    gradient: SplitState
    derivative_norm: float
    cerami: float
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "derivative_norm": self.derivative_norm,
            "cerami": self.cerami,
            "norm_plus": self.gradient.norm_plus,
            "norm_minus": self.gradient.norm_minus,
            "warnings": list(self.warnings),
        }


def _check_grid(ctx: FunctionalContext, *states: SplitState) -> None:
    for s in states:
        if s.grid != ctx.grid:
            raise InputError(f"state grid {s.grid} does not match context grid {ctx.grid}")


def _fine_values(ctx: FunctionalContext, coeffs: np.ndarray) -> np.ndarray:
    return ctx.grid.to_values(coeffs, ctx.grid.n_fine)


def _quad_weight(ctx: FunctionalContext) -> float:
    return ctx.grid.period / ctx.grid.n_fine


def nonlinear_integrals(ctx: FunctionalContext, coeffs: np.ndarray) -> tuple[float, float]:
    """``(int Gamma F(z), int Gamma G(z))`` with compensated summation."""
    zf = _fine_values(ctx, coeffs)
    nl = ctx.problem.nonlinearity
    h = _quad_weight(ctx)
    iF = math.fsum(ctx.gamma_fine * nl.F(zf)) * h
    iG = math.fsum(ctx.gamma_fine * nl.G(zf)) * h
    return iF, iG


def nonlinear_force(ctx: FunctionalContext, zf: np.ndarray) -> np.ndarray:
    """``Gamma (f(z) - lam g(z))`` at the oversampled points."""
    nl = ctx.problem.nonlinearity
    force = nl.f(zf)
    if ctx.lam != 0.0:
        force = force - ctx.lam * nl.g(zf)
    return ctx.gamma_fine[:, None] * force


def action(ctx: FunctionalContext, z: SplitState) -> float:
    _check_grid(ctx, z)
    iF, iG = nonlinear_integrals(ctx, z.coefficients)
    return 0.5 * z.norm_plus**2 - 0.5 * z.norm_minus**2 - iF + ctx.lam * iG


def derivative(ctx: FunctionalContext, z: SplitState, v: SplitState) -> float:
    """``J'(z)(v) = int (-J z' - A z).v - int Gamma (f(z) - lam g(z)).v``."""
    _check_grid(ctx, z, v)
    sym = ctx.symbol
    lin = sym.l2_inner(sym.apply(z.coefficients), v.coefficients)
    zf = _fine_values(ctx, z.coefficients)
    vf = _fine_values(ctx, v.coefficients)
    nonlin = float(np.sum(nonlinear_force(ctx, zf) * vf)) * _quad_weight(ctx)
    return lin - nonlin


def l2_gradient(ctx: FunctionalContext, coeffs: np.ndarray) -> tuple[float, np.ndarray]:
    """Action value and coefficients ``g`` with ``J'(z)(v) = 2T Re sum g^* v``."""
    sym = ctx.symbol
    zf = _fine_values(ctx, coeffs)
    nl = ctx.problem.nonlinearity
    h = _quad_weight(ctx)
    iF = math.fsum(ctx.gamma_fine * nl.F(zf)) * h
    iG = math.fsum(ctx.gamma_fine * nl.G(zf)) * h if ctx.lam != 0.0 else 0.0
    value = 0.5 * sym.quadratic_form(coeffs) - iF + ctx.lam * iG
    g = sym.apply(coeffs) - ctx.grid.from_values(nonlinear_force(ctx, zf))
    return value, g


def gradient(ctx: FunctionalContext, z: SplitState) -> GradientReport:
    """Riesz representative of ``J'(z)``: ``|M|^-1`` applied to the L2 gradient per mode."""
    _check_grid(ctx, z)
    _, g = l2_gradient(ctx, z.coefficients)
    grad = ctx.symbol.split(ctx.symbol.apply_abs_power(g, -1.0), check=False)
    warnings = []
    if ctx.symbol.margin < CONDITIONING_MARGIN:
        warnings.append(f"hyperbolicity margin {ctx.symbol.margin:.3e} makes |M|^-1 ill-conditioned")
    dn = grad.norm
    return GradientReport(action(ctx, z), grad, dn, (1.0 + z.norm) * dn, warnings)


def phi_quantity(ctx: FunctionalContext, z: SplitState) -> tuple[np.ndarray, float]:
    """``Phi(z) = 1/2 f.z - F + lam G - lam/2 g.z`` on the oversampled grid and ``int Gamma Phi``."""
    _check_grid(ctx, z)
    nl = ctx.problem.nonlinearity
    lam = ctx.lam
    zf = _fine_values(ctx, z.coefficients)
    fz = np.sum(nl.f(zf) * zf, axis=1)
    gz = np.sum(nl.g(zf) * zf, axis=1)
    phi = 0.5 * fz - nl.F(zf) + lam * nl.G(zf) - 0.5 * lam * gz
    return phi, math.fsum(ctx.gamma_fine * phi) * _quad_weight(ctx)
