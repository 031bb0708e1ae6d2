"""Independent checks of computed orbits.

Nothing here reuses the solver's gradient path: the ODE residual differentiates
the orbit spectrally and evaluates the Hamiltonian vector field pointwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InputError
from .functional import FunctionalContext
from .problem import ProblemSpec, symplectic_matrix
from .spectral import SpectralGrid, SplitState, integer_window_masses

DECAY_THRESHOLD = 1e-6
RESIDUAL_THRESHOLD = 1e-5
VANISHING_RATIO = 1e-3
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _coeffs_and_grid(orbit) -> tuple[SpectralGrid, np.ndarray]:
    if isinstance(orbit, SplitState):
        return orbit.grid, orbit.coefficients
    grid, coeffs = orbit
    return grid, np.asarray(coeffs)


def hamiltonian_field(problem: ProblemSpec, z: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``J (A z + Gamma(t) (f(z) - lam g(z)))`` at each row of ``z``."""
    nl = problem.nonlinearity
    grad_h = z @ problem.A.T + problem.weight(t)[:, None] * (nl.f(z) - problem.lam * nl.g(z))
    return grad_h @ symplectic_matrix(problem.dim).T


def ode_residual(problem: ProblemSpec, orbit) -> float:
    """Discrete L2 norm over the window of ``z' - J grad_z H(z, t)`` at the collocation points."""
    grid, coeffs = _coeffs_and_grid(orbit)
    if grid.dim != problem.dim:
        raise InputError(f"orbit dimension {grid.dim} does not match problem dimension {problem.dim}")
    t = grid.times()
    z = grid.to_values(coeffs)
    dz = grid.to_values(grid.derivative(coeffs))
    r = dz - hamiltonian_field(problem, z, t)
    return math.sqrt(grid.period / grid.n * float(np.sum(r * r)))


def decay_check(orbit, fraction: float = 0.8) -> float:
    """Largest pointwise norm on ``|t| >= fraction * T``."""
    if not 0.0 < fraction < 1.0:
        raise InputError("fraction must lie in (0, 1)")
    grid, coeffs = _coeffs_and_grid(orbit)
    t = grid.times()
    z = grid.to_values(coeffs)
    tail = np.abs(t) >= fraction * grid.T
    return float(np.max(np.linalg.norm(z[tail], axis=1))) if tail.any() else 0.0


@dataclass
class VanishingReport:
    sup_mass: list[float]
    norm_sq: list[float]
    ratios: list[float]
    vanishing: bool
    concentration: list[float] = field(default_factory=list)
    pairings_plus: list[float] = field(default_factory=list)
    pairings_minus: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sup_mass": list(self.sup_mass), "norm_sq": list(self.norm_sq), "ratios": list(self.ratios),
            "concentration": list(self.concentration), "vanishing": self.vanishing, "pairings_plus": list(self.pairings_plus),
            "pairings_minus": list(self.pairings_minus),
        }


def _pairing(ctx: FunctionalContext, z: SplitState, part: np.ndarray) -> float:
    grid = ctx.grid
    zf = grid.to_values(z.coefficients, grid.n_fine)
    pf = grid.to_values(part, grid.n_fine)
    nl = ctx.problem.nonlinearity
    force = ctx.gamma_fine[:, None] * (nl.f(zf) - ctx.lam * nl.g(zf))
    return float(np.sum(force * pf)) * grid.period / grid.n_fine


def vanishing_diagnostic(states: Sequence, R: float = 1.0, ctx: FunctionalContext | None = None) -> VanishingReport:
    """Sup over integer ``y`` of the mass in ``[y - R, y + R]`` for each state.

    ``ratios`` are relative to the first state's squared L2 norm and
    ``concentration`` to each state's own.  The sequence is flagged vanishing
    when the last ratio falls below ``1e-3``.  With ``ctx`` the
    nonlinear pairings against ``z+`` and ``z-`` are reported as a cross-check.
    """
    if R <= 0:
        raise InputError("R must be positive")
    sups, norms = [], []
    plus, minus = [], []
    for s in states:
        grid, coeffs = _coeffs_and_grid(s)
        sups.append(float(integer_window_masses(grid, coeffs, R).max()))
        norms.append(grid.period * float(np.sum(np.abs(coeffs) ** 2)))
        if ctx is not None and isinstance(s, SplitState):
            plus.append(_pairing(ctx, s, s.plus_part))
            minus.append(_pairing(ctx, s, s.minus_part))
    ratios = [m / norms[0] if norms and norms[0] > 0 else 0.0 for m in sups]
    conc = [m / n if n > 0 else 0.0 for m, n in zip(sups, norms)]
    vanishing = bool(sups) and norms[0] > 0 and ratios[-1] < VANISHING_RATIO
    return VanishingReport(sups, norms, ratios, vanishing, conc, plus, minus)


def _golden_min(fun: Callable[[float], float], a: float, b: float, tol: float = 1e-10) -> tuple[float, float]:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def oracle_compare(orbit, analytic: Callable[[np.ndarray], np.ndarray], align: bool = True) -> float:
    """Max-abs deviation from ``analytic(t) -> (npts, dim)`` after the best time shift and sign.

    Shifts are scanned on the integers of the window and refined by golden
    section on ``[s - 1, s + 1]``; both ``z`` and ``-z`` are compared.
    """
    grid, coeffs = _coeffs_and_grid(orbit)
    t = grid.times()
    ref = np.asarray(analytic(t), dtype=float)

    def err(s: float, sign: float) -> float:
        return float(np.max(np.abs(sign * grid.to_values(grid.shift(coeffs, s)) - ref)))

    best = math.inf
    for sign in (1.0, -1.0):
        if not align:
            best = min(best, err(0.0, sign))
            continue
        coarse = [(err(float(s), sign), float(s)) for s in range(-grid.T, grid.T)]
        e0, s0 = min(coarse)
        _, e1 = _golden_min(lambda s: err(s, sign), s0 - 1.0, s0 + 1.0)
        best = min(best, e0, e1)
    return best


def soliton(t: np.ndarray) -> np.ndarray:
    """Homoclinic orbit ``(sqrt2 sech t, sqrt2 sech t tanh t)`` of ``q'' = q - q^3``."""
    s = 1.0 / np.cosh(t)
    return np.stack([math.sqrt(2.0) * s, math.sqrt(2.0) * s * np.tanh(t)], axis=-1)


SOLITON_ACTION = 4.0 / 3.0


@dataclass
class ValidationReport:
    residual_l2: float
    tail_sup: float
    window_mass: dict[int, float]
    oracle_error: float | None = None
    level_check: bool | None = None
    residual_threshold: float = RESIDUAL_THRESHOLD
    decay_threshold: float = DECAY_THRESHOLD

    @property
    def residual_ok(self) -> bool:
        return self.residual_l2 <= self.residual_threshold

    @property
    def decay_ok(self) -> bool:
        return self.tail_sup <= self.decay_threshold

    @property
    def passed(self) -> bool:
        return self.residual_ok and self.decay_ok and self.level_check is not False

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "residual_l2": self.residual_l2,
            "residual_ok": self.residual_ok,
            "tail_sup": self.tail_sup,
            "decay_ok": self.decay_ok,
            "window_mass": {str(k): v for k, v in sorted(self.window_mass.items())},
            "oracle_error": self.oracle_error,
            "level_check": self.level_check,
        }


def level_check(level: float, inf_sphere: float) -> bool:
    return bool(inf_sphere > 0 and level >= inf_sphere)


def validate(problem: ProblemSpec, orbit: SplitState, R: float = 1.0, analytic=None, level: float | None = None,
             inf_sphere: float | None = None, fraction: float = 0.8) -> ValidationReport:
    grid, coeffs = _coeffs_and_grid(orbit)
    ys = np.arange(-grid.T, grid.T)
    masses = integer_window_masses(grid, coeffs, R)
    report = ValidationReport(
        residual_l2=ode_residual(problem, orbit),
        tail_sup=decay_check(orbit, fraction),
        window_mass={int(y): float(m) for y, m in zip(ys, masses)},
    )
    if analytic is not None:
        report.oracle_error = oracle_compare(orbit, analytic)
    if level is not None and inf_sphere is not None:
        report.level_check = level_check(level, inf_sphere)
    return report
