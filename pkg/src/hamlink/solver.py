"""Two-level linking minimax for critical points of the action.

For a direction ``u`` on the unit sphere of ``X+`` the inner problem maximises
the action over the cone ``{t u + v : t >= 0, v in X-}``; the outer problem
minimises that maximum over ``u``.  At an inner maximiser ``z = t u + v`` the
envelope theorem gives the outer Riemannian gradient ``t * P+ grad J(z)``
(tangential part), so one gradient evaluation serves both levels.

All iterations run in per-mode eigen-coordinates of the symbol, where the
X-inner product is diagonal and ``X+``/``X-`` are coordinate masks.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .functional import FunctionalContext, action, nonlinear_force
from .spectral import (
    SplitState,
    TripleNormContext,
    best_integer_center,
    random_coefficients,
    triple_norm,
    triple_norm_context,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    tol_cerami: float = 1e-6
    inner_tol: float = 1e-8
    max_inner: int = 500
    max_outer: int = 200
    restarts: int = 5
    amplitude: float = 1.0
    seed: int = 0
    ascent_cap: float = 1e12
    recenter: bool = True


class _Engine:
    """Action and Riesz gradient in eigen-coordinates ``c_k = V_k^* zhat_k``."""

    def __init__(self, ctx: FunctionalContext):
        self.ctx = ctx
        self.sym = ctx.symbol
        self.grid = ctx.grid
        self.lam_signed = ctx.symbol.eigenvalues
        self.lam_abs = np.abs(self.lam_signed)
        self.sign = np.sign(self.lam_signed)
        self.plus = ctx.symbol.plus_mask
        self.period = ctx.grid.period
        self.h = ctx.grid.period / ctx.grid.n_fine
        self.evals = 0

    def coeffs(self, c: np.ndarray) -> np.ndarray:
        return self.sym.from_eig(c)

    def eig(self, coeffs: np.ndarray) -> np.ndarray:
        return self.sym.to_eig(coeffs)

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(self.period * np.vdot(a, self.lam_abs * b).real)

    def norm(self, a: np.ndarray) -> float:
        return math.sqrt(max(self.inner(a, a), 0.0))

    def _nonlinear(self, zf: np.ndarray) -> float:
        nl = self.ctx.problem.nonlinearity
        g = self.ctx.gamma_fine
        val = math.fsum(g * nl.F(zf))
        if self.ctx.lam != 0.0:
            val -= self.ctx.lam * math.fsum(g * nl.G(zf))
        return val * self.h

    def value(self, c: np.ndarray) -> float:
        self.evals += 1
        zf = self.grid.to_values(self.coeffs(c), self.grid.n_fine)
        quad = 0.5 * self.period * float(np.sum(self.lam_signed * np.abs(c) ** 2))
        return quad - self._nonlinear(zf)

    def value_grad(self, c: np.ndarray) -> tuple[float, np.ndarray]:
        """Action and Riesz gradient (eigen-coordinates)."""
        self.evals += 1
        zf = self.grid.to_values(self.coeffs(c), self.grid.n_fine)
        quad = 0.5 * self.period * float(np.sum(self.lam_signed * np.abs(c) ** 2))
        force = self.grid.from_values(nonlinear_force(self.ctx, zf))
        grad = self.sign * c - self.eig(force) / self.lam_abs
        return quad - self._nonlinear(zf), grad

    def minus(self, c: np.ndarray) -> np.ndarray:
        return np.where(self.plus, 0.0, c)

    def plus_part(self, c: np.ndarray) -> np.ndarray:
        return np.where(self.plus, c, 0.0)

    def state(self, c: np.ndarray) -> SplitState:
        return self.sym.split(self.coeffs(c), check=False)

    def shift(self, c: np.ndarray, y: float) -> np.ndarray:
        # translation is a per-mode phase, so it commutes with V_k
        return self.grid.shift(c, y)


# --- result types ----------------------------------------------------------------


@dataclass
class InnerResult:
    t: float
    minus: np.ndarray
    value: float
    grad: np.ndarray
    grad_norm: float
    iterations: int
    converged: bool
    step2_violation: bool = False
    _engine: _Engine | None = field(default=None, repr=False)

    def state(self, u: SplitState | np.ndarray) -> SplitState:
        eng = self._engine
        uc = eng.eig(u.coefficients) if isinstance(u, SplitState) else u
        return eng.state(self.t * uc + self.minus)


@dataclass
class LinkingGeometry:
    r: float
    inf_sphere: float
    R_of_z: float
    sup_boundary: float
    delta: float
    sup_small_triple: float
    valid: bool
    r_scan: list[tuple[float, float]] = field(default_factory=list)
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "r": self.r, "inf_sphere": self.inf_sphere, "R_of_z": self.R_of_z,
            "sup_boundary": self.sup_boundary, "delta": self.delta,
            "sup_small_triple": self.sup_small_triple, "valid": self.valid,
            "r_scan": [list(x) for x in self.r_scan], "reason": self.reason,
        }


@dataclass
class TraceEntry:
    iteration: int
    value: float
    cerami: float
    triple: float

    def to_list(self) -> list:
        return [self.iteration, self.value, self.cerami, self.triple]


@dataclass
class SolveResult:
    orbit: SplitState
    action: float
    level: float
    trace: list[TraceEntry]
    shifts: list[int]
    converged: bool
    geometry: LinkingGeometry | None
    t: float
    direction: SplitState
    inner_minus: np.ndarray = field(repr=False)
    flags: list[str] = field(default_factory=list)
    evaluations: int = 0

    @property
    def cerami(self) -> float:
        return self.trace[-1].cerami if self.trace else float("inf")

    @property
    def triple(self) -> float:
        return self.trace[-1].triple if self.trace else 0.0

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "action": self.action,
            "level": self.level,
            "cerami": self.cerami,
            "triple_norm": self.triple,
            "norm": self.orbit.norm,
            "t": self.t,
            "shifts": list(self.shifts),
            "trace": [e.to_list() for e in self.trace],
            "geometry": None if self.geometry is None else self.geometry.to_dict(),
            "flags": list(self.flags),
            "evaluations": self.evaluations,
        }


# --- initial guess and recentering -----------------------------------------------


def initial_guess(ctx: FunctionalContext, amplitude: float = 1.0) -> SplitState:
    """``amplitude * exp(-t^2) * v`` with ``v`` the positive eigenvector of ``M(0)``
    belonging to its smallest positive eigenvalue."""
    sym = ctx.symbol
    M = ctx.grid.M
    lam0 = sym.eigenvalues[M]
    i = int(np.flatnonzero(lam0 > 0)[0])
    v = sym.eigenvectors[M, :, i].real
    t = ctx.grid.times()
    vals = amplitude * np.exp(-t**2)[:, None] * v[None, :]
    return sym.state_from_values(vals)


def recenter(ctx: FunctionalContext, z: SplitState) -> tuple[SplitState, int]:
    """Translate by the integer ``y`` carrying the most mass in ``[y-1, y+1]`` to the origin."""
    y, _ = best_integer_center(ctx.grid, z.coefficients, 1.0)
    if y == 0:
        return z, 0
    return ctx.symbol.split(ctx.grid.shift(z.coefficients, y), check=False), y


# --- inner maximisation ----------------------------------------------------------


def _restricted_norm(gt: float, t: float, gv_norm: float) -> float:
    if t <= 0.0 and gt < 0.0:
        gt = 0.0
    return math.hypot(gt, gv_norm)


def _inner(eng: _Engine, u: np.ndarray, t0: float, v0: np.ndarray, max_iters: int, tol: float,
           cap: float) -> InnerResult:
    """Projected gradient ascent with Barzilai-Borwein steps and Armijo backtracking."""
    t, v = max(float(t0), 0.0), eng.minus(v0)
    val, G = eng.value_grad(t * u + v)
    alpha = 1.0
    it = 0
    converged = False
    while True:
        gt = eng.inner(G, u)
        gv = eng.minus(G)
        gv_norm = eng.norm(gv)
        gnorm = _restricted_norm(gt, t, gv_norm)
        if gnorm <= tol:
            converged = True
            break
        if it >= max_iters:
            break
        it += 1
        noise = 1e-14 * (1.0 + abs(val))
        while True:
            t_new = max(t + alpha * gt, 0.0)
            v_new = v + alpha * gv
            val_new, G_new = eng.value_grad(t_new * u + v_new)
            ascent = (t_new - t) * gt + alpha * gv_norm**2
            if np.isfinite(val_new) and val_new >= val + 1e-4 * ascent - noise:
                break
            alpha *= 0.5
            if alpha < 1e-14:
                break
        if alpha < 1e-14:
            break
        if val_new > cap or not np.isfinite(val_new):
            return InnerResult(t_new, v_new, val_new, G_new, float("inf"), it, False, True, eng)
        st, sv = t_new - t, v_new - v
        yt = eng.inner(G_new, u) - gt
        yv = eng.minus(G_new) - gv
        ss = st * st + eng.inner(sv, sv)
        sy = st * yt + eng.inner(sv, yv)
        alpha = min(max(ss / -sy, 1e-3), 1e3) if sy < 0 else 1.0
        t, v, val, G = t_new, v_new, val_new, G_new
    return InnerResult(t, v, val, G, gnorm, it, converged, False, eng)


def _ray_start(eng: _Engine, u: np.ndarray) -> float:
    """Coarse maximiser of ``s -> J(s u)`` on a geometric grid."""
    ss = np.geomspace(1e-2, 1e3, 41)
    vals = [eng.value(s * u) for s in ss]
    return float(ss[int(np.argmax(vals))])


def inner_maximize(ctx: FunctionalContext, direction: SplitState, start: tuple[float, SplitState] | None = None,
                   max_iters: int = 500, tol: float = 1e-8, restarts: int = 0, seed: int = 0,
                   cap: float = 1e12) -> InnerResult:
    """Maximise the action over ``{t u + v : t >= 0, v in X-}``.

    ``direction`` must lie in ``X+`` with unit norm.  With ``restarts > 0`` the
    ascent is repeated from seeded random starts and the best value is kept
    (ties resolved toward the lower restart index).
    """
    eng = _Engine(ctx)
    u = eng.eig(direction.coefficients)
    return _inner_multi(eng, u, start, max_iters, tol, restarts, seed, cap)


def _check_direction(eng: _Engine, u: np.ndarray) -> None:
    nu = eng.norm(u)
    if nu == 0.0:
        raise InputError("direction must be a nonzero element of X+")
    if abs(nu - 1.0) > 1e-8 or eng.norm(eng.minus(u)) > 1e-8:
        raise InputError("direction must be a unit vector in X+")


def _inner_multi(eng: _Engine, u, start, max_iters, tol, restarts, seed, cap) -> InnerResult:
    _check_direction(eng, u)
    if start is None:
        t0, v0 = _ray_start(eng, u), np.zeros_like(u)
    else:
        t0, v0 = start[0], start[1]
        if isinstance(v0, SplitState):
            v0 = eng.eig(v0.coefficients)
    best = _inner(eng, u, t0, v0, max_iters, tol, cap)
    if restarts > 0:
        rng = np.random.default_rng(seed)
        scale = max(best.t, 1.0)
        for _ in range(restarts):
            vr = eng.minus(eng.eig(random_coefficients(eng.grid, rng, decay=2.0)))
            nv = eng.norm(vr)
            if nv > 0:
                vr = vr * (0.5 * scale * rng.uniform() / nv)
            cand = _inner(eng, u, scale * rng.uniform(0.5, 1.5), vr, max_iters, tol, cap)
            if cand.step2_violation:
                return cand
            if cand.value > best.value + 1e-12:
                best = cand
    return best


# --- outer minimisation ----------------------------------------------------------


def _normalize(eng: _Engine, c: np.ndarray) -> np.ndarray:
    return c / eng.norm(c)


def outer_minimize(ctx: FunctionalContext, u0: SplitState | None = None, config: SolverConfig = SolverConfig(),
                   warm_start: SolveResult | None = None,
                   triple_ctx: TripleNormContext | None = None) -> SolveResult:
    """Riemannian gradient descent of ``u -> max_{cone(u)} J`` on the unit sphere of ``X+``.

    Terminates when ``(1 + ||z||) ||grad J(z)|| <= tol_cerami`` at the inner maximiser.
    """
    eng = _Engine(ctx)
    tctx = triple_ctx if triple_ctx is not None else triple_norm_context(ctx.symbol)
    flags: list[str] = []
    if warm_start is not None:
        u = eng.eig(warm_start.direction.coefficients)
        start = (warm_start.t, warm_start.inner_minus)
    else:
        z0 = u0 if u0 is not None else initial_guess(ctx, config.amplitude)
        u = eng.plus_part(eng.eig(z0.coefficients))
        if eng.norm(u) == 0.0:
            raise InputError("initial direction has no X+ component")
        start = None
    u = _normalize(eng, u)
    restarts = config.restarts if ctx.lam > 0 else 0
    inner = _inner_multi(eng, u, start, config.max_inner, config.inner_tol, restarts, config.seed,
                         config.ascent_cap)
    trace: list[TraceEntry] = []
    shifts: list[int] = []
    converged = False
    beta = 1.0 / max(inner.t, 1e-3) ** 2

    def record(it: int, inn: InnerResult, uu: np.ndarray) -> float:
        z = inn.t * uu + inn.minus
        znorm = eng.norm(z)
        cer = (1.0 + znorm) * eng.norm(inn.grad)
        st = eng.state(z)
        trace.append(TraceEntry(it, inn.value, cer, triple_norm(tctx, st)))
        return cer

    for it in range(config.max_outer + 1):
        if inner.step2_violation:
            flags.append("step2_violation: inner ascent unbounded")
            record(it, inner, u)
            break
        if not inner.converged:
            flags.append(f"inner_nonconverged@{it}")
        cer = record(it, inner, u)
        if cer <= config.tol_cerami:
            converged = True
            break
        if it == config.max_outer:
            break
        Gp = eng.plus_part(inner.grad)
        tangent = Gp - eng.inner(Gp, u) * u
        d = inner.t * tangent
        dd = eng.inner(d, d)
        m = inner.value
        noise = 1e-13 * (1.0 + abs(m))
        accepted = None
        while beta > 1e-14:
            u_new = _normalize(eng, u - beta * d)
            cand = _inner_multi(eng, u_new, (inner.t, inner.minus), config.max_inner, config.inner_tol, 0,
                                config.seed, config.ascent_cap)
            if cand.step2_violation or cand.value <= m - 1e-4 * beta * dd + noise:
                accepted = (u_new, cand)
                break
            beta *= 0.5
        if accepted is None:
            flags.append(f"outer_line_search_failed@{it}")
            break
        u_new, cand = accepted
        if not cand.step2_violation:
            Gp_new = eng.plus_part(cand.grad)
            d_new = cand.t * (Gp_new - eng.inner(Gp_new, u_new) * u_new)
            s = u_new - u
            y = d_new - d
            sy = eng.inner(s, y)
            beta = min(max(eng.inner(s, s) / sy, 1e-4 / max(cand.t, 1e-3) ** 2), 1e4) if sy > 0 else beta * 2
        u, inner = u_new, cand
        if config.recenter:
            yshift, _ = best_integer_center(eng.grid, eng.coeffs(inner.t * u + inner.minus), 1.0)
            if yshift != 0:
                u = eng.shift(u, yshift)
                inner.minus = eng.shift(inner.minus, yshift)
                inner.grad = eng.shift(inner.grad, yshift)
                shifts.append(yshift)

    if ctx.lam > 0 and config.restarts > 0 and not inner.step2_violation:
        check = _inner_multi(eng, u, (inner.t, inner.minus), config.max_inner, config.inner_tol,
                             config.restarts, config.seed + 1, config.ascent_cap)
        if check.value > inner.value + 1e-8:
            flags.append(f"inner_maximizer_not_unique: restart gap {check.value - inner.value:.3e}")
    z = inner.t * u + inner.minus
    orbit = eng.state(z)
    return SolveResult(
        orbit=orbit,
        action=action(ctx, orbit),
        level=inner.value,
        trace=trace,
        shifts=shifts,
        converged=converged,
        geometry=None,
        t=inner.t,
        direction=eng.state(u),
        inner_minus=inner.minus,
        flags=flags,
        evaluations=eng.evals,
    )


# --- linking geometry ------------------------------------------------------------


@dataclass(frozen=True)
class GeometryConfig:
    r_top: float = 2.0
    r_levels: int = 8
    sphere_starts: int = 4
    sphere_iters: int = 150
    boundary_angles: int = 33
    boundary_dirs: int = 8
    radius_doublings: int = 10
    delta_dirs: int = 24
    delta_scales: int = 80
    delta_halvings: int = 30
    seed: int = 0


class SmallTripleSampler:
    """Sup of the action over nested samples of ``{|||z||| <= delta}``.

    Directions are normalised to triple norm one and scaled by a fixed
    geometric grid, so the sample set for a smaller ``delta`` is a subset of
    the one for a larger ``delta`` and the estimate is monotone in ``delta``.
    """

    def __init__(self, ctx: FunctionalContext, tctx: TripleNormContext | None = None,
                 n_dirs: int = 24, top: float = 4.0, n_scales: int = 80, seed: int = 0,
                 extra: list[SplitState] | None = None):
        self.eng = _Engine(ctx)
        tctx = tctx if tctx is not None else triple_norm_context(ctx.symbol)
        rng = np.random.default_rng(seed)
        dirs = [s.coefficients for s in (extra or [])]
        for i in range(n_dirs):
            c = self.eng.eig(random_coefficients(ctx.grid, rng, decay=2.0))
            # mostly-X+ directions carry the sup; mixed ones probe the weak part
            c = self.eng.plus_part(c) + (i % 3) / 2.0 * self.eng.minus(c)
            dirs.append(self.eng.coeffs(c))
        self.dirs = []
        for d in dirs:
            tn = triple_norm(tctx, ctx.symbol.split(d, check=False))
            if tn > 0:
                self.dirs.append(self.eng.eig(d) / tn)
        self.scales = top * 2.0 ** (-0.25 * np.arange(n_scales))
        self._cache: dict[tuple[int, int], float] = {}

    def _value(self, i: int, j: int) -> float:
        key = (i, j)
        if key not in self._cache:
            with np.errstate(over="ignore", invalid="ignore"):
                v = self.eng.value(self.scales[j] * self.dirs[i])
            self._cache[key] = v if np.isfinite(v) else -math.inf
        return self._cache[key]

    def __call__(self, delta: float) -> float:
        best = 0.0  # z = 0 is always admissible
        for j in np.flatnonzero(self.scales <= delta * (1 + 1e-12)):
            for i in range(len(self.dirs)):
                best = max(best, self._value(i, int(j)))
        return best


def sup_small_triple(ctx: FunctionalContext, delta: float, sampler: SmallTripleSampler | None = None) -> float:
    if delta <= 0:
        raise InputError("delta must be positive")
    sampler = sampler if sampler is not None else SmallTripleSampler(ctx)
    return sampler(delta)


def _sphere_min(eng: _Engine, r: float, start: np.ndarray, iters: int) -> float:
    """Riemannian descent of the action on ``{||w|| = r, w in X+}``."""
    w = r * _normalize(eng, eng.plus_part(start))
    val, G = eng.value_grad(w)
    alpha = 1.0
    for _ in range(iters):
        Gp = eng.plus_part(G)
        tangent = Gp - eng.inner(Gp, w) / r**2 * w
        tt = eng.inner(tangent, tangent)
        if math.sqrt(tt) <= 1e-9 * (1.0 + abs(val)):
            break
        while alpha > 1e-12:
            w_new = r * _normalize(eng, w - alpha * tangent)
            val_new, G_new = eng.value_grad(w_new)
            if val_new <= val - 1e-4 * alpha * tt:
                break
            alpha *= 0.5
        else:
            break
        if val - val_new <= 1e-15 * (1.0 + abs(val)):
            w, val, G = w_new, val_new, G_new
            break
        Gp_new = eng.plus_part(G_new)
        t_new = Gp_new - eng.inner(Gp_new, w_new) / r**2 * w_new
        s, y = w_new - w, t_new - tangent
        sy = eng.inner(s, y)
        alpha = min(max(eng.inner(s, s) / sy, 1e-6), 1e6) if sy > 0 else 2 * alpha
        w, val, G = w_new, val_new, G_new
    return val


def _sphere_starts(ctx: FunctionalContext, eng: _Engine, u: np.ndarray | None, n_random: int,
                   rng: np.random.Generator) -> list[np.ndarray]:
    starts = [] if u is None else [u]
    base = initial_guess(ctx, 1.0)
    starts.append(eng.eig(base.coefficients))
    t = ctx.grid.times()
    shape = base.values()[np.argmin(np.abs(t))]
    for width in (0.25, 4.0):
        vals = np.exp(-(t / width) ** 2)[:, None] * shape[None, :]
        starts.append(eng.eig(ctx.grid.from_values(vals)))
    for _ in range(n_random):
        starts.append(eng.eig(random_coefficients(ctx.grid, rng, decay=1.0)))
    return [s for s in starts if eng.norm(eng.plus_part(s)) > 0]


def _boundary_sup(eng: _Engine, u: np.ndarray, R: float, minus_dirs: list[np.ndarray], n_angles: int) -> float:
    """Sampled sup over the cone boundary: the sphere of radius R and the X- ball."""
    best = -math.inf
    thetas = np.linspace(0.0, 0.5 * math.pi, n_angles)
    with np.errstate(over="ignore", invalid="ignore"):
        for e in minus_dirs:
            for th in thetas:
                v = eng.value(R * (math.cos(th) * u + math.sin(th) * e))
                best = max(best, v if np.isfinite(v) else -math.inf)
            for frac in (0.125, 0.25, 0.5):
                v = eng.value(frac * R * e)
                best = max(best, v if np.isfinite(v) else -math.inf)
    return best


def verify_linking_geometry(ctx: FunctionalContext, u: SplitState | None = None,
                            config: GeometryConfig = GeometryConfig(), inner: InnerResult | None = None,
                            sampler: SmallTripleSampler | None = None, threads: int = 1) -> LinkingGeometry:
    """Numerical certificate that the sphere in X+ links with the cone boundary.

    ``r`` maximises the sampled infimum over a dyadic scan below ``r_top``; ``R``
    doubles from ``2r`` until all boundary samples are nonpositive; ``delta``
    halves from ``r`` until the small-ball sup drops below the sphere infimum.
    The radius scan runs on ``threads`` workers; results do not depend on it.
    """
    eng = _Engine(ctx)
    rng = np.random.default_rng(config.seed)
    uc = None
    if u is not None:
        uc = eng.eig(u.coefficients)
        _check_direction(eng, uc)
    starts = _sphere_starts(ctx, eng, uc, config.sphere_starts, rng)

    radii = [config.r_top * 2.0 ** (-j) for j in range(config.r_levels)]

    def scan(r: float) -> tuple[float, float]:
        return r, min(_sphere_min(eng, r, s, config.sphere_iters) for s in starts)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            r_scan = list(pool.map(scan, radii))
    else:
        r_scan = [scan(r) for r in radii]
    r, inf_sphere = max(r_scan, key=lambda x: (x[1], -x[0]))
    if inf_sphere <= 0:
        return LinkingGeometry(r, inf_sphere, 2 * r, math.nan, r, math.nan, False, r_scan,
                               "no sphere radius with positive infimum")

    if uc is None:
        uc = _normalize(eng, eng.plus_part(starts[0]))
    minus_dirs = []
    if inner is not None and eng.norm(inner.minus) > 0:
        minus_dirs.append(_normalize(eng, inner.minus))
    for _ in range(config.boundary_dirs):
        m = eng.minus(eng.eig(random_coefficients(ctx.grid, rng, decay=1.0)))
        if eng.norm(m) > 0:
            minus_dirs.append(_normalize(eng, m))
    minus_dirs += [-m for m in minus_dirs]

    R = 2 * r
    sup_b = _boundary_sup(eng, uc, R, minus_dirs, config.boundary_angles)
    for _ in range(config.radius_doublings):
        if sup_b <= 0:
            break
        R *= 2
        sup_b = _boundary_sup(eng, uc, R, minus_dirs, config.boundary_angles)

    if sampler is None:
        sampler = SmallTripleSampler(ctx, n_dirs=config.delta_dirs, top=r, n_scales=config.delta_scales,
                                     seed=config.seed + 1, extra=[eng.state(uc)])
    delta = r
    sup_s = sampler(delta)
    for _ in range(config.delta_halvings):
        if sup_s < inf_sphere:
            break
        delta /= 2
        sup_s = sampler(delta)

    reasons = []
    if sup_b > 0:
        reasons.append(f"boundary sup {sup_b:.3e} > 0 at R cap")
    if sup_s >= inf_sphere:
        reasons.append("small-ball sup not below sphere infimum")
    valid = inf_sphere > max(sup_b, sup_s) and sup_b <= 0
    return LinkingGeometry(r, inf_sphere, R, sup_b, delta, sup_s, valid, r_scan, "; ".join(reasons))


# --- pipeline --------------------------------------------------------------------


def solve(ctx: FunctionalContext, config: SolverConfig = SolverConfig(),
          geometry: GeometryConfig | None = GeometryConfig(), warm_start: SolveResult | None = None,
          threads: int = 1) -> SolveResult:
    """Minimax solve followed by a geometry certificate at the final direction."""
    result = outer_minimize(ctx, config=config, warm_start=warm_start)
    if geometry is None or any(f.startswith("step2_violation") for f in result.flags):
        return result
    eng = _Engine(ctx)
    inner = InnerResult(result.t, result.inner_minus, result.level, np.zeros_like(result.inner_minus), 0.0, 0,
                        True, False, eng)
    geo = verify_linking_geometry(ctx, result.direction, geometry, inner=inner, threads=threads)
    result.geometry = geo
    if not geo.valid:
        result.flags.append(f"geometry_failure: {geo.reason}; level not certified as a linking level")
    elif result.converged and result.triple < geo.delta / 2:
        result.flags.append("triple norm below delta/2 at convergence")
    return result
