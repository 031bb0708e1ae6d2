"""Sampled audit of the structural assumptions on F, G and the derived constants.

Every assumption is a radial-plus-direction statement, so checks run on a
log-spaced radial grid times a fixed set of unit directions (coordinate axes
first, then seeded Gaussian directions).  Limit-type statements cannot be
proven by sampling; when their trend is right but the decision threshold is not
reached inside the sampled range the verdict is ``inconclusive``.

Constants hidden behind ``<~`` in the assumptions, the constant ``C`` of the
L^p bound and the ``gamma`` of the boundedness estimate are either fitted or
configurable (default 1) and are flagged as heuristic in reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .problem import HyperbolicityCertificate, NonlinearitySpec, ProblemSpec, WeightSpec
from .spectral import assemble_symbol, compute_mu0, estimate_kappa, make_grid

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass(frozen=True)
class AuditConfig:
    r_min: float = 1e-3
    r_max: float = 1e3
    n_radii: int = 200
    n_dirs: int = 64
    n_w: int = 4
    seed: int = 0
    growth_threshold: float = 10.0
    small_threshold: float = 1e-2
    mono_tol: float = 1e-10
    ar_rtol: float = 1e-12
    kappa_samples: int = 200
    grid_T: int = 20
    grid_M: int = 64
    gamma_proof: float = 1.0
    C_const: float = 1.0
    gamma_grid: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0)

    def doubled(self) -> AuditConfig:
        from dataclasses import replace

        return replace(self, n_radii=2 * self.n_radii, n_dirs=2 * self.n_dirs, n_w=2 * self.n_w)


@dataclass(frozen=True, eq=False)
class Samples:
    radii: np.ndarray
    dirs: np.ndarray
    w: np.ndarray

    @property
    def points(self) -> np.ndarray:
        """All sampled points, shape ``(n_radii, n_dirs, dim)``."""
        return self.radii[:, None, None] * self.dirs[None]


def make_samples(dim: int, config: AuditConfig = AuditConfig()) -> Samples:
    if config.n_radii <= 0 or config.n_dirs <= 0:
        raise ConfigurationError("sample sets must be nonempty")
    rng = np.random.default_rng(config.seed)
    radii = np.geomspace(config.r_min, config.r_max, config.n_radii)
    axes = np.concatenate([np.eye(dim), -np.eye(dim)])
    extra = rng.standard_normal((max(config.n_dirs - len(axes), 0), dim))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    dirs = np.concatenate([axes, extra])[: config.n_dirs]
    w = rng.standard_normal((config.n_w, dim))
    return Samples(radii, dirs, w)


@dataclass
class Verdict:
    name: str
    status: str
    witness: list[float] | None = None
    detail: dict = field(default_factory=dict)
    heuristic: bool = False

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return {"status": self.status, "witness": self.witness, "detail": self.detail,
                "heuristic": self.heuristic}


def _fail(name, z, **detail) -> Verdict:
    return Verdict(name, FAIL, [float(x) for x in np.ravel(z)], detail)


def _dot(a, b):
    return np.sum(a * b, axis=-1)


# --- growth constants ------------------------------------------------------------


@dataclass(frozen=True)
class GrowthConstants:
    epsilon: float
    C_f_eps: float
    C_g_eps: float
    C_F_eps: float
    C_G_eps: float
    C_eps: float
    C_eps_raw: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fit_growth_constants(nl: NonlinearitySpec, epsilon: float, samples: Samples) -> GrowthConstants:
    """Smallest constants making the sampled growth bounds hold at ``epsilon``.

    ``C_eps`` is the largest ``c`` with ``F >= c|z|^q - eps|z|^2`` on the samples,
    clamped so that ``C_eps <= C_G_eps``.
    """
    if not epsilon > 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    if samples.radii.size == 0 or samples.dirs.size == 0:
        raise ConfigurationError("empty sample set")
    z = samples.points
    r = samples.radii[:, None]
    p, q = nl.p, nl.q
    f_abs = np.linalg.norm(nl.f(z), axis=-1)
    g_abs = np.linalg.norm(nl.g(z), axis=-1)
    C_f = float(np.max(np.maximum(0.0, f_abs - epsilon * r) / r ** (p - 1)))
    C_g = float(np.max(np.maximum(0.0, g_abs - epsilon * r) / r ** (q - 1)))
    C_F = float(np.max(np.maximum(0.0, nl.F(z) - epsilon * r**2) / r**p))
    C_G = float(np.max(np.maximum(0.0, nl.G(z) - epsilon * r**2) / r**q))
    C_raw = float(np.min((nl.F(z) + epsilon * r**2) / r**q))
    return GrowthConstants(epsilon, C_f, C_g, C_F, C_G, min(C_raw, C_G), C_raw)


# --- assumption checks -----------------------------------------------------------


def _check_odd(name: str, field_fn, samples: Samples) -> Verdict | None:
    z = samples.points
    fz = field_fn(z)
    err = np.linalg.norm(field_fn(-z) + fz, axis=-1)
    bad = err > 1e-12 * np.maximum(1.0, np.linalg.norm(fz, axis=-1))
    if np.any(bad):
        i = np.unravel_index(np.argmax(bad), bad.shape)
        return _fail(name, z[i], reason="not odd", error=float(err[i]))
    return None


def _check_growth(name: str, field_fn, exponent: float, samples: Samples) -> Verdict:
    """``|h(z)| <~ 1 + |z|^exponent``: log-log slope over the top decade."""
    odd = _check_odd(name, field_fn, samples)
    if odd is not None:
        return odd
    z = samples.points
    m = np.max(np.linalg.norm(field_fn(z), axis=-1), axis=1)
    r = samples.radii
    top = r >= r[-1] / 10
    i0 = int(np.argmax(top))
    const = float(np.max(m / (1 + r**exponent)))
    detail = {"fitted_constant": const, "exponent": exponent}
    if m[-1] == 0.0:
        return Verdict(name, PASS, detail=detail, heuristic=True)
    if m[i0] == 0.0:
        return _fail(name, samples.radii[-1] * samples.dirs[0], reason="growth from zero", **detail)
    slope = float(np.log(m[-1] / m[i0]) / np.log(r[-1] / r[i0]))
    detail["slope"] = slope
    if slope > exponent + 1e-6:
        j = int(np.argmax(np.linalg.norm(field_fn(z[-1]), axis=-1)))
        return _fail(name, z[-1, j], reason="grows faster than allowed", **detail)
    return Verdict(name, PASS, detail=detail, heuristic=True)


def _check_small(name: str, field_fn, samples: Samples, config: AuditConfig) -> Verdict:
    """``h(z) = o(|z|)`` at the origin."""
    z = samples.points
    r = samples.radii
    ratio = np.max(np.linalg.norm(field_fn(z), axis=-1), axis=1) / r
    low = r <= r[0] * 10
    i1 = int(np.flatnonzero(low)[-1])
    detail = {"ratio_at_rmin": float(ratio[0]), "ratio_at_10rmin": float(ratio[i1])}
    decreasing = ratio[0] < ratio[i1] or ratio[0] == 0.0
    if not decreasing:
        return _fail(name, z[0, 0], reason="|h(z)|/|z| does not decrease toward 0", **detail)
    if ratio[0] <= config.small_threshold:
        return Verdict(name, PASS, detail=detail)
    return Verdict(name, INCONCLUSIVE, detail=detail)


def check_F1_F2(nl: NonlinearitySpec, samples: Samples, config: AuditConfig = AuditConfig()) -> dict[str, Verdict]:
    return {
        "F1": _check_growth("F1", nl.f, nl.p - 1, samples),
        "F2": _check_small("F2", nl.f, samples, config),
    }


def _monotone_ratio(field_fn, exponent_shift: float, samples: Samples) -> np.ndarray:
    """``zeta -> h(zeta d).d / zeta^(q-1)`` along each direction, shape ``(radii, dirs)``."""
    z = samples.points
    return _dot(field_fn(z), samples.dirs[None]) / samples.radii[:, None] ** exponent_shift


def check_F3_F4_F5(nl: NonlinearitySpec, samples: Samples, config: AuditConfig = AuditConfig()) -> dict[str, Verdict]:
    z = samples.points
    r = samples.radii
    Fz = nl.F(z)
    out: dict[str, Verdict] = {}

    # (F3): F >= 0 and F(R d)/R^q -> infinity along every direction
    neg = Fz < 0
    if np.any(neg):
        i = np.unravel_index(np.argmax(neg), neg.shape)
        out["F3"] = _fail("F3", z[i], reason="F negative", value=float(Fz[i]))
    else:
        ratio = Fz / r[:, None] ** nl.q
        top = r >= r[-1] / 10
        tail = ratio[top]
        increasing = np.all(np.diff(tail, axis=0) > 0, axis=0)
        detail = {"min_ratio_at_rmax": float(np.min(ratio[-1]))}
        if not np.all(increasing):
            j = int(np.argmin(increasing))
            out["F3"] = _fail("F3", z[-1, j], reason="F/|z|^q not increasing", **detail)
        elif np.min(ratio[-1]) > config.growth_threshold:
            out["F3"] = Verdict("F3", PASS, detail=detail)
        else:
            out["F3"] = Verdict("F3", INCONCLUSIVE, detail=detail)

    # (F4): zeta -> f(zeta d).d / zeta^(q-1) nondecreasing
    h = _monotone_ratio(nl.f, nl.q - 1, samples)
    d = np.diff(h, axis=0)
    bad = d < -config.mono_tol * np.maximum(1.0, np.abs(h[1:]))
    if np.any(bad):
        i = np.unravel_index(np.argmax(bad), bad.shape)
        out["F4"] = _fail("F4", z[i[0] + 1, i[1]], reason="ratio decreases", drop=float(d[i]))
    else:
        out["F4"] = Verdict("F4", PASS)

    # (F5): |f(z).z| >~ |z|^p for |z| >= rho
    big = r >= nl.rho
    if not np.any(big):
        out["F5"] = Verdict("F5", INCONCLUSIVE, detail={"reason": "no samples beyond rho"})
    else:
        c = np.abs(_dot(nl.f(z[big]), z[big])) / r[big, None] ** nl.p
        c5 = float(np.min(c))
        if c5 > 0:
            out["F5"] = Verdict("F5", PASS, detail={"c5": c5}, heuristic=True)
        else:
            i = np.unravel_index(np.argmin(c), c.shape)
            out["F5"] = _fail("F5", z[big][i], reason="f(z).z vanishes", c5=c5)
    return out


def check_G_and_FG(nl: NonlinearitySpec, samples: Samples, config: AuditConfig = AuditConfig()) -> dict[str, Verdict]:
    z = samples.points
    r = samples.radii
    out = {
        "G1": _check_growth("G1", nl.g, nl.q - 1, samples),
        "G2": _check_small("G2", nl.g, samples, config),
    }

    # (G3): g(z).z >= 0 and zeta -> g(zeta d).d / zeta^(q-1) nonincreasing
    gz = _dot(nl.g(z), z)
    scale = np.linalg.norm(nl.g(z), axis=-1) * r[:, None]
    neg = gz < -config.ar_rtol * scale
    h = _monotone_ratio(nl.g, nl.q - 1, samples)
    d = np.diff(h, axis=0)
    up = d > config.mono_tol * np.maximum(1.0, np.abs(h[1:]))
    if np.any(neg):
        i = np.unravel_index(np.argmax(neg), neg.shape)
        out["G3"] = _fail("G3", z[i], reason="g(z).z < 0", value=float(gz[i]))
    elif np.any(up):
        i = np.unravel_index(np.argmax(up), up.shape)
        out["G3"] = _fail("G3", z[i[0] + 1, i[1]], reason="ratio increases", rise=float(d[i]))
    else:
        out["G3"] = Verdict("G3", PASS)

    # (FG): |f(z).w| >~ |g(z).w| |z|^(p-q) for |z| >= rho
    big = r >= nl.rho
    zb = z[big].reshape(-1, nl.dim)
    rb = np.linalg.norm(zb, axis=-1)
    fw = np.abs(nl.f(zb) @ samples.w.T)
    gw = np.abs(nl.g(zb) @ samples.w.T)
    keep = gw >= 1e-14
    if not np.any(keep):
        out["FG"] = Verdict("FG", INCONCLUSIVE, detail={"reason": "g(z).w vanishes on all samples"})
    else:
        ratio = np.where(keep, fw / np.where(keep, gw, 1.0) / rb[:, None] ** (nl.p - nl.q), np.inf)
        c_fg = float(np.min(ratio))
        if c_fg > 0:
            out["FG"] = Verdict("FG", PASS, detail={"c_fg": c_fg}, heuristic=True)
        else:
            i = np.unravel_index(np.argmin(ratio), ratio.shape)
            out["FG"] = _fail("FG", zb[i[0]], reason="f(z).w vanishes", w=samples.w[i[1]].tolist())
    return out


def check_AR(nl: NonlinearitySpec, samples: Samples, config: AuditConfig = AuditConfig()) -> dict[str, Verdict]:
    """``0 <= qF <= f.z`` and ``0 <= g.z <= qG`` pointwise."""
    z = samples.points
    tol = config.ar_rtol
    qF = nl.q * nl.F(z)
    fz = _dot(nl.f(z), z)
    qG = nl.q * nl.G(z)
    gz = _dot(nl.g(z), z)
    out = {}
    s_f = np.maximum(np.abs(qF), np.abs(fz))
    bad_f = (qF < -tol * s_f) | (qF > fz + tol * s_f)
    if np.any(bad_f):
        i = np.unravel_index(np.argmax(bad_f), bad_f.shape)
        out["AR_f"] = _fail("AR_f", z[i], qF=float(qF[i]), fz=float(fz[i]))
    else:
        out["AR_f"] = Verdict("AR_f", PASS, detail={"samples": int(qF.size)})
    s_g = np.maximum(np.abs(qG), np.abs(gz))
    bad_g = (gz < -tol * s_g) | (gz > qG + tol * s_g)
    if np.any(bad_g):
        i = np.unravel_index(np.argmax(bad_g), bad_g.shape)
        out["AR_g"] = _fail("AR_g", z[i], gz=float(gz[i]), qG=float(qG[i]))
    else:
        out["AR_g"] = Verdict("AR_g", PASS, detail={"samples": int(qG.size)})
    return out


# --- thresholds and the boundedness budget ---------------------------------------


def ratio_sup(nl: NonlinearitySpec, rho: float, dirs: np.ndarray) -> float:
    """``sup_{|w| = rho} g(w).w / f(w).w`` over sampled directions (``inf`` if ``f(w).w = 0``)."""
    w = rho * dirs
    fw = _dot(nl.f(w), w)
    gw = _dot(nl.g(w), w)
    if np.any(fw == 0):
        return float("inf")
    return float(np.max(gw / fw))


def e_value(lam: float, ratio: float) -> float:
    """``E(lam, rho) = 1 - lam * ratio_sup``."""
    if lam == 0:
        return 1.0
    return 1.0 - lam * ratio


def step2_epsilon(mu0: float, weight: WeightSpec) -> float:
    return mu0**2 / (4 * (weight.gamma0 + weight.gamma_sup))


def lambda_threshold_step2(consts: GrowthConstants, weight: WeightSpec, kappa: float, q: float) -> float:
    """``(Gamma0 / |Gamma|_inf) (C_eps / C_G_eps) / (2 kappa)^q``."""
    if consts.C_G_eps <= 0:
        return 0.0
    return (weight.gamma0 / weight.gamma_sup) * (consts.C_eps / consts.C_G_eps) / (2 * kappa) ** q


def phi_small_sup(nl: NonlinearitySpec, lam: float, rho: float, dirs: np.ndarray, n: int = 64) -> float:
    """``sup_{0 < |v| < rho} |Phi(v)| / |v|^2`` sampled."""
    radii = np.geomspace(1e-3 * rho, rho, n, endpoint=False)
    v = radii[:, None, None] * dirs[None]
    phi = 0.5 * _dot(nl.f(v), v) - nl.F(v) + lam * nl.G(v) - 0.5 * lam * _dot(nl.g(v), v)
    return float(np.max(np.abs(phi) / radii[:, None] ** 2))


@dataclass
class Condition:
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, "ok": self.ok}


@dataclass
class BoundednessBudget:
    Lambda: float
    Lambda0: float
    gamma_proof: float
    C_const: float
    rho_selected: float
    lambda_selected: float
    epsilon: float
    E: float
    D: float
    phi_sup: float
    ratio_sup: float
    conditions: dict[str, Condition]
    accepted: bool
    heuristic: bool = True

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "conditions"}
        d["conditions"] = {k: c.to_dict() for k, c in self.conditions.items()}
        return d


def boundedness_budget(nl: NonlinearitySpec, weight: WeightSpec, mu0: float, kappa: float,
                       rho: float, lam: float, samples: Samples, gamma_proof: float = 1.0,
                       C_const: float = 1.0) -> BoundednessBudget:
    """Evaluate the epsilon/rho/lambda selection recipe of the boundedness estimate."""
    p, q = nl.p, nl.q
    sup_g = weight.gamma_sup
    Lambda0 = mu0**2 / (2 * gamma_proof * kappa * sup_g)
    eps = Lambda0 / 16
    consts = fit_growth_constants(nl, eps, samples)
    rs = ratio_sup(nl, rho, samples.dirs)
    E = e_value(lam, rs)
    lam_rho = lam / rho ** (p - q)
    D = (1 + lam_rho) * 2 * kappa * sup_g
    phi = phi_small_sup(nl, lam, rho, samples.dirs)
    if E > 0:
        Lambda = (eps * (1 + lam) + consts.C_f_eps * rho ** (p - 2) + lam * consts.C_g_eps * rho ** (q - 2)
                  + (1 + lam_rho) * (rho ** (p - 2) + C_const * sup_g * phi / E))
    else:
        Lambda = float("inf")
    conditions = {
        "phi_small": Condition(2 * C_const * sup_g * phi, Lambda0 / 16),
        "f_rho": Condition((consts.C_f_eps + 1) * rho ** (p - 2), Lambda0 / 8),
        "g_rho": Condition((consts.C_g_eps + 1) * rho ** (q - 2), Lambda0 / 8),
        "E_half": Condition(0.5, E),
        "lambda_rho": Condition(lam_rho, 1.0),
        "Lambda_half": Condition(Lambda, Lambda0 / 2),
    }
    accepted = bool(E > 0 and Lambda < Lambda0 and E >= 0.5 and lam_rho <= 1.0)
    return BoundednessBudget(Lambda, Lambda0, gamma_proof, C_const, rho, lam, eps, E, D, phi, rs,
                             conditions, accepted)


# --- full audit ------------------------------------------------------------------


@dataclass
class HypothesisReport:
    verdicts: dict[str, Verdict]
    hyperbolicity: HyperbolicityCertificate
    mu0: float
    kappa: float
    kappa_samples: int
    constants: GrowthConstants
    ratio_sup: float
    E: float
    lambda_threshold_step2: float
    budget: BoundednessBudget
    budget_gamma_grid: dict[float, bool]
    lam: float
    rho: float
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failures": list(self.failures),
            "lambda": self.lam,
            "rho": self.rho,
            "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
            "hyperbolicity": self.hyperbolicity.to_dict(),
            "mu0": self.mu0,
            "kappa": {"value": self.kappa, "samples": self.kappa_samples, "heuristic": True},
            "constants": self.constants.to_dict(),
            "ratio_sup": self.ratio_sup,
            "E": self.E,
            "lambda_threshold_step2": self.lambda_threshold_step2,
            "budget": self.budget.to_dict(),
            "budget_gamma_grid": {repr(k): v for k, v in self.budget_gamma_grid.items()},
        }


def spectral_constants(problem: ProblemSpec, config: AuditConfig = AuditConfig()) -> tuple[float, float]:
    """``(mu0, kappa_hat)`` on the audit grid; kappa is estimated in ``L^q``."""
    grid = make_grid(config.grid_T, config.grid_M, problem.dim)
    symbol = assemble_symbol(grid, problem.A)
    kappa = estimate_kappa(symbol, grid, s=problem.nonlinearity.q, samples=config.kappa_samples,
                           seed=config.seed)
    return compute_mu0(symbol), kappa.value


def audit(problem: ProblemSpec, config: AuditConfig = AuditConfig()) -> HypothesisReport:
    nl = problem.nonlinearity
    weight = problem.weight
    samples = make_samples(nl.dim, config)
    cert = problem.hyperbolicity
    verdicts: dict[str, Verdict] = {
        "A": Verdict("A", PASS if cert.passed else FAIL,
                     None if cert.passed else [float(x) for e in cert.eigenvalues for x in (e.real, e.imag)],
                     {"margin": cert.margin}),
        "Gamma": Verdict("Gamma", PASS, detail={"gamma0": weight.gamma0, "gamma_sup": weight.gamma_sup}),
    }
    verdicts.update(check_F1_F2(nl, samples, config))
    verdicts.update(check_F3_F4_F5(nl, samples, config))
    verdicts.update(check_G_and_FG(nl, samples, config))
    verdicts.update(check_AR(nl, samples, config))

    if cert.passed:
        mu0, kappa = spectral_constants(problem, config)
    else:
        mu0, kappa = 0.0, 1.0
    failures = [f"{k}: {v.status}" for k, v in verdicts.items() if not v.passed]

    eps = step2_epsilon(mu0, weight) if mu0 > 0 else 1e-3
    consts = fit_growth_constants(nl, eps, samples)
    threshold = lambda_threshold_step2(consts, weight, kappa, nl.q)
    if not problem.lam < threshold:
        failures.append(f"lambda={problem.lam:g} not below step-2 threshold {threshold:.6g}")
    rs = ratio_sup(nl, nl.rho, samples.dirs)
    E = e_value(problem.lam, rs)
    mu0_b = mu0 if mu0 > 0 else 1.0
    budget = boundedness_budget(nl, weight, mu0_b, kappa, nl.rho, problem.lam, samples,
                                config.gamma_proof, config.C_const)
    if not budget.accepted:
        bad = [k for k, c in budget.conditions.items() if not c.ok]
        failures.append(f"boundedness budget rejected ({', '.join(bad) or 'Lambda >= Lambda0'})")
    grid_budgets = {
        g: boundedness_budget(nl, weight, mu0_b, kappa, nl.rho, problem.lam, samples, g, config.C_const).accepted
        for g in config.gamma_grid
    }
    return HypothesisReport(verdicts, cert, mu0, kappa, config.kappa_samples, consts, rs, E, threshold,
                            budget, grid_budgets, problem.lam, nl.rho, failures)
