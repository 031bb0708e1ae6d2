"""Hamiltonian data: the matrix A, the periodic weight Gamma and the nonlinearities F, G.

The system is ``z' = J grad_z H(z, t)`` with

    H(z, t) = 1/2 A z . z + Gamma(t) (F(z) - lam G(z)),

and ``J = [[0, -I], [I, 0]]``.  All callables are vectorised over a trailing
component axis: ``F(z)`` maps an array of shape ``(..., 2N)`` to ``(...)`` and
``f(z)`` maps it to ``(..., 2N)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)

ScalarField = Callable[[np.ndarray], np.ndarray]
VectorField = Callable[[np.ndarray], np.ndarray]

TOL_HYP = 1e-10
TOL_SYMMETRY = 1e-12
TOL_GRADIENT_CHECK = 1e-5
N_WEIGHT_SAMPLES = 10_000


def symplectic_matrix(dim: int) -> np.ndarray:
    """Standard symplectic matrix ``[[0, -I], [I, 0]]`` of size ``dim``."""
    if dim <= 0 or dim % 2:
        raise ConfigurationError(f"dimension must be a positive even integer, got {dim}")
    n = dim // 2
    J = np.zeros((dim, dim))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return J


def _gradient_mismatch(F: ScalarField, f: VectorField, dim: int, seed: int = 0) -> float:
    """Largest relative deviation between ``f`` and central differences of ``F``."""
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((32, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.geomspace(0.1, 10.0, 32)
    worst = 0.0
    for r, d in zip(radii, dirs):
        z = r * d
        h = 1e-6 * max(1.0, r)
        fd = np.empty(dim)
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = h
            fd[i] = (F(z + e) - F(z - e)) / (2 * h)
        fz = np.asarray(f(z), dtype=float)
        err = np.linalg.norm(fd - fz) / max(np.linalg.norm(fz), 1e-8)
        worst = max(worst, float(err))
    return worst


@dataclass(frozen=True)
class NonlinearitySpec:
    """Nonlinear parts ``F`` and ``G`` with their gradients ``f`` and ``g``.

    ``p`` and ``q`` are the growth exponents (``2 < q < p``) and ``rho`` the
    radius beyond which ``|f(z).z| >~ |z|^p`` is required.
    """

    dim: int
    F: ScalarField
    f: VectorField
    G: ScalarField
    g: VectorField
    p: float
    q: float
    rho: float
    name: str = "custom"
    check_gradients: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.dim <= 0 or self.dim % 2:
            raise ConfigurationError(f"dimension must be a positive even integer, got {self.dim}")
        if not 2 < self.q < self.p:
            raise ConfigurationError(f"exponents must satisfy 2 < q < p, got p={self.p}, q={self.q}")
        if not self.rho > 0:
            raise ConfigurationError(f"rho must be positive, got {self.rho}")
        zero = np.zeros(self.dim)
        if float(self.F(zero)) != 0.0 or float(self.G(zero)) != 0.0:
            raise ConfigurationError("F(0) and G(0) must vanish")
        if self.check_gradients:
            for label, value, grad in (("f", self.F, self.f), ("g", self.G, self.g)):
                err = _gradient_mismatch(value, grad, self.dim)
                if err > TOL_GRADIENT_CHECK:
                    raise ConfigurationError(
                        f"{label} is not the gradient of {label.upper()}: "
                        f"finite-difference mismatch {err:.3e}"
                    )


def builtin_power_pair(p: float, q: float, dim: int, rho: float = 0.02) -> NonlinearitySpec:
    """``F = |z|^p / p`` and ``G = |z|^q / q``."""
    if not 2 < q < p:
        raise ConfigurationError(f"exponents must satisfy 2 < q < p, got p={p}, q={q}")

    def F(z):
        return np.linalg.norm(z, axis=-1) ** p / p

    def f(z):
        r = np.linalg.norm(z, axis=-1, keepdims=True)
        return r ** (p - 2) * z

    def G(z):
        return np.linalg.norm(z, axis=-1) ** q / q

    def g(z):
        r = np.linalg.norm(z, axis=-1, keepdims=True)
        return r ** (q - 2) * z

    return NonlinearitySpec(dim, F, f, G, g, float(p), float(q), float(rho), name="power")


def builtin_quartic_first(dim: int = 2, q: float = 3.0, rho: float = 0.02) -> NonlinearitySpec:
    """Benchmark nonlinearity ``F = z_1^4 / 4`` paired with ``G = |z|^q / q``.

    With ``A = diag(-1, 1)`` and ``Gamma = 1`` the Hamiltonian flow reduces to
    ``q'' = q - q^3``, whose homoclinic orbit is ``(sqrt2 sech t, sqrt2 sech t tanh t)``.
    """
    p = 4.0

    def F(z):
        return 0.25 * z[..., 0] ** 4

    def f(z):
        out = np.zeros_like(z, dtype=float)
        out[..., 0] = z[..., 0] ** 3
        return out

    def G(z):
        return np.linalg.norm(z, axis=-1) ** q / q

    def g(z):
        r = np.linalg.norm(z, axis=-1, keepdims=True)
        return r ** (q - 2) * z

    return NonlinearitySpec(dim, F, f, G, g, p, float(q), float(rho), name="quartic_first")


@dataclass(frozen=True)
class WeightSpec:
    """1-periodic positive weight with declared bounds.

    The declared ``gamma0`` (infimum) and ``gamma_sup`` (supremum) are checked
    against samples over one period and replaced by the sampled extremes when
    they are violated.
    """

    gamma: Callable[[np.ndarray], np.ndarray]
    gamma0: float
    gamma_sup: float
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.arange(N_WEIGHT_SAMPLES) / N_WEIGHT_SAMPLES
        vals = np.asarray(self.gamma(t), dtype=float)
        shifted = np.asarray(self.gamma(t + 1.0), dtype=float)
        if not np.allclose(vals, shifted, rtol=1e-12, atol=1e-12):
            raise ConfigurationError("weight is not 1-periodic on sampled points")
        lo, hi = float(vals.min()), float(vals.max())
        if lo <= 0:
            raise ConfigurationError(f"weight must be positive, sampled minimum {lo}")
        slack = 1e-12 * max(1.0, abs(hi))
        if lo < self.gamma0 - slack:
            logger.warning("declared gamma0=%g exceeds sampled infimum %g; tightening", self.gamma0, lo)
            object.__setattr__(self, "gamma0", lo)
        if hi > self.gamma_sup + slack:
            logger.warning("declared sup=%g below sampled supremum %g; tightening", self.gamma_sup, hi)
            object.__setattr__(self, "gamma_sup", hi)
        if not 0 < self.gamma0 <= self.gamma_sup:
            raise ConfigurationError("need 0 < gamma0 <= gamma_sup")

    def __call__(self, t):
        return np.asarray(self.gamma(np.asarray(t, dtype=float)), dtype=float)


def constant_weight(value: float = 1.0) -> WeightSpec:
    value = float(value)
    return WeightSpec(
        lambda t: np.full(np.shape(t), value), value, value, name="constant", params={"value": value}
    )


def cosine_weight(mean: float, amplitude: float) -> WeightSpec:
    """``Gamma(t) = mean + amplitude * cos(2 pi t)``."""
    mean, amplitude = float(mean), float(amplitude)
    if mean - abs(amplitude) <= 0:
        raise ConfigurationError("cosine weight must stay positive: need mean > |amplitude|")
    return WeightSpec(
        lambda t: mean + amplitude * np.cos(2 * np.pi * np.asarray(t)),
        mean - abs(amplitude),
        mean + abs(amplitude),
        name="cosine",
        params={"mean": mean, "amplitude": amplitude},
    )


@dataclass(frozen=True)
class HyperbolicityCertificate:
    eigenvalues: np.ndarray
    margin: float
    passed: bool
    tol: float = TOL_HYP

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
            "margin": self.margin,
            "passed": self.passed,
            "tol": self.tol,
        }


def check_hyperbolic(A, tol: float = TOL_HYP) -> HyperbolicityCertificate:
    """Spectrum of ``JA`` and its distance from the imaginary axis.

    A violation is reported through ``passed=False``, not raised.
    """
    A = np.asarray(A, dtype=float)
    J = symplectic_matrix(A.shape[0])
    try:
        eig = np.linalg.eigvals(J @ A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition of JA failed: {exc}") from exc
    eig = eig[np.lexsort((eig.imag, eig.real))]
    margin = float(np.min(np.abs(eig.real)))
    return HyperbolicityCertificate(eig, margin, margin > tol, tol)


@dataclass(frozen=True)
class ProblemSpec:
    A: np.ndarray
    nonlinearity: NonlinearitySpec
    weight: WeightSpec
    lam: float = 0.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConfigurationError("A must be a square matrix")
        if A.shape[0] != self.nonlinearity.dim:
            raise ConfigurationError(
                f"A is {A.shape[0]}x{A.shape[0]} but nonlinearity has dim {self.nonlinearity.dim}"
            )
        if np.max(np.abs(A - A.T)) > TOL_SYMMETRY:
            raise ConfigurationError("A must be symmetric")
        if self.lam < 0:
            raise ConfigurationError(f"lambda must be nonnegative, got {self.lam}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @cached_property
    def J(self) -> np.ndarray:
        return symplectic_matrix(self.dim)

    @cached_property
    def hyperbolicity(self) -> HyperbolicityCertificate:
        return check_hyperbolic(self.A)

    def with_lambda(self, lam: float) -> ProblemSpec:
        return replace(self, lam=float(lam))

    def to_dict(self) -> dict:
        nl = self.nonlinearity
        return {
            "A": self.A.tolist(),
            "lambda": self.lam,
            "nonlinearity": {"kind": nl.name, "p": nl.p, "q": nl.q, "rho": nl.rho},
            "weight": {"kind": self.weight.name, **self.weight.params},
        }


def eval_hamiltonian(spec: ProblemSpec, z, t) -> np.ndarray | float:
    """``1/2 A z.z + Gamma(t) (F(z) - lam G(z))``, vectorised over leading axes of ``z``."""
    z = np.asarray(z, dtype=float)
    nl = spec.nonlinearity
    quad = 0.5 * np.einsum("...i,ij,...j->...", z, spec.A, z)
    val = quad + spec.weight(t) * (nl.F(z) - spec.lam * nl.G(z))
    return float(val) if np.ndim(val) == 0 else val


BUILTIN_NONLINEARITIES = {
    "power": builtin_power_pair,
    "quartic_first": builtin_quartic_first,
}


def _nonlinearity_from_dict(d: dict, dim: int, top: dict) -> NonlinearitySpec:
    kind = d.get("kind", "power")
    p = d.get("p", top.get("p"))
    q = d.get("q", top.get("q"))
    rho = d.get("rho", top.get("rho", 0.02))
    if kind == "power":
        if p is None or q is None:
            raise ConfigurationError("power nonlinearity requires exponents p and q")
        return builtin_power_pair(float(p), float(q), dim, float(rho))
    if kind == "quartic_first":
        return builtin_quartic_first(dim, float(q if q is not None else 3.0), float(rho))
    raise ConfigurationError(f"unknown nonlinearity kind {kind!r}")


def _weight_from_dict(d: dict) -> WeightSpec:
    kind = d.get("kind", "constant")
    if kind == "constant":
        return constant_weight(d.get("value", 1.0))
    if kind == "cosine":
        return cosine_weight(d.get("mean", 1.0), d.get("amplitude", 0.0))
    raise ConfigurationError(f"unknown weight kind {kind!r}")


def problem_from_dict(d: dict[str, Any]) -> ProblemSpec:
    """Build a problem from its JSON document form."""
    if not isinstance(d, dict) or "A" not in d:
        raise ConfigurationError("problem document must be an object with key 'A'")
    try:
        A = np.array(d["A"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"cannot read matrix A: {exc}") from exc
    if A.ndim == 1:
        n = math.isqrt(A.size)
        if n * n != A.size:
            raise ConfigurationError("flat A must have a square number of entries")
        A = A.reshape(n, n)
    if A.ndim != 2:
        raise ConfigurationError("A must be a matrix")
    nl = _nonlinearity_from_dict(d.get("nonlinearity", {}), A.shape[0], d)
    weight = _weight_from_dict(d.get("weight", {}))
    return ProblemSpec(A, nl, weight, float(d.get("lambda", 0.0)))


def load_problem(path: str | Path) -> ProblemSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed problem file {path}: {exc}") from exc
    return problem_from_dict(doc)


def benchmark_problem() -> ProblemSpec:
    """``A = diag(-1, 1)``, ``Gamma = 1``, ``lam = 0``, ``F = q^4/4``."""
    return ProblemSpec(np.diag([-1.0, 1.0]), builtin_quartic_first(2), constant_weight(1.0), 0.0)


def power_problem(p: float = 4.0, q: float = 3.0, lam: float = 0.0, rho: float = 0.02) -> ProblemSpec:
    """Power pair on ``A = diag(-1, 1)`` with ``Gamma = 1``."""
    return ProblemSpec(np.diag([-1.0, 1.0]), builtin_power_pair(p, q, 2, rho), constant_weight(1.0), lam)
