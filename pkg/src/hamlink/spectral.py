"""Fourier discretisation on a periodic window and the per-mode symbol of ``-J z' - A z``.

A trajectory on ``[-T, T)`` is stored by its coefficients ``zhat[k]`` for
``k = -M..M`` (natural order, index ``k + M``) with respect to
``exp(i w_k t)``, ``w_k = pi k / T``.  Real trajectories satisfy
``zhat[-k] = conj(zhat[k])``.  In coefficient space the operator acts per
mode through the Hermitian matrix ``-i w_k J - A``, so the positive/negative
splitting, the norm ``||z||^2 = 2T sum zhat^* |M| zhat`` and every projector are
computed mode by mode from a batched eigendecomposition.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, HyperbolicityError, InputError, NumericalError
from .problem import TOL_HYP, symplectic_matrix

logger = logging.getLogger(__name__)

DEALIAS = 2
REALITY_TOL = 1e-10


@dataclass(frozen=True)
class SpectralGrid:
    T: int
    M: int
    dim: int

    @property
    def n(self) -> int:
        """Number of retained modes, equal to the number of collocation points."""
        return 2 * self.M + 1

    @cached_property
    def k(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    @cached_property
    def omega(self) -> np.ndarray:
        return np.pi * self.k / self.T

    @property
    def period(self) -> float:
        return 2.0 * self.T

    def times(self, npts: int | None = None) -> np.ndarray:
        npts = self.n if npts is None else npts
        return -self.T + np.arange(npts) * (self.period / npts)

    @property
    def n_fine(self) -> int:
        return DEALIAS * self.n

    @cached_property
    def fine_times(self) -> np.ndarray:
        return self.times(self.n_fine)

    def to_values(self, coeffs: np.ndarray, npts: int | None = None) -> np.ndarray:
        """Evaluate a real trajectory at ``npts`` equispaced points of the window."""
        npts = self.n if npts is None else npts
        if npts < self.n:
            raise InputError(f"need at least {self.n} points to represent the trajectory")
        half = np.zeros((npts // 2 + 1,) + coeffs.shape[1:], dtype=complex)
        sign = np.where(np.arange(self.M + 1) % 2, -1.0, 1.0)
        half[: self.M + 1] = coeffs[self.M :] * sign.reshape((-1,) + (1,) * (coeffs.ndim - 1))
        return np.fft.irfft(half, n=npts, axis=0) * npts

    def from_values(self, values: np.ndarray) -> np.ndarray:
        """Coefficients ``k = -M..M`` of equispaced real samples (``len >= n``)."""
        values = np.asarray(values, dtype=float)
        npts = values.shape[0]
        if npts < self.n:
            raise InputError(f"need at least {self.n} samples, got {npts}")
        half = np.fft.rfft(values, axis=0)[: self.M + 1] / npts
        sign = np.where(np.arange(self.M + 1) % 2, -1.0, 1.0)
        half = half * sign.reshape((-1,) + (1,) * (values.ndim - 1))
        out = np.empty((self.n,) + values.shape[1:], dtype=complex)
        out[self.M :] = half
        out[: self.M] = np.conj(half[:0:-1])
        out[self.M] = out[self.M].real
        return out

    def shift(self, coeffs: np.ndarray, s: float) -> np.ndarray:
        """Coefficients of ``t -> z(t + s)`` (exact circular translation)."""
        phase = np.exp(1j * self.omega * s)
        return coeffs * phase.reshape((-1,) + (1,) * (coeffs.ndim - 1))

    def derivative(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs * (1j * self.omega).reshape((-1,) + (1,) * (coeffs.ndim - 1))

    def to_dict(self) -> dict:
        return {"T": self.T, "M": self.M, "dim": self.dim}


def make_grid(T, M: int, dim: int) -> SpectralGrid:
    """Window ``[-T, T)`` with modes ``k = -M..M``.

    ``T`` must be an integer so that 1-periodic weights are commensurate with the
    window.  Values ``T < 4`` or ``M < 8`` are accepted with a warning; they are
    too coarse for solving but convenient for unit checks.
    """
    if isinstance(T, bool) or isinstance(M, bool):
        raise ConfigurationError("T and M must be numbers")
    if not np.isfinite(T) or float(T) != int(T):
        raise ConfigurationError(f"half-length T must be an integer, got {T}")
    if int(M) != M:
        raise ConfigurationError(f"mode count M must be an integer, got {M}")
    T, M = int(T), int(M)
    if T <= 0 or M <= 0:
        raise ConfigurationError(f"T and M must be positive, got T={T}, M={M}")
    if dim <= 0 or dim % 2:
        raise ConfigurationError(f"dim must be a positive even integer, got {dim}")
    if T < 4 or M < 8:
        logger.warning("grid T=%d, M=%d is below the recommended T>=4, M>=8", T, M)
    return SpectralGrid(T, M, dim)


def check_reality(coeffs: np.ndarray, tol: float = REALITY_TOL) -> None:
    scale = max(1.0, float(np.max(np.abs(coeffs))) if coeffs.size else 1.0)
    if np.max(np.abs(coeffs - np.conj(coeffs[::-1])), initial=0.0) > tol * scale:
        raise InputError("coefficients do not represent a real trajectory")


@dataclass(frozen=True, eq=False)
class SplitState:
    """Coefficients of a real trajectory together with its ``X+``/``X-`` parts."""

    grid: SpectralGrid
    coefficients: np.ndarray
    plus_part: np.ndarray
    minus_part: np.ndarray
    norm_plus: float
    norm_minus: float

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.norm_plus**2 + self.norm_minus**2))

    def values(self, npts: int | None = None) -> np.ndarray:
        return self.grid.to_values(self.coefficients, npts)


@dataclass(frozen=True, eq=False)
class OperatorSymbol:
    """Per-mode data of ``M(w) = -i w J - A``."""

    grid: SpectralGrid
    A: np.ndarray
    matrices: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    plus_mask: np.ndarray = field(repr=False)

    @cached_property
    def P_plus(self) -> np.ndarray:
        V = self.eigenvectors
        return np.einsum("kij,kj,klj->kil", V, self.plus_mask, V.conj())

    @cached_property
    def P_minus(self) -> np.ndarray:
        V = self.eigenvectors
        return np.einsum("kij,kj,klj->kil", V, ~self.plus_mask, V.conj())

    @property
    def abs_eigenvalues(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    @property
    def margin(self) -> float:
        return float(self.abs_eigenvalues.min())

    # eigen-coordinates c_k = V_k^* zhat_k diagonalise every operator used here
    def to_eig(self, coeffs: np.ndarray) -> np.ndarray:
        return np.einsum("kji,kj->ki", self.eigenvectors.conj(), coeffs)

    def from_eig(self, c: np.ndarray) -> np.ndarray:
        return np.einsum("kij,kj->ki", self.eigenvectors, c)

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        """Symbol applied per mode: coefficients of ``-J z' - A z``."""
        return np.einsum("kij,kj->ki", self.matrices, coeffs)

    def apply_abs_power(self, coeffs: np.ndarray, power: float) -> np.ndarray:
        c = self.to_eig(coeffs)
        return self.from_eig(c * self.abs_eigenvalues**power)

    def project_plus(self, coeffs: np.ndarray) -> np.ndarray:
        return self.from_eig(np.where(self.plus_mask, self.to_eig(coeffs), 0.0))

    def project_minus(self, coeffs: np.ndarray) -> np.ndarray:
        return self.from_eig(np.where(self.plus_mask, 0.0, self.to_eig(coeffs)))

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """X-inner product ``2T Re sum a^* |M| b``."""
        ca, cb = self.to_eig(a), self.to_eig(b)
        return float(self.grid.period * np.vdot(ca, self.abs_eigenvalues * cb).real)

    def quadratic_form(self, coeffs: np.ndarray) -> float:
        """``int (-J z' - A z) . z dt``."""
        c = self.to_eig(coeffs)
        return float(self.grid.period * np.sum(self.eigenvalues * np.abs(c) ** 2))

    def l2_inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(self.grid.period * np.vdot(a, b).real)

    def split(self, coeffs: np.ndarray, check: bool = True) -> SplitState:
        return split(self, coeffs, check=check)

    def state_from_values(self, values: np.ndarray) -> SplitState:
        return self.split(self.grid.from_values(values), check=False)

    def state_from_function(self, func) -> SplitState:
        """Sample ``func(t) -> (npts, dim)`` on the collocation points."""
        return self.state_from_values(np.asarray(func(self.grid.times()), dtype=float))

    def zero_state(self) -> SplitState:
        return self.split(np.zeros((self.grid.n, self.grid.dim), dtype=complex), check=False)


def _normalise_phases(V: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each eigenvector real and positive."""
    idx = np.argmax(np.abs(V), axis=-2)
    pivot = np.take_along_axis(V, idx[..., None, :], axis=-2)
    return V * (np.conj(pivot) / np.abs(pivot))


def assemble_symbol(grid: SpectralGrid, A, tol_hyp: float = TOL_HYP) -> OperatorSymbol:
    """Eigendecomposition of ``-i w_k J - A`` for every retained mode.

    Only ``k >= 0`` is decomposed; ``M(-w) = conj(M(w))`` supplies the rest, so
    projected parts of real trajectories stay real.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (grid.dim, grid.dim):
        raise InputError(f"A has shape {A.shape}, grid dimension is {grid.dim}")
    J = symplectic_matrix(grid.dim)
    mats = -1j * grid.omega[:, None, None] * J[None] - A[None].astype(complex)
    M = grid.M
    try:
        w0, v0 = np.linalg.eigh(-A)
        wp, vp = np.linalg.eigh(mats[M + 1 :])
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symbol eigendecomposition failed: {exc}") from exc
    v0 = _normalise_phases(v0.astype(complex)[None])[0].real.astype(complex)
    vp = _normalise_phases(vp)
    evals = np.empty((grid.n, grid.dim))
    evecs = np.empty((grid.n, grid.dim, grid.dim), dtype=complex)
    evals[M] = w0
    evecs[M] = v0
    evals[M + 1 :] = wp
    evecs[M + 1 :] = vp
    evals[:M] = wp[::-1]
    evecs[:M] = np.conj(vp[::-1])
    if np.min(np.abs(evals)) <= tol_hyp:
        raise HyperbolicityError(
            f"symbol eigenvalue {np.min(np.abs(evals)):.3e} within {tol_hyp} of zero; splitting undefined"
        )
    return OperatorSymbol(grid, A, mats, evals, evecs, evals > 0)


def split(symbol: OperatorSymbol, coeffs, check: bool = True) -> SplitState:
    coeffs = np.asarray(coeffs, dtype=complex)
    grid = symbol.grid
    if coeffs.shape != (grid.n, grid.dim):
        raise InputError(f"coefficients have shape {coeffs.shape}, expected {(grid.n, grid.dim)}")
    if check:
        check_reality(coeffs)
    c = symbol.to_eig(coeffs)
    mask = symbol.plus_mask
    cp = np.where(mask, c, 0.0)
    cm = c - cp
    lam = symbol.abs_eigenvalues
    np2 = grid.period * float(np.sum(lam * np.abs(cp) ** 2))
    nm2 = grid.period * float(np.sum(lam * np.abs(cm) ** 2))
    return SplitState(grid, coeffs, symbol.from_eig(cp), symbol.from_eig(cm), np.sqrt(np2), np.sqrt(nm2))


def norm_plus(state: SplitState) -> float:
    return state.norm_plus


def norm_minus(state: SplitState) -> float:
    return state.norm_minus


def norm_X(state: SplitState) -> float:
    return state.norm


def lq_norm(state: SplitState, s: float) -> float:
    """``(int |z|^s dt)^(1/s)`` by the trapezoidal rule.

    The nodes have spacing ``1/K`` with ``2TK`` at least the oversampled size,
    so integer translations permute them and leave the result unchanged.
    """
    if s < 2:
        raise ConfigurationError(f"exponent must be >= 2, got {s}")
    grid = state.grid
    npts = 2 * grid.T * -(-grid.n_fine // (2 * grid.T))
    vals = grid.to_values(state.coefficients, npts)
    r = np.linalg.norm(vals, axis=1)
    total = np.sum(r**s) * (grid.period / npts)
    return float(total ** (1.0 / s))


def compute_mu0(symbol: OperatorSymbol) -> float:
    """Largest ``mu0`` with ``mu0 ||z||_2 <= ||z||`` on the grid."""
    return float(np.sqrt(symbol.margin))


@dataclass(frozen=True)
class KappaEstimate:
    """Monte-Carlo lower estimate of the L^s projection constant."""

    value: float
    raw_max: float
    s: float
    samples: int
    heuristic: bool = True

    def __float__(self) -> float:
        return self.value

    def to_dict(self) -> dict:
        return {"value": self.value, "raw_max": self.raw_max, "s": self.s,
                "samples": self.samples, "heuristic": self.heuristic}


def random_coefficients(grid: SpectralGrid, rng: np.random.Generator, decay: float = 1.0) -> np.ndarray:
    """Gaussian coefficients damped by ``(1 + |w|)^-decay``, reality enforced."""
    M = grid.M
    half = rng.standard_normal((M + 1, grid.dim)) + 1j * rng.standard_normal((M + 1, grid.dim))
    half[0] = half[0].real
    half /= ((1 + np.abs(grid.omega[M:])) ** decay)[:, None]
    out = np.empty((grid.n, grid.dim), dtype=complex)
    out[M:] = half
    out[:M] = np.conj(half[:0:-1])
    return out


def estimate_kappa(symbol: OperatorSymbol, grid: SpectralGrid | None = None, s: float = 3.0,
                   samples: int = 200, seed: int = 0) -> KappaEstimate:
    """Largest observed ``max(||z+||_s, ||z-||_s) / ||z||_s`` over random states.

    The first sample is a pure ``X+`` state, so the estimate is at least 1.
    """
    grid = symbol.grid if grid is None else grid
    if samples <= 0:
        raise ConfigurationError("kappa estimation needs at least one sample")
    if s <= 2:
        raise ConfigurationError(f"kappa exponent must exceed 2, got {s}")
    rng = np.random.default_rng(seed)
    best = 0.0
    for i in range(samples):
        coeffs = random_coefficients(grid, rng)
        if i == 0:
            coeffs = symbol.project_plus(coeffs)
        st = symbol.split(coeffs, check=False)
        full = lq_norm(st, s)
        if full == 0.0:
            continue
        parts = [lq_norm(symbol.split(st.plus_part, check=False), s),
                 lq_norm(symbol.split(st.minus_part, check=False), s)]
        best = max(best, max(parts) / full)
    return KappaEstimate(max(best, 1.0), best, float(s), samples)


@dataclass(frozen=True, eq=False)
class TripleNormContext:
    """Ordered X-orthonormal basis of the discretised ``X-`` and its weights.

    Basis function ``j`` lives on mode pair ``+-mode[j]`` along negative
    eigenvector ``eig_index[j]``; ``kind`` 0 is the cosine-type (real
    coefficient) member and 1 the sine-type member.
    """

    symbol: OperatorSymbol
    mode: np.ndarray
    eig_index: np.ndarray
    kind: np.ndarray
    scale: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return len(self.mode)

    def coordinates(self, coeffs: np.ndarray) -> np.ndarray:
        """``<z, e_j>_X`` for every basis vector."""
        M = self.symbol.grid.M
        c = self.symbol.to_eig(coeffs)[M + self.mode, self.eig_index]
        return self.scale * np.where(self.kind == 0, c.real, c.imag)

    def basis_state(self, j: int) -> np.ndarray:
        grid = self.symbol.grid
        M = grid.M
        k, i = int(self.mode[j]), int(self.eig_index[j])
        lam = abs(self.symbol.eigenvalues[M + k, i])
        out = np.zeros((grid.n, grid.dim), dtype=complex)
        v = self.symbol.eigenvectors[M + k, :, i]
        if k == 0:
            out[M] = v / np.sqrt(grid.period * lam)
        else:
            a = 1.0 / np.sqrt(2 * grid.period * lam)
            if self.kind[j] == 1:
                a = 1j * a
            out[M + k] = v * a
            out[M - k] = np.conj(v * a)
        return out


def triple_norm_context(symbol: OperatorSymbol) -> TripleNormContext:
    grid = symbol.grid
    M = grid.M
    rows = []
    for k in range(M + 1):
        lam = symbol.eigenvalues[M + k]
        for i in np.flatnonzero(lam < 0):
            kinds = (0,) if k == 0 else (0, 1)
            for kind in kinds:
                rows.append((k, abs(lam[i]), int(i), kind))
    rows.sort()
    mode = np.array([r[0] for r in rows], dtype=int)
    absl = np.array([r[1] for r in rows])
    eig_index = np.array([r[2] for r in rows], dtype=int)
    kind = np.array([r[3] for r in rows], dtype=int)
    scale = np.sqrt(np.where(mode == 0, 1.0, 2.0) * grid.period * absl)
    weights = 0.5 ** (np.arange(1, len(rows) + 1) + 1.0)
    return TripleNormContext(symbol, mode, eig_index, kind, scale, weights)


def triple_norm(ctx: TripleNormContext, state: SplitState) -> float:
    """``max(||z+||, sum_j 2^-(j+1) |<z-, e_j>|)``."""
    coords = ctx.coordinates(state.minus_part)
    weak = float(np.sum(ctx.weights * np.abs(coords)))
    return float(max(state.norm_plus, weak))


def window_masses(grid: SpectralGrid, coeffs: np.ndarray, R: float, ys) -> np.ndarray:
    """``int_{y-R}^{y+R} |z|^2 dt`` (circularly on the window) for each ``y``.

    ``|z|^2`` has bandwidth ``2M``, which the oversampled grid resolves exactly,
    so the window integrals are evaluated in closed form from its Fourier series.
    """
    ys = np.asarray(ys, dtype=float)
    L = grid.n_fine
    vals = grid.to_values(coeffs, L)
    dens = np.sum(vals**2, axis=1)
    half = np.fft.rfft(dens) / L
    kk = np.arange(half.size)
    w = np.pi * kk / grid.T
    # coefficients w.r.t. exp(i w t) on t_j = -T + j*2T/L pick up (-1)^k
    half = half * np.where(kk % 2, -1.0, 1.0)
    kern = np.empty_like(w)
    kern[0] = 2 * R
    kern[1:] = 2 * np.sin(w[1:] * R) / w[1:]
    phase = np.exp(1j * np.outer(ys, w))
    terms = phase * (half * kern)
    # real series: k = 0 once, k > 0 twice (the L/2 term, if present, is zero)
    return terms[:, 0].real + 2 * np.sum(terms[:, 1:].real, axis=1)


def integer_window_masses(grid: SpectralGrid, coeffs: np.ndarray, R: float) -> np.ndarray:
    """Window masses at every integer ``y = -T, ..., T-1`` from a single inverse FFT.

    The mass profile has bandwidth ``2M``, so sampling it on a grid of spacing
    ``1/K`` with ``2 T K > 4M`` points is exact; integers lie on that grid.
    """
    L = grid.n_fine
    vals = grid.to_values(coeffs, L)
    half = np.fft.rfft(np.sum(vals**2, axis=1)) / L
    kk = np.arange(half.size)
    w = np.pi * kk / grid.T
    kern = np.empty_like(w)
    kern[0] = 2 * R
    kern[1:] = 2 * np.sin(w[1:] * R) / w[1:]
    K = -(-(2 * L) // (2 * grid.T))
    P = 2 * grid.T * K
    # both phase factors (-1)^k cancel: one from the data grid, one from the target grid
    spec = np.zeros(P // 2 + 1, dtype=complex)
    spec[: half.size] = P * half * kern
    return np.fft.irfft(spec, P)[::K]


def best_integer_center(grid: SpectralGrid, coeffs: np.ndarray, R: float = 1.0) -> tuple[int, np.ndarray]:
    """Integer ``y`` in ``[-T, T)`` maximising the window mass; ties go to the smallest ``|y|``."""
    ys = np.arange(-grid.T, grid.T)
    m = integer_window_masses(grid, coeffs, R)
    top = m.max()
    cand = ys[m >= top - 1e-12 * max(abs(top), 1e-300)]
    y = int(sorted(cand, key=lambda v: (abs(v), v))[0])
    return y, m


# --- artifact I/O ----------------------------------------------------------------


def write_trajectory_csv(path: str | Path, state: SplitState) -> None:
    grid = state.grid
    vals = state.values()
    t = grid.times()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"z_{i + 1}" for i in range(grid.dim)])
        for tj, row in zip(t, vals):
            w.writerow([repr(float(tj))] + [repr(float(x)) for x in row])


def read_trajectory_csv(path: str | Path) -> tuple[SpectralGrid, np.ndarray]:
    """Grid and coefficients of a trajectory written by :func:`write_trajectory_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "t":
        raise InputError(f"{path}: missing 't' header")
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    npts, dim = data.shape[0], data.shape[1] - 1
    if npts % 2 == 0:
        raise InputError(f"{path}: expected an odd number of collocation points, got {npts}")
    T = -data[0, 0]
    if abs(T - round(T)) > 1e-9:
        raise InputError(f"{path}: first time {data[0, 0]} does not give an integer half-length")
    grid = SpectralGrid(int(round(T)), (npts - 1) // 2, dim)
    return grid, grid.from_values(data[:, 1:])


def coefficients_to_json(grid: SpectralGrid, coeffs: np.ndarray) -> str:
    comps = [
        [[int(k), float(c.real), float(c.imag)] for k, c in zip(grid.k, coeffs[:, i])]
        for i in range(grid.dim)
    ]
    return json.dumps({"grid": grid.to_dict(), "components": comps})


def coefficients_from_json(text: str) -> tuple[SpectralGrid, np.ndarray]:
    doc = json.loads(text)
    g = doc["grid"]
    grid = SpectralGrid(int(g["T"]), int(g["M"]), int(g["dim"]))
    out = np.zeros((grid.n, grid.dim), dtype=complex)
    for i, comp in enumerate(doc["components"]):
        for k, re, im in comp:
            out[int(k) + grid.M, i] = complex(re, im)
    return grid, out
