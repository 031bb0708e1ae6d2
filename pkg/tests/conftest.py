from __future__ import annotations

import numpy as np
import pytest

from hamlink.functional import make_context
from hamlink.problem import benchmark_problem, power_problem
from hamlink.spectral import make_grid, random_coefficients
from hamlink.validate import soliton


def random_state(ctx, rng, scale: float = 1.0, decay: float = 2.0):
    """Smooth random real state; ``decay`` damps high modes so nonlinear terms stay moderate."""
    c = random_coefficients(ctx.grid, rng, decay=decay)
    c *= scale / np.sqrt(ctx.grid.period * np.sum(np.abs(c) ** 2))
    return ctx.symbol.split(c)


@pytest.fixture(scope="session")
def bench_ctx():
    return make_context(benchmark_problem(), make_grid(20, 512, 2))


@pytest.fixture(scope="session")
def small_bench_ctx():
    return make_context(benchmark_problem(), make_grid(8, 64, 2))


@pytest.fixture(scope="session")
def power_ctx():
    return make_context(power_problem(lam=0.01), make_grid(8, 64, 2))


@pytest.fixture(scope="session")
def exact_orbit(bench_ctx):
    return bench_ctx.symbol.state_from_function(soliton)


@pytest.fixture(scope="session")
def bench_solution(bench_ctx):
    from hamlink.solver import solve

    return solve(bench_ctx)
