"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line (visible even under
captured output) and then asserts the same condition.
"""

from __future__ import annotations

import csv
import itertools
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import random_state
from hamlink.cli import main
from hamlink.functional import action, derivative, make_context, phi_quantity
from hamlink.hypotheses import (
    FAIL,
    PASS,
    AuditConfig,
    audit,
    check_AR,
    check_F1_F2,
    check_F3_F4_F5,
    check_G_and_FG,
    e_value,
    make_samples,
    ratio_sup,
)
from hamlink.problem import (
    NonlinearitySpec,
    ProblemSpec,
    benchmark_problem,
    builtin_power_pair,
    constant_weight,
    cosine_weight,
    power_problem,
)
from hamlink.solver import SmallTripleSampler, solve, sup_small_triple
from hamlink.spectral import lq_norm, make_grid
from hamlink.validate import ode_residual, oracle_compare, soliton, vanishing_diagnostic

PAIR = builtin_power_pair(4, 3, 2)
PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def report(capsys, number: int, title: str, checks: dict[str, bool], detail: str = "") -> None:
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    with capsys.disabled():
        line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {title}"
        if detail:
            line += f" [{detail}]"
        if failed:
            line += f" failed: {', '.join(failed)}"
        print("\n" + line)
    assert ok, failed


@pytest.fixture(scope="module")
def timed_benchmark():
    ctx = make_context(benchmark_problem(), make_grid(20, 512, 2))
    t0 = time.perf_counter()
    result = solve(ctx)
    return ctx, result, time.perf_counter() - t0


def test_01_benchmark_orbit(capsys, timed_benchmark):
    _, res, elapsed = timed_benchmark
    err = oracle_compare(res.orbit, soliton)
    resid = ode_residual(benchmark_problem(), res.orbit)
    report(capsys, 1, "benchmark orbit", {
        "converged": res.converged,
        "oracle error <= 1e-3": err <= 1e-3,
        "action within 1e-3 of 4/3": abs(res.action - 4 / 3) <= 1e-3,
        "ode residual <= 1e-5": resid <= 1e-5,
        "runtime <= 60 s": elapsed <= 60.0,
    }, f"err={err:.2e} action={res.action:.10f} residual={resid:.2e} time={elapsed:.1f}s")


def test_02_gradient_finite_differences(capsys):
    spec = ProblemSpec(np.diag([-1.0, 2.0]), PAIR, cosine_weight(1.0, 0.4), 0.02)
    ctx = make_context(spec, make_grid(6, 48, 2))
    rng = np.random.default_rng(2024)
    h = 1e-5
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        z = random_state(ctx, rng, scale=2.0)
        v = random_state(ctx, rng)
        zp = ctx.symbol.split(z.coefficients + h * v.coefficients)
        zm = ctx.symbol.split(z.coefficients - h * v.coefficients)
        fd = (action(ctx, zp) - action(ctx, zm)) / (2 * h)
        d = derivative(ctx, z, v)
        worst = max(worst, abs(fd - d) / abs(d))
    elapsed = time.perf_counter() - t0
    report(capsys, 2, "gradient vs central differences", {
        "relative error <= 1e-6": worst <= 1e-6,
        "runtime <= 30 s": elapsed <= 30.0,
    }, f"worst={worst:.2e} time={elapsed:.2f}s")


def test_03_splitting_identities(capsys):
    ctx = make_context(power_problem(lam=0.01), make_grid(8, 64, 2))
    sym = ctx.symbol
    rng = np.random.default_rng(3)
    norm_err = proj_err = 0.0
    signs = True
    for _ in range(100):
        z = random_state(ctx, rng, scale=float(rng.uniform(0.1, 10)))
        norm_sq = sym.inner(z.coefficients, z.coefficients)
        norm_err = max(norm_err, abs(z.norm_plus**2 + z.norm_minus**2 - norm_sq) / norm_sq)
        total = sym.project_plus(z.coefficients) + sym.project_minus(z.coefficients)
        proj_err = max(proj_err, float(np.max(np.abs(total - z.coefficients))))
        signs &= sym.quadratic_form(z.plus_part) >= 0 >= sym.quadratic_form(z.minus_part)
    report(capsys, 3, "splitting identities", {
        "norm splits (rel 1e-10)": norm_err <= 1e-10,
        "quadratic form signs": bool(signs),
        "projectors sum to identity (1e-12)": proj_err <= 1e-12,
    }, f"norm={norm_err:.1e} proj={proj_err:.1e}")


def test_04_power_pair_audit(capsys):
    cfg = AuditConfig()
    samples = make_samples(2, cfg)
    verdicts = {}
    for check in (check_F1_F2, check_F3_F4_F5, check_G_and_FG, check_AR):
        verdicts.update(check(PAIR, samples, cfg))
    named = ["F1", "F2", "F3", "F4", "F5", "G1", "G2", "G3", "FG"]
    z = samples.points.reshape(-1, 2)
    qF, fz = 3 * PAIR.F(z), np.sum(PAIR.f(z) * z, axis=1)
    gz, qG = np.sum(PAIR.g(z) * z, axis=1), 3 * PAIR.G(z)
    chains = (z.shape[0] >= 10_000 and np.all(qF >= 0) and np.all(qF <= fz * (1 + 1e-12))
              and np.all(gz >= 0) and np.all(gz <= qG * (1 + 1e-12)))
    ratio_ok = all(abs(ratio_sup(PAIR, rho, samples.dirs) / rho ** (3 - 4) - 1) <= 1e-10
                   for rho in (0.01, 0.02, 0.1, 1.0, 5.0))
    e_ok = True
    for lam, rho in itertools.product(np.linspace(0, 0.06, 13), (0.01, 0.02, 0.05, 0.1)):
        boundary = rho ** (4 - 3) / 2
        if abs(lam - boundary) > 1e-12:
            e_ok &= (e_value(lam, ratio_sup(PAIR, rho, samples.dirs)) >= 0.5) == (lam <= boundary)
    report(capsys, 4, "power pair hypothesis audit", {
        "named hypotheses pass": all(verdicts[k].status == PASS for k in named),
        "AR chains at 1e4 samples": bool(chains),
        "ratio_sup = rho^(q-p)": ratio_ok,
        "E >= 1/2 region": bool(e_ok),
    }, f"samples={z.shape[0]}")


def test_05_negative_controls(capsys):
    rep_id = audit(ProblemSpec(np.eye(2), PAIR, constant_weight(), 0.0))
    eig = rep_id.hyperbolicity.eigenvalues
    flipped = NonlinearitySpec(2, PAIR.F, PAIR.f, lambda z: -PAIR.G(z), lambda z: -PAIR.g(z), 4, 3, 0.02)
    rep_g = audit(ProblemSpec(np.diag([-1.0, 1.0]), flipped, constant_weight(), 0.005))
    rep_lam = audit(power_problem(lam=0.2))
    report(capsys, 5, "negative controls", {
        "identity matrix not hyperbolic": not rep_id.passed and rep_id.verdicts["A"].status == FAIL,
        "eigenvalues are +-i": np.allclose(sorted(eig.imag), [-1, 1]) and np.allclose(eig.real, 0),
        "flipped g fails G3 with witness": (rep_g.verdicts["G3"].status == FAIL
                                            and rep_g.verdicts["G3"].witness is not None),
        "lambda above threshold rejected": not rep_lam.passed,
    }, f"threshold={rep_lam.lambda_threshold_step2:.4g}")


def test_06_functional_identity(capsys):
    spec = ProblemSpec(np.diag([-1.0, 2.0]), PAIR, cosine_weight(1.0, 0.4), 0.02)
    ctx = make_context(spec, make_grid(6, 48, 2))
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(50):
        z = random_state(ctx, rng, scale=float(rng.uniform(0.5, 4)))
        lhs = action(ctx, z) - 0.5 * derivative(ctx, z, z)
        rhs = phi_quantity(ctx, z)[1]
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    report(capsys, 6, "action minus half derivative equals weighted integral",
           {"relative error <= 1e-10": worst <= 1e-10}, f"worst={worst:.1e}")


def test_07_linking_geometry(capsys, timed_benchmark):
    ctx, res, _ = timed_benchmark
    geo = res.geometry
    sampler = SmallTripleSampler(ctx)
    deltas = [0.5, 0.05, 0.005]
    sups = [sup_small_triple(ctx, d, sampler) for d in deltas]
    report(capsys, 7, "linking geometry certificate", {
        "certificate valid": geo is not None and geo.valid,
        "inf_sphere > 0 >= sup_boundary": geo.inf_sphere > 0 >= geo.sup_boundary,
        "small-ball sup monotone (1e-10)": all(b <= a + 1e-10 for a, b in zip(sups, sups[1:])),
        "small-ball sup shrinks to 0": sups[-1] < 1e-3 * sups[0],
    }, f"inf={geo.inf_sphere:.4f} boundary={geo.sup_boundary:.3g} small={['%.2e' % s for s in sups]}")


def test_08_recentering_and_vanishing(capsys):
    spec = ProblemSpec(np.diag([-1.0, 1.0]), PAIR, cosine_weight(1.0, 0.3), 0.01)
    ctx = make_context(spec, make_grid(12, 128, 2))
    rng = np.random.default_rng(8)
    inv_err = 0.0
    for shift in (-5, -1, 2, 7):
        z = random_state(ctx, rng, scale=2.0)
        zs = ctx.symbol.split(ctx.grid.shift(z.coefficients, shift), check=False)
        inv_err = max(inv_err, abs(action(ctx, zs) - action(ctx, z)), abs(zs.norm - z.norm),
                      abs(lq_norm(zs, 3) - lq_norm(z, 3)))

    t = ctx.grid.times()

    def bump(c):
        g = np.exp(-((t - c) ** 2))
        return ctx.symbol.state_from_values(np.stack([g, 0.3 * g], axis=1))

    bumps = vanishing_diagnostic([bump(c) for c in range(6)])

    def spreading(n, width=0.25):
        T = n // 2 + 8
        c2 = make_context(benchmark_problem(), make_grid(T, int(np.ceil(20 * T / np.pi)), 2))
        s = c2.grid.times()
        q = n**-0.5 * 0.5 * (np.tanh((s + n / 2) / width) - np.tanh((s - n / 2) / width))
        return c2.symbol.state_from_values(np.stack([q, 0 * q], axis=1))

    ns = [1, 4, 16, 64, 256, 1024, 4096]
    spread = vanishing_diagnostic([spreading(n) for n in ns])
    report(capsys, 8, "recentering invariance and vanishing diagnostic", {
        "integer shifts invariant (1e-10)": inv_err <= 1e-10,
        "translating bump not vanishing": not bumps.vanishing and np.ptp(bumps.sup_mass) <= 1e-10,
        "spreading sequence vanishing": spread.vanishing,
        "ratio <= 3/n": all(c <= 3.0 / n for n, c in zip(ns, spread.concentration)),
    }, f"shift err={inv_err:.1e} last ratio={spread.ratios[-1]:.1e}")


def test_09_lambda_sweep(capsys, tmp_path):
    code = main(["sweep", "--problem", str(PROBLEMS / "power_pair.json"), "--lambdas", "0,0.005,0.01,0.02",
                 "--grid", "T=20,M=256", "--out-dir", str(tmp_path)])
    with open(tmp_path / "sweep.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    report(capsys, 9, "lambda sweep on the power pair", {
        "exit 0": code == 0,
        "four rows": [float(r["lambda"]) for r in rows] == [0.0, 0.005, 0.01, 0.02],
        "all admissible": all(r["admissible"] == "1" for r in rows),
        "all converged": all(r["converged"] == "1" for r in rows),
        "cerami <= 1e-6": all(float(r["cerami"]) <= 1e-6 for r in rows),
        "triple norm >= delta/2": all(float(r["triple_norm"]) >= float(r["delta"]) / 2 for r in rows),
        "monotone flag present": all(r["monotone"] in ("0", "1") for r in rows),
    }, "actions=" + ",".join(f"{float(r['action']):.6f}" for r in rows))


def test_10_determinism(capsys, tmp_path):
    same = {}
    for name, cmd in {
        "check": ["check", "--problem", str(PROBLEMS / "power_pair.json")],
        "solve": ["solve", "--problem", str(PROBLEMS / "benchmark.json"), "--grid", "T=12,M=128"],
    }.items():
        dirs = [tmp_path / f"{name}{i}" for i in range(2)]
        for d in dirs:
            main([*cmd, "--seed", "11", "--out-dir", str(d)])
        files = sorted(p.name for p in dirs[0].iterdir())
        same[f"{name} reports identical"] = bool(files) and all(
            (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes() for f in files)
    report(capsys, 10, "determinism", same)
