from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from scipy import optimize

from hamlink.errors import ConfigurationError
from hamlink.hypotheses import (
    FAIL,
    PASS,
    AuditConfig,
    GrowthConstants,
    audit,
    boundedness_budget,
    check_AR,
    check_F1_F2,
    check_F3_F4_F5,
    check_G_and_FG,
    e_value,
    fit_growth_constants,
    lambda_threshold_step2,
    make_samples,
    phi_small_sup,
    ratio_sup,
)
from hamlink.problem import (
    NonlinearitySpec,
    ProblemSpec,
    WeightSpec,
    benchmark_problem,
    builtin_power_pair,
    builtin_quartic_first,
    constant_weight,
    cosine_weight,
    power_problem,
)

CFG = AuditConfig()
PAIR = builtin_power_pair(4, 3, 2)
SAMPLES = make_samples(2, CFG)


def flipped_g(nl: NonlinearitySpec) -> NonlinearitySpec:
    return NonlinearitySpec(nl.dim, nl.F, nl.f, lambda z: -nl.G(z), lambda z: -nl.g(z), nl.p, nl.q, nl.rho,
                            name="flipped")


class TestGrowthConstants:
    def test_cf_is_one(self):
        eps = 0.05
        c = fit_growth_constants(PAIR, eps, SAMPLES)
        # sampled sup of 1 - eps/|z|^2 is attained at the largest radius
        assert c.C_f_eps == pytest.approx(1.0, abs=eps / CFG.r_max**2 + 1e-15)

    def test_c_eps_against_scan(self):
        eps = 0.1
        c = fit_growth_constants(PAIR, eps, SAMPLES)
        res = optimize.minimize_scalar(lambda r: r / 4 + eps / r, bounds=(1e-3, 1e3), method="bounded",
                                       options={"xatol": 1e-12})
        assert c.C_eps_raw == pytest.approx(res.fun, rel=2e-3)
        assert c.C_eps_raw >= res.fun - 1e-12
        assert c.C_eps <= c.C_G_eps

    def test_positive(self):
        c = fit_growth_constants(PAIR, 0.01, SAMPLES)
        assert all(v > 0 for v in c.to_dict().values())

    def test_bad_epsilon(self):
        with pytest.raises(ConfigurationError):
            fit_growth_constants(PAIR, 0.0, SAMPLES)

    def test_empty_samples(self):
        with pytest.raises(ConfigurationError):
            make_samples(2, AuditConfig(n_radii=0))


class TestAssumptionChecks:
    def test_power_pair_passes_everything(self):
        verdicts = {}
        for check in (check_F1_F2, check_F3_F4_F5, check_G_and_FG, check_AR):
            verdicts.update(check(PAIR, SAMPLES, CFG))
        assert {k: v.status for k, v in verdicts.items()} == {k: PASS for k in verdicts}
        assert set(verdicts) >= {"F1", "F2", "F3", "F4", "F5", "G1", "G2", "G3", "FG", "AR_f", "AR_g"}

    def test_benchmark_f3_fails_on_second_axis(self):
        v = check_F3_F4_F5(builtin_quartic_first(), SAMPLES, CFG)["F3"]
        assert v.status == FAIL
        assert v.witness[0] == 0.0 and v.witness[1] != 0.0

    def test_flipped_g_fails_g3(self):
        v = check_G_and_FG(flipped_g(PAIR), SAMPLES, CFG)["G3"]
        assert v.status == FAIL
        z = np.array(v.witness)
        assert float(-PAIR.g(z) @ z) < 0

    def test_ar_chains_pointwise(self):
        z = SAMPLES.points.reshape(-1, 2)
        assert z.shape[0] >= 10_000
        qF, fz = 3 * PAIR.F(z), np.sum(PAIR.f(z) * z, axis=1)
        gz, qG = np.sum(PAIR.g(z) * z, axis=1), 3 * PAIR.G(z)
        assert np.all(qF >= 0) and np.all(qF <= fz * (1 + 1e-12))
        assert np.all(gz >= 0) and np.all(gz <= qG * (1 + 1e-12))

    def test_fg_ratio_is_one(self):
        v = check_G_and_FG(PAIR, SAMPLES, CFG)["FG"]
        assert v.detail["c_fg"] == pytest.approx(1.0, rel=1e-12)

    def test_stable_under_doubling(self):
        a = audit(power_problem(lam=0.005))
        b = audit(power_problem(lam=0.005), CFG.doubled())
        assert {k: v.status for k, v in a.verdicts.items()} == {k: v.status for k, v in b.verdicts.items()}


class TestThresholds:
    def test_one_eighth(self):
        c = GrowthConstants(0.1, 1, 1, 0.25, 0.4, 0.4, 0.4)
        assert lambda_threshold_step2(c, constant_weight(), 1.0, 3) == pytest.approx(1 / 8)

    def test_at_most_one(self):
        for C_eps, kappa, w in itertools.product((0.1, 0.4), (1.0, 1.7), (constant_weight(), cosine_weight(1, 0.5))):
            c = GrowthConstants(0.1, 1, 1, 0.25, 0.4, C_eps, C_eps)
            assert lambda_threshold_step2(c, w, kappa, 3) <= 1.0

    def test_kappa_doubling(self):
        c = GrowthConstants(0.1, 1, 1, 0.25, 0.4, 0.3, 0.3)
        w = constant_weight()
        assert lambda_threshold_step2(c, w, 2.6, 3.5) == pytest.approx(lambda_threshold_step2(c, w, 1.3, 3.5) * 2**-3.5)

    def test_monotone_in_kappa_and_gamma0(self):
        c = GrowthConstants(0.1, 1, 1, 0.25, 0.4, 0.3, 0.3)
        kappas = np.linspace(1, 3, 9)
        vals = [lambda_threshold_step2(c, constant_weight(), k, 3) for k in kappas]
        assert np.all(np.diff(vals) <= 0)
        # a declared infimum below the true one is admissible, so gamma0 can vary with the sup fixed
        lows = np.linspace(0.5, 2.0, 7)
        vals = [lambda_threshold_step2(c, WeightSpec(lambda t: 2.0 + 0 * t, g0, 2.0), 1.0, 3) for g0 in lows]
        assert np.all(np.diff(vals) >= 0)

    def test_ratio_sup_power_pair(self):
        for rho in (0.02, 0.1, 1.0, 3.0):
            assert ratio_sup(PAIR, rho, SAMPLES.dirs) == pytest.approx(rho ** (3 - 4), rel=1e-10)

    def test_e_half_region(self):
        for lam, rho in itertools.product(np.linspace(0, 0.05, 11), (0.01, 0.02, 0.05)):
            E = e_value(lam, ratio_sup(PAIR, rho, SAMPLES.dirs))
            boundary = rho ** (4 - 3) / 2
            if abs(lam - boundary) > 1e-12:
                assert (E >= 0.5) == (lam <= boundary)

    def test_phi_small_vanishes(self):
        vals = [phi_small_sup(PAIR, 0.01, r, SAMPLES.dirs) for r in (1.0, 0.1, 0.01, 0.001)]
        assert np.all(np.diff(vals) < 0) and vals[-1] < 1e-4

    def test_budget_lambda_zero(self):
        b = boundedness_budget(PAIR, constant_weight(), 1.0, 1.0, 0.02, 0.0, SAMPLES)
        assert b.E == 1.0

    def test_budget_rejects_negative_E(self):
        b = boundedness_budget(PAIR, constant_weight(), 1.0, 1.0, 0.02, 1.0, SAMPLES)
        assert b.E <= 0 and not b.accepted and math.isinf(b.Lambda)


class TestAudit:
    def test_power_pair_pass(self):
        rep = audit(power_problem(lam=0.005))
        assert rep.passed, rep.failures
        assert rep.mu0 == pytest.approx(1.0)
        assert rep.kappa >= 1.0
        assert rep.budget.accepted

    def test_lambda_above_threshold(self):
        rep = audit(power_problem(lam=0.2))
        assert not rep.passed
        assert any("step-2 threshold" in f for f in rep.failures)

    def test_identity_matrix(self):
        rep = audit(ProblemSpec(np.eye(2), PAIR, constant_weight(), 0.0))
        assert rep.verdicts["A"].status == FAIL
        w = np.array(rep.verdicts["A"].witness).reshape(-1, 2)
        assert sorted(w[:, 1]) == pytest.approx([-1, 1]) and np.allclose(w[:, 0], 0)

    def test_flipped_g(self):
        spec = ProblemSpec(np.diag([-1.0, 1.0]), flipped_g(PAIR), constant_weight(), 0.005)
        rep = audit(spec)
        assert rep.verdicts["G3"].status == FAIL and rep.verdicts["G3"].witness is not None

    def test_benchmark_documented_failures(self):
        rep = audit(benchmark_problem())
        failing = {k for k, v in rep.verdicts.items() if v.status == FAIL}
        assert {"F3", "F5", "FG"} <= failing

    def test_report_has_witnesses_for_failures(self):
        rep = audit(benchmark_problem())
        for v in rep.verdicts.values():
            if v.status == FAIL:
                assert v.witness is not None
