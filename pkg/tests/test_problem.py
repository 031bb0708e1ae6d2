from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamlink.errors import ConfigurationError
from hamlink.problem import (
    NonlinearitySpec,
    ProblemSpec,
    benchmark_problem,
    builtin_power_pair,
    builtin_quartic_first,
    check_hyperbolic,
    constant_weight,
    cosine_weight,
    eval_hamiltonian,
    load_problem,
    power_problem,
    problem_from_dict,
    symplectic_matrix,
)


def test_symplectic_matrix_blocks():
    J = symplectic_matrix(4)
    assert np.array_equal(J[:2, 2:], -np.eye(2))
    assert np.array_equal(J[2:, :2], np.eye(2))
    assert np.array_equal(J @ J, -np.eye(4))


class TestPowerPair:
    nl = builtin_power_pair(4, 3, 2)

    def test_unit_vector(self):
        z = np.array([1.0, 0.0])
        assert self.nl.F(z) == pytest.approx(0.25)
        assert np.allclose(self.nl.f(z), [1, 0])
        assert self.nl.G(z) == pytest.approx(1 / 3)
        assert np.allclose(self.nl.g(z), [1, 0])

    def test_origin(self):
        z = np.zeros(2)
        assert self.nl.F(z) == 0.0
        assert np.array_equal(self.nl.f(z), [0, 0])
        assert np.array_equal(self.nl.g(z), [0, 0])

    def test_pairings_at_two(self):
        z = np.array([2.0, 0.0])
        assert float(self.nl.f(z) @ z) == pytest.approx(16.0)
        assert float(self.nl.g(z) @ z) == pytest.approx(8.0)

    @pytest.mark.parametrize("p,q", [(3, 4), (4, 4), (4, 2), (2.5, 2.0)])
    def test_bad_exponents(self, p, q):
        with pytest.raises(ConfigurationError):
            builtin_power_pair(p, q, 2)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            d = rng.standard_normal(2)
            z = d / np.linalg.norm(d) * rng.uniform(0.1, 10)
            for F, f in ((self.nl.F, self.nl.f), (self.nl.G, self.nl.g)):
                h = 1e-6 * max(1.0, np.linalg.norm(z))
                fd = np.array([(F(z + h * e) - F(z - h * e)) / (2 * h) for e in np.eye(2)])
                assert np.linalg.norm(fd - f(z)) <= 1e-6 * np.linalg.norm(f(z))

    def test_odd_gradients(self):
        z = np.random.default_rng(2).standard_normal((50, 2))
        assert np.allclose(self.nl.f(-z), -self.nl.f(z))
        assert np.allclose(self.nl.g(-z), -self.nl.g(z))


def test_inconsistent_gradient_rejected():
    good = builtin_power_pair(4, 3, 2)
    with pytest.raises(ConfigurationError, match="gradient"):
        NonlinearitySpec(2, good.F, lambda z: 2 * good.f(z), good.G, good.g, 4, 3, 0.1)


def test_nonzero_at_origin_rejected():
    good = builtin_power_pair(4, 3, 2)
    with pytest.raises(ConfigurationError):
        NonlinearitySpec(2, lambda z: good.F(z) + 1.0, good.f, good.G, good.g, 4, 3, 0.1)


class TestWeight:
    def test_constant(self):
        w = constant_weight(2.0)
        assert w.gamma0 == w.gamma_sup == 2.0
        assert np.all(w(np.linspace(0, 3, 7)) == 2.0)

    def test_cosine_bounds_and_period(self):
        w = cosine_weight(1.0, 0.5)
        t = np.linspace(-2, 2, 101)
        assert np.allclose(w(t + 1), w(t))
        assert w.gamma0 == pytest.approx(0.5)
        assert w.gamma_sup == pytest.approx(1.5)

    def test_nonpositive_rejected(self):
        with pytest.raises(ConfigurationError):
            cosine_weight(1.0, 1.5)


class TestHyperbolicity:
    def test_saddle(self):
        cert = check_hyperbolic(np.diag([-1.0, 1.0]))
        assert cert.passed
        assert sorted(cert.eigenvalues.real) == pytest.approx([-1, 1])

    def test_identity_fails(self):
        cert = check_hyperbolic(np.eye(2))
        assert not cert.passed
        assert sorted(cert.eigenvalues.imag) == pytest.approx([-1, 1])

    def test_diag_2_minus3(self):
        cert = check_hyperbolic(np.diag([2.0, -3.0]))
        assert cert.passed
        assert sorted(cert.eigenvalues.real) == pytest.approx([-math.sqrt(6), math.sqrt(6)])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_symplectic_conjugation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        B = rng.standard_normal((4, 4))
        A = B + B.T
        # U in U(2) embedded as [[Re, -Im], [Im, Re]] is orthogonal and symplectic
        X = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        U, _ = np.linalg.qr(X)
        P = np.block([[U.real, -U.imag], [U.imag, U.real]])
        J = symplectic_matrix(4)
        assert np.allclose(P.T @ J @ P, J)
        e1 = np.sort_complex(check_hyperbolic(A).eigenvalues)
        e2 = np.sort_complex(check_hyperbolic(P.T @ A @ P).eigenvalues)
        assert np.allclose(e1, e2, atol=1e-8)
        assert check_hyperbolic(A).passed == check_hyperbolic(P.T @ A @ P).passed


def test_asymmetric_A_rejected():
    with pytest.raises(ConfigurationError):
        ProblemSpec(np.array([[0.0, 1.0], [0.0, 0.0]]), builtin_power_pair(4, 3, 2), constant_weight(), 0.0)


def test_negative_lambda_rejected():
    with pytest.raises(ConfigurationError):
        power_problem(lam=-0.1)


class TestHamiltonian:
    def test_on_orbit_peak(self):
        assert eval_hamiltonian(benchmark_problem(), np.array([math.sqrt(2), 0.0]), 0.0) == pytest.approx(0.0)

    def test_origin(self):
        assert eval_hamiltonian(power_problem(lam=0.3), np.zeros(2), 0.7) == 0.0

    def test_momentum_only(self):
        assert eval_hamiltonian(benchmark_problem(), np.array([0.0, 1.0]), 0.0) == pytest.approx(0.5)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.floats(-3, 3))
    def test_even(self, z, t):
        spec = ProblemSpec(np.diag([-1.0, 2.0]), builtin_power_pair(4, 3, 2), cosine_weight(1, 0.3), 0.05)
        z = np.array(z)
        assert eval_hamiltonian(spec, -z, t) == pytest.approx(eval_hamiltonian(spec, z, t), rel=1e-14, abs=1e-14)


class TestLoading:
    def test_roundtrip(self, tmp_path):
        doc = {"A": [[-1, 0], [0, 1]], "lambda": 0.01,
               "nonlinearity": {"kind": "power", "p": 4, "q": 3, "rho": 0.05},
               "weight": {"kind": "cosine", "mean": 1.0, "amplitude": 0.2}}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(doc))
        spec = load_problem(path)
        assert spec.lam == 0.01
        assert spec.nonlinearity.rho == 0.05
        assert spec.weight.gamma0 == pytest.approx(0.8)

    def test_quartic_kind(self):
        spec = problem_from_dict({"A": [-1, 0, 0, 1], "nonlinearity": {"kind": "quartic_first"}})
        assert spec.nonlinearity.name == builtin_quartic_first().name

    @pytest.mark.parametrize("doc", [
        {"lambda": 0},
        {"A": [[1, 0], [0, 1]], "nonlinearity": {"kind": "nope"}},
        {"A": [[1, 0], [0, 1]], "nonlinearity": {"kind": "power"}},
        {"A": [1, 2, 3]},
        {"A": [[-1, 0], [0, 1]], "weight": {"kind": "triangle"}},
    ])
    def test_bad_documents(self, doc):
        with pytest.raises(ConfigurationError):
            problem_from_dict(doc)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            load_problem(path)
