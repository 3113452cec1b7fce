import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semalign.linalg import (
    hermitian_eig,
    kron_vec_solve,
    sylvester_solve,
    trace_ball_project,
    unwhiten,
    whiten,
)

from conftest import random_complex, random_psd


class TestHermitianEig:
    def test_identity(self):
        e = hermitian_eig(np.eye(2))
        assert np.allclose(e.eigenvalues, [1.0, 1.0])

    def test_diagonal_ascending(self):
        e = hermitian_eig(np.diag([3.0, 1.0]))
        assert np.allclose(e.eigenvalues, [1.0, 3.0])

    def test_reconstruction(self, rng):
        M = random_psd(rng, 5) - 2.0 * np.eye(5)
        e = hermitian_eig(M)
        R = e.eigenvectors @ np.diag(e.eigenvalues) @ e.eigenvectors.conj().T
        assert np.linalg.norm(R - M) / np.linalg.norm(M) < 1e-10

    def test_unitary_eigenvectors(self, rng):
        e = hermitian_eig(random_psd(rng, 6))
        V = e.eigenvectors
        assert np.linalg.norm(V @ V.conj().T - np.eye(6)) < 1e-10

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            hermitian_eig(np.ones((2, 3)))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            hermitian_eig(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    def test_rejects_non_hermitian(self, rng):
        with pytest.raises(ValueError):
            hermitian_eig(random_complex(rng, 4, 4))


class TestSylvesterSolve:
    def test_scalar_identity_case(self):
        F = sylvester_solve(2 * np.eye(2), 3 * np.eye(2), 1.0, 7 * np.eye(2))
        assert np.allclose(F, np.eye(2))  # 6F + F = 7I

    def test_elementwise_division(self):
        F = sylvester_solve(
            np.diag([1.0, 2.0]), np.diag([3.0]), 2.0, np.array([[5.0], [10.0]])
        )
        assert np.allclose(F, [[1.0], [1.25]])

    def test_matches_kron_oracle(self, rng):
        A, B = random_psd(rng, 3), random_psd(rng, 4)
        C = random_complex(rng, 3, 4)
        F = sylvester_solve(A, B, 0.5, C)
        F_ref = kron_vec_solve(A, B, 0.5, C)
        assert np.max(np.abs(F - F_ref)) < 1e-10

    def test_residual_bound(self, rng):
        A, B = random_psd(rng, 6), random_psd(rng, 5)
        C = random_complex(rng, 6, 5)
        F = sylvester_solve(A, B, 1.3, C)
        res = np.linalg.norm(A @ F @ B + 1.3 * F - C)
        assert res <= 1e-9 * (1 + np.linalg.norm(C))

    def test_rejects_bad_shift(self, rng):
        A, B = random_psd(rng, 2), random_psd(rng, 2)
        with pytest.raises(ValueError):
            sylvester_solve(A, B, 0.0, np.eye(2))

    def test_rejects_dim_mismatch(self, rng):
        with pytest.raises(ValueError):
            sylvester_solve(random_psd(rng, 2), random_psd(rng, 3), 1.0, np.eye(2))


class TestKronVecSolve:
    def test_identity_case(self, rng):
        C = random_complex(rng, 3, 3)
        assert np.allclose(kron_vec_solve(np.eye(3), np.eye(3), 1.0, C), C / 2)

    def test_scalar(self):
        a, b, rho, c = 2.0, 3.0, 0.5, 4.0
        F = kron_vec_solve([[a]], [[b]], rho, [[c]])
        assert np.allclose(F, c / (a * b + rho))

    @pytest.mark.parametrize("pq", [(3, 4), (5, 2), (1, 7)])
    def test_cross_check(self, rng, pq):
        p, q = pq
        A, B = random_psd(rng, p), random_psd(rng, q)
        C = random_complex(rng, p, q)
        assert np.max(np.abs(
            sylvester_solve(A, B, 2.0, C) - kron_vec_solve(A, B, 2.0, C)
        )) < 1e-10


class TestWhiten:
    def test_scalar_case(self):
        W, mean, T = whiten(np.array([[2.0, -2.0]]), eps=1e-14)
        assert np.allclose(W, [[1.0, -1.0]], atol=1e-6)
        assert np.allclose(mean, 0.0)

    def test_idempotent_on_white_data(self, rng):
        # generate near-white data, whiten, whiten again: second pass ~ no-op
        S = rng.standard_normal((4, 5000))
        S1, _, _ = whiten(S)
        S2, _, _ = whiten(S1)
        assert np.max(np.abs(S1 - S2)) < 1e-6

    def test_output_covariance(self, rng):
        S = rng.standard_normal((8, 500)) * rng.uniform(0.5, 3.0, size=(8, 1))
        Sw, _, _ = whiten(S, eps=1e-8)
        cov = Sw @ Sw.T / Sw.shape[1]
        assert np.linalg.norm(cov - np.eye(8)) < 1e-6

    def test_roundtrip(self, rng):
        S = rng.standard_normal((6, 300))
        Sw, mean, W = whiten(S, eps=1e-10)
        assert np.max(np.abs(unwhiten(Sw, mean, W) - S)) < 1e-8

    def test_rejects_single_sample(self):
        with pytest.raises(ValueError):
            whiten(np.ones((3, 1)))


class TestTraceBallProject:
    def test_interior_point_unchanged(self, rng):
        Z = random_complex(rng, 3, 3)
        Z *= np.sqrt(0.5 / np.sum(np.abs(Z) ** 2))
        assert np.array_equal(trace_ball_project(Z, 1.0), Z)

    def test_closed_form_scaling(self):
        Z = trace_ball_project(2 * np.eye(2), 2.0)  # tr = 8, lam = 1
        assert np.allclose(Z, np.eye(2))
        assert np.isclose(np.sum(np.abs(Z) ** 2), 2.0)

    def test_projection_optimality_vs_scaling_search(self, rng):
        Zhat = random_complex(rng, 4, 3) * 2.0
        P_T = 1.0
        Z = trace_ball_project(Zhat, P_T)
        best = np.inf
        for alpha in np.linspace(1e-4, 1.0, 4000):
            cand = alpha * Zhat
            if np.sum(np.abs(cand) ** 2) <= P_T:
                best = min(best, np.linalg.norm(cand - Zhat))
        assert np.linalg.norm(Z - Zhat) <= best + 1e-3

    def test_idempotent(self, rng):
        Z = trace_ball_project(random_complex(rng, 5, 2) * 3.0, 0.7)
        assert np.array_equal(trace_ball_project(Z, 0.7), Z)

    @given(st.integers(0, 10_000), st.floats(0.1, 10.0))
    @settings(max_examples=50, deadline=None)
    def test_always_feasible(self, seed, budget):
        g = np.random.default_rng(seed)
        Z = g.standard_normal((3, 4)) + 1j * g.standard_normal((3, 4))
        out = trace_ball_project(Z, budget)
        assert np.sum(np.abs(out) ** 2) <= budget + 1e-12
