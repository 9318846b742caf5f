import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_psd, with_spectrum
from kernspec.linalg import (
    ConvergenceError,
    NotSymmetricError,
    aligned_kernel_distance,
    jacobi_eig,
    operator_norm,
    project,
    sym_eig,
)


def charpoly_roots(A):
    return np.sort(np.real(np.roots(np.poly(A))))[::-1]


def power_iteration(A, iters=2000):
    v = np.ones(A.shape[0]) / np.sqrt(A.shape[0])
    for _ in range(iters):
        w = A @ v
        v = w / np.linalg.norm(w)
    return v @ A @ v, v


small_sym = st.integers(1, 4).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-5, 5, allow_nan=False, width=32))
).map(lambda A: A + A.T)


class TestSymEig:
    @settings(max_examples=60, deadline=None)
    @given(small_sym)
    def test_small_matches_characteristic_polynomial(self, A):
        eig = sym_eig(A)
        assert np.allclose(eig.values, charpoly_roots(A), atol=1e-6 * max(1, np.abs(A).max()))

    def test_diag_3_1_2(self):
        eig = sym_eig(np.diag([3.0, 1.0, 2.0]))
        assert np.array_equal(eig.values, [3.0, 2.0, 1.0])
        assert np.array_equal(np.abs(eig.vectors), np.eye(3)[:, [0, 2, 1]])

    def test_two_by_two(self):
        eig = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(eig.values, [3.0, 1.0], atol=1e-14)
        assert np.allclose(eig.vectors[:, 0], [1 / np.sqrt(2)] * 2)

    @pytest.mark.parametrize("n", [5, 30, 80])
    def test_reconstruction_and_orthonormality(self, rng, n):
        K = random_psd(rng, n)
        eig = sym_eig(K)
        assert np.linalg.norm(eig.reconstruct() - K) <= 1e-10 * np.linalg.norm(K)
        assert np.allclose(eig.vectors.T @ eig.vectors, np.eye(n), atol=1e-10)
        assert np.all(np.diff(eig.values) <= 0)

    def test_top_pair_matches_power_iteration(self, rng):
        K, _ = with_spectrum(rng, [5.0, 2.0, 1.0, 0.5, 0.1])
        lam, v = power_iteration(K)
        eig = sym_eig(K)
        assert eig.values[0] == pytest.approx(lam, rel=1e-10)
        assert abs(eig.vectors[:, 0] @ v) == pytest.approx(1.0, abs=1e-10)

    def test_jacobi_agrees_with_lapack(self, rng):
        K = random_psd(rng, 40)
        a, b = sym_eig(K, method="jacobi"), sym_eig(K, method="lapack")
        assert np.allclose(a.values, b.values, atol=1e-10)
        assert np.allclose(np.abs(a.vectors.T @ b.vectors), np.eye(40), atol=1e-6)

    def test_sign_convention(self, rng):
        eig = sym_eig(random_psd(rng, 12))
        cols = np.arange(12)
        pivots = np.argmax(np.abs(eig.vectors), axis=0)
        assert np.all(eig.vectors[pivots, cols] > 0)

    def test_rank_deficient_rank(self, rng):
        eig = sym_eig(random_psd(rng, 20, rank=7))
        assert eig.rank == 7
        assert eig.zero_mask.sum() == 13

    def test_deterministic(self, rng):
        K = random_psd(rng, 25)
        a, b = sym_eig(K), sym_eig(K)
        assert np.array_equal(a.values, b.values) and np.array_equal(a.vectors, b.vectors)

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetricError):
            sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_nonsquare_and_nan(self):
        with pytest.raises(NotSymmetricError):
            sym_eig(np.ones((2, 3)))
        with pytest.raises(NotSymmetricError):
            sym_eig(np.array([[np.nan]]))

    def test_convergence_error(self, rng):
        K = random_psd(rng, 10)
        with pytest.raises(ConvergenceError) as info:
            jacobi_eig(K, max_sweeps=1)
        assert info.value.residual > 0


class TestNormsAndProjection:
    def test_operator_norm_indefinite(self):
        assert operator_norm(np.diag([1.0, -4.0, 2.0])) == 4.0

    def test_project(self):
        assert project([3.0, 4.0], [0.0, 1.0]) == 4.0
        with pytest.raises(ValueError):
            project([1.0, 2.0], [1.0, 0.0, 0.0])


class TestAlignedDistance:
    def test_identity_equals_operator_norm(self, rng):
        A, B = random_psd(rng, 15), random_psd(rng, 15)
        assert aligned_kernel_distance(A, B) == pytest.approx(np.linalg.norm(A - B, 2), rel=1e-10)

    def test_greedy_recovers_permutation(self, rng):
        K, _ = with_spectrum(rng, np.linspace(10.0, 1.0, 12))
        perm = rng.permutation(12)
        Kp = K[np.ix_(perm, perm)]
        assert aligned_kernel_distance(K, Kp) > 1e-3
        assert aligned_kernel_distance(K, Kp, "greedy-eig-match") < 1e-8

    def test_greedy_never_worse(self, rng):
        A, B = random_psd(rng, 10), random_psd(rng, 10)
        assert aligned_kernel_distance(A, B, "greedy-eig-match") <= aligned_kernel_distance(A, B)

    def test_errors(self, rng):
        with pytest.raises(ValueError):
            aligned_kernel_distance(np.eye(2), np.eye(3))
        with pytest.raises(ValueError):
            aligned_kernel_distance(np.eye(2), np.eye(2), "hungarian")
