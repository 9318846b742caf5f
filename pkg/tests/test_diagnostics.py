import numpy as np
import pytest

from conftest import random_psd, with_spectrum
from kernspec.diagnostics import (
    alignment_profile,
    cross_gaps,
    davis_kahan,
    empirical_overlap,
    gap_profile,
    generalization_bound,
    loukas_bound,
    loukas_condition,
    loukas_condition_matrix,
    recon_split,
    theta,
    within_gaps,
)
from kernspec.krr import fit, reconstruction_error
from kernspec.linalg import EigenDecomposition, sym_eig


def eig_of(values, vectors=None):
    values = np.asarray(values, dtype=float)
    vectors = np.eye(values.size) if vectors is None else vectors
    return EigenDecomposition(values=values, vectors=vectors)


class TestAlignment:
    def test_single_eigenvector(self, rng):
        K, _ = with_spectrum(rng, [4.0, 2.0, 1.0])
        eig = sym_eig(K)
        prof = alignment_profile(eig, eig.vectors[:, 1])
        assert np.allclose(prof.energy_fractions, [0, 1, 0], atol=1e-14)
        assert prof.support.tolist() == [1]

    def test_energy_sums_to_one(self, rng):
        eig = sym_eig(random_psd(rng, 10))
        assert alignment_profile(eig, rng.standard_normal(10)).energy_fractions.sum() == pytest.approx(1.0)

    def test_zero_target(self):
        with pytest.raises(ValueError):
            alignment_profile(eig_of([1.0, 2.0]), np.zeros(2))


class TestReconSplit:
    def test_hand_example(self):
        # diag(1, 0), y = (a, b), z = 1 -> ridge a^2/4, null b^2
        ridge, null = recon_split(eig_of([1.0, 0.0]), np.array([0.6, 0.8]), 1.0)
        assert ridge == pytest.approx(0.09) and null == pytest.approx(0.64)

    def test_full_rank_has_no_null_part(self, rng):
        eig = sym_eig(random_psd(rng, 6))
        assert recon_split(eig, np.ones(6), 0.1)[1] == 0.0

    def test_reconciles_with_reconstruction_error(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(2, 30))
            K = random_psd(rng, n, rank=int(rng.integers(1, n + 1)))
            y = rng.standard_normal(n)
            z = 10 ** rng.uniform(-4, 1)
            eig = sym_eig(K)
            ridge, null = recon_split(eig, y, z)
            assert ridge + null == pytest.approx(n * reconstruction_error(fit(K, y, z, eig=eig)), rel=1e-8)


class TestGaps:
    def test_within(self):
        assert within_gaps([5.0, 3.0, 2.5]).tolist() == [2.0, 0.5, 0.5]

    def test_cross(self):
        assert cross_gaps([5.1, 2.9, 2.4], [5.0, 3.0, 2.5]).tolist() == pytest.approx([2.1, 0.6, 0.4])

    def test_profile(self):
        prof = gap_profile([2.0, 1.0], [2.1, 0.9])
        assert prof.effective is prof.cross_gaps
        plain = gap_profile([2.0, 1.0])
        assert plain.cross_gaps is None and plain.effective is plain.within_gaps


class TestDavisKahanAndTheta:
    def test_examples(self):
        assert davis_kahan(0.0, np.array([0.5, 1.0]))[0].tolist() == [0.0, 0.0]
        assert davis_kahan(0.1, np.array([0.5]))[0][0] == pytest.approx(0.2)
        bounds, flags = davis_kahan(0.1, np.array([0.0]))
        assert bounds[0] == 1.0 and flags[0]

    def test_theta_examples(self):
        assert theta(0.0, np.array([0.1, 0.0])).tolist() == [1.0, 1.0]
        assert theta(0.6, np.array([1.0]))[0] == pytest.approx(0.8)
        assert theta(2.0, np.array([1.0, 2.0, 0.0])).tolist() == [0.0, 0.0, 0.0]

    def test_negative_norm(self):
        with pytest.raises(ValueError):
            theta(-1.0, np.ones(2))


class TestLoukas:
    def test_bound_examples(self):
        assert loukas_bound(0.0, 2.0, 1.0) == (0.0, False)
        assert loukas_bound(0.25, 3.0, 1.0) == (0.25, False)
        assert loukas_bound(0.25, 1.0, 1.0) == (1.0, True)

    def test_condition_examples(self):
        assert loukas_condition(3.0, 1.0, 3.0)
        assert not loukas_condition(3.0, 1.0, 1.9)
        assert not loukas_condition(2.0, 2.0, 5.0)

    def test_matrix_matches_scalar(self, rng):
        ds = np.sort(rng.uniform(0, 5, 6))[::-1]
        d = ds + rng.normal(0, 0.3, 6)
        M = loukas_condition_matrix(ds, d)
        for i in range(6):
            for j in range(6):
                assert M[i, j] == (i != j and loukas_condition(ds[i], ds[j], d[i]))


class TestOverlap:
    def test_identity(self, rng):
        eig = sym_eig(random_psd(rng, 5))
        assert np.allclose(empirical_overlap(eig, eig), np.eye(5))

    def test_rotation(self):
        a = eig_of([2.0, 1.0])
        b = eig_of([2.0, 1.0], np.array([[0.0, -1.0], [1.0, 0.0]]))
        assert np.array_equal(empirical_overlap(a, b), [[0, 1], [1, 0]])

    def test_mismatch(self):
        with pytest.raises(ValueError):
            empirical_overlap(eig_of([1.0]), eig_of([1.0, 2.0]))


class TestGeneralizationBound:
    def test_single_mode_hand_value(self):
        ref = eig_of([10.0, 1.0, 0.1])
        row = np.array([0.3, -0.2, 0.5])
        rep = generalization_bound(ref, np.array([1.0, 0.0, 0.0]), 0.0, 0.05, row)
        # within-spectrum gaps are (9, 0.9, 0.9)
        th1 = np.sqrt(1 - (0.05 / 9.0) ** 2)
        th = np.sqrt(1 - (0.05 / 0.9) ** 2)
        C = max(0.3 / 10, 0.2 / 1, 0.5 / 0.1, np.linalg.norm(row))
        assert rep.cross_gap_terms[0] == 0.0
        assert rep.theta[0] == pytest.approx(th1)
        assert rep.theta[1] == pytest.approx(th)
        assert rep.C_j == pytest.approx(C)
        assert rep.total == pytest.approx(C * ((1 - th1) + (0.05 + np.sqrt(2 - 2 * th1)) / 10.0), rel=1e-12)

    def test_zero_perturbation(self, rng):
        eig = sym_eig(random_psd(rng, 8))
        rep = generalization_bound(eig, rng.standard_normal(8), 0.1, 0.0, rng.standard_normal(8))
        assert rep.total == 0.0
        assert np.all(rep.theta == 1.0)

    def test_tie_clamps_and_flags(self):
        ref = eig_of([2.0, 2.0, 1.0])
        rep = generalization_bound(ref, np.array([1.0, 1.0, 0.0]), 0.1, 0.01, np.ones(3))
        assert rep.cross_gap_terms[0] == 1.0 and rep.cross_gap_terms[1] == 1.0
        assert rep.degenerate[0] and rep.degenerate[1]

    def test_tail_decreasing_in_ridge(self, rng):
        eig = sym_eig(random_psd(rng, 10))
        y, row = rng.standard_normal(10), rng.standard_normal(10)
        tails = [generalization_bound(eig, y, z, 0.05, row).tail_terms for z in [0.0, 0.01, 0.1, 1.0]]
        for a, b in zip(tails, tails[1:]):
            assert np.all(b <= a)

    def test_total_is_sum_of_contributions(self, rng):
        eig = sym_eig(random_psd(rng, 12))
        rep = generalization_bound(eig, rng.standard_normal(12), 0.05, 0.02, rng.standard_normal(12),
                                   perturbed_values=eig.values + 0.01)
        assert rep.total == pytest.approx(rep.per_index_contributions().sum(), rel=1e-14)
        assert rep.loukas_condition_flags.shape == (12, 12)
        d = rep.to_dict(include_flags=True)
        assert len(d["contributions"]) == 12 and "loukas_condition_flags" in d

    def test_squared(self):
        rep = generalization_bound(eig_of([2.0, 1.0]), np.array([1.0, 0.0]), 0.1, 0.1, np.array([1.0, 0.0]))
        assert rep.squared(0.5) == pytest.approx((rep.total + 0.5) ** 2)

    def test_errors(self):
        ref = eig_of([2.0, 1.0])
        with pytest.raises(ValueError):
            generalization_bound(ref, np.zeros(2), 0.1, 0.1, np.ones(2))
        with pytest.raises(ValueError):
            generalization_bound(ref, np.ones(2), -0.1, 0.1, np.ones(2))
        with pytest.raises(ValueError):
            generalization_bound(ref, np.ones(2), 0.1, 0.1, np.ones(3))
        with pytest.raises(TypeError):
            generalization_bound(np.eye(2), np.ones(2), 0.1, 0.1, np.ones(2))
