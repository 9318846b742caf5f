import numpy as np
import pytest

from conftest import random_psd
from kernspec.diagnostics import alignment_profile
from kernspec.linalg import sym_eig
from kernspec.targets import TargetSpec, build_target, restrict_target, single


@pytest.fixture
def eig(rng):
    return sym_eig(random_psd(rng, 20))


class TestBuild:
    def test_difference_of_modes(self, eig):
        y = build_target(eig, TargetSpec("indexed-combination", (3, 5), (1.0, -1.0)))
        assert np.array_equal(y, eig.vectors[:, 2] - eig.vectors[:, 4])

    def test_cumulative_count_one(self, eig):
        assert np.array_equal(build_target(eig, TargetSpec("cumulative-mean", count=1)), eig.vectors[:, 0])

    def test_cumulative_mean(self, eig):
        y = build_target(eig, TargetSpec("cumulative-mean", count=4))
        assert np.allclose(y, eig.vectors[:, :4].mean(axis=1), atol=1e-15)

    def test_normalized_scaled_norm(self, eig):
        for r in range(1, 21, 2):
            assert np.linalg.norm(build_target(eig, single(r, scale=10.0, normalize=True))) == pytest.approx(10.0, abs=1e-12)

    def test_combination_normalize(self, eig):
        y = build_target(eig, TargetSpec("indexed-combination", (1, 2), (3.0, 4.0), normalize=True))
        assert np.linalg.norm(y) == pytest.approx(1.0, abs=1e-12)

    def test_random_weighted_seeded(self, eig):
        spec = TargetSpec("random-weighted", (1, 4, 9), seed=7)
        a, b = build_target(eig, spec), build_target(eig, spec)
        assert np.array_equal(a, b)
        assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)
        w = np.random.default_rng(7).uniform(0, 1, 3)
        assert np.allclose(a, eig.vectors[:, [0, 3, 8]] @ w / np.linalg.norm(w))

    def test_support_equals_indices(self, eig):
        spec = TargetSpec("indexed-combination", (2, 7, 11), (1.0, 0.5, -2.0))
        assert (alignment_profile(eig, build_target(eig, spec)).support + 1).tolist() == [2, 7, 11]

    def test_out_of_range(self, eig):
        with pytest.raises(ValueError):
            build_target(eig, single(21))
        with pytest.raises(ValueError):
            build_target(eig, TargetSpec("cumulative-mean", count=21))

    def test_zero_norm_under_normalize(self, eig):
        with pytest.raises(ValueError, match="zero norm"):
            build_target(eig, TargetSpec("indexed-combination", (1, 1), (1.0, -1.0), normalize=True))


class TestSpec:
    @pytest.mark.parametrize("kw", [
        {"kind": "sum"},
        {"kind": "indexed-combination", "indices": (1, 2), "weights": (1.0,)},
        {"kind": "indexed-combination", "indices": (0,), "weights": (1.0,)},
        {"kind": "indexed-combination", "indices": (1,), "weights": (np.inf,)},
        {"kind": "cumulative-mean", "count": 0},
        {"kind": "random-weighted"},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            TargetSpec(**kw)

    def test_labels(self):
        assert TargetSpec("indexed-combination", (3, 5), (1.0, -1.0)).label() == "u3-u5"
        assert TargetSpec("indexed-combination", (100, 101), (1.0, 1.0)).label() == "u100+u101"
        assert TargetSpec("cumulative-mean", count=11).label() == "mean11"


class TestRestrict:
    def test_identity_and_reversal(self):
        y = np.arange(5.0)
        assert np.array_equal(restrict_target(y, [1, 2, 3, 4, 5]), y)
        assert np.array_equal(restrict_target(y, [5, 4, 3, 2, 1]), y[::-1])

    def test_subset(self):
        y = np.arange(10.0) * 2
        assert restrict_target(y, [2, 5, 9]).tolist() == [2.0, 8.0, 16.0]

    @pytest.mark.parametrize("idx", [[1, 1], [0, 2], [11], [[1, 2]]])
    def test_invalid(self, idx):
        with pytest.raises(ValueError):
            restrict_target(np.arange(10.0), idx)
