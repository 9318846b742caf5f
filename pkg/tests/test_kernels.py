import numpy as np
import pytest
from scipy.spatial.distance import pdist

from kernspec.kernels import (
    DegenerateBandwidthError,
    KernelSpec,
    cross_gram,
    gram,
    median_heuristic_bandwidth,
)


def naive_gram(X, spec):
    n = X.shape[0]
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            t = float(np.dot(X[i], X[j]))
            if spec.family == "linear":
                K[i, j] = t
            elif spec.family == "scaled-linear":
                K[i, j] = t / spec.scale
            elif spec.family == "scaled-square":
                K[i, j] = t * t / spec.scale
            elif spec.family == "rbf":
                K[i, j] = np.exp(-np.sum((X[i] - X[j]) ** 2) / (2 * spec.bandwidth**2))
            else:
                K[i, j] = spec.diag_value * (i == j)
    return K


class TestMedianHeuristic:
    def test_three_points(self):
        X = np.array([[0.0], [1.0], [3.0]])
        assert median_heuristic_bandwidth(X) == 2.0

    def test_matches_pairwise_loop(self, rng):
        X = rng.standard_normal((9, 3))
        d = [np.linalg.norm(X[i] - X[j]) for i in range(9) for j in range(i + 1, 9)]
        assert median_heuristic_bandwidth(X) == pytest.approx(np.median(d), rel=1e-14)

    def test_degenerate(self):
        with pytest.raises(DegenerateBandwidthError):
            median_heuristic_bandwidth(np.ones((4, 2)))


class TestGram:
    @pytest.mark.parametrize("family", ["linear", "scaled-linear", "scaled-square", "rbf", "trivial-diagonal"])
    def test_matches_naive(self, rng, family):
        X = rng.standard_normal((7, 4))
        km = gram(X, KernelSpec(family))
        assert km.spec.resolved
        assert np.allclose(km.gram, naive_gram(X, km.spec), rtol=1e-12, atol=1e-14)
        assert np.array_equal(km.gram, km.gram.T)

    def test_default_scale_is_sqrt_dim(self, rng):
        X = rng.standard_normal((3, 16))
        assert gram(X, KernelSpec("scaled-linear")).spec.scale == 4.0

    def test_scale_dim_and_override(self, rng):
        X = rng.standard_normal((3, 16))
        assert gram(X, KernelSpec("scaled-linear", scale="dim")).spec.scale == 16.0
        assert gram(X, KernelSpec("scaled-square", scale=28.0)).spec.scale == 28.0

    def test_rbf_median_bandwidth(self, rng):
        X = rng.standard_normal((10, 2))
        assert gram(X, KernelSpec("rbf")).spec.bandwidth == pytest.approx(np.median(pdist(X)))

    def test_rbf_psd_and_unit_diagonal(self, rng):
        K = gram(rng.standard_normal((30, 3)), KernelSpec("rbf")).gram
        assert np.allclose(np.diag(K), 1.0)
        assert np.linalg.eigvalsh(K).min() > -1e-10

    def test_trivial_diagonal(self, rng):
        K = gram(rng.standard_normal((5, 2)), KernelSpec("trivial-diagonal")).gram
        assert np.array_equal(K, 500.0 * np.eye(5))

    def test_fingerprint_changes_with_data(self, rng):
        X = rng.standard_normal((4, 2))
        a = gram(X, KernelSpec("linear")).source_fingerprint
        X[0, 0] += 1e-12
        assert gram(X, KernelSpec("linear")).source_fingerprint != a


class TestCrossGram:
    @pytest.mark.parametrize("family", ["linear", "scaled-linear", "scaled-square", "rbf"])
    def test_consistent_with_gram_block(self, rng, family):
        X = rng.standard_normal((12, 3))
        km = gram(X[:8], KernelSpec(family))
        C = cross_gram(X[8:], X[:8], km.spec, km.source_fingerprint)
        full = naive_gram(X, km.spec)
        assert np.allclose(C, full[8:, :8], rtol=1e-12, atol=1e-14)

    def test_trivial_diagonal_bitwise_match(self, rng):
        X = rng.standard_normal((4, 3))
        km = gram(X, KernelSpec("trivial-diagonal"))
        test = np.vstack([X[2], X[2] + 1e-15, rng.standard_normal(3)])
        C = cross_gram(test, X, km.spec)
        assert C[0, 2] == 500.0 and C[0].sum() == 500.0
        assert not C[1:].any()

    def test_requires_resolved_spec(self, rng):
        X = rng.standard_normal((4, 2))
        with pytest.raises(ValueError, match="unresolved"):
            cross_gram(X, X, KernelSpec("rbf"))

    def test_fingerprint_mismatch(self, rng):
        X = rng.standard_normal((4, 2))
        km = gram(X, KernelSpec("linear"))
        with pytest.raises(ValueError, match="fingerprint"):
            cross_gram(X, X + 1.0, km.spec, km.source_fingerprint)

    def test_dimension_mismatch(self, rng):
        km = gram(rng.standard_normal((4, 2)), KernelSpec("linear"))
        with pytest.raises(ValueError, match="dimension"):
            cross_gram(rng.standard_normal((2, 3)), rng.standard_normal((4, 2)), km.spec)


class TestSpec:
    @pytest.mark.parametrize("kw", [{"family": "cosine"}, {"family": "rbf", "bandwidth": -1.0},
                                    {"family": "linear", "scale": 0.0}, {"family": "rbf", "bandwidth": "silverman"},
                                    {"family": "trivial-diagonal", "diag_value": 0.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            KernelSpec(**kw)

    def test_round_trip(self):
        spec = KernelSpec("rbf", bandwidth=0.3)
        assert KernelSpec.from_dict(spec.to_dict()) == spec

    def test_unknown_keys(self):
        with pytest.raises(ValueError, match="unknown kernel keys"):
            KernelSpec.from_dict({"family": "rbf", "gamma": 1.0})
