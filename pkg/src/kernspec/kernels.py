"""Gram matrices and test-vs-train cross kernels.

Inner-product families evaluate ``h(x_i . x_j)``:

    linear          h(t) = t
    scaled-linear   h(t) = t / s
    scaled-square   h(t) = t**2 / s

``rbf`` is ``exp(-||x - y||^2 / (2 sigma^2))`` and ``trivial-diagonal`` is
``c * I`` on the training rows and zero against anything not bitwise equal
to a training row.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

FAMILIES = ("linear", "scaled-linear", "scaled-square", "rbf", "trivial-diagonal")
MEDIAN = "median-heuristic"
# Scale sentinels, resolved against the feature dimension p.
SQRT_DIM = "sqrt-dim"
DIM = "dim"


class DegenerateBandwidthError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    family: str
    scale: float | str = SQRT_DIM
    bandwidth: float | str = MEDIAN
    diag_value: float = 500.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if isinstance(self.scale, str):
            if self.scale not in (SQRT_DIM, DIM):
                raise ValueError(f"scale must be positive or one of {SQRT_DIM!r}, {DIM!r}")
        elif not self.scale > 0:
            raise ValueError("scale must be positive")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != MEDIAN:
                raise ValueError(f"bandwidth must be positive or {MEDIAN!r}")
        elif not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if not self.diag_value > 0:
            raise ValueError("diag_value must be positive")

    @property
    def resolved(self):
        return not isinstance(self.scale, str) and not isinstance(self.bandwidth, str)

    def resolve(self, X):
        """Replace the scale/bandwidth sentinels with values computed from X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        scale = self.scale
        if scale == SQRT_DIM:
            scale = float(np.sqrt(X.shape[1]))
        elif scale == DIM:
            scale = float(X.shape[1])
        bandwidth = self.bandwidth
        if bandwidth == MEDIAN:
            bandwidth = median_heuristic_bandwidth(X) if self.family == "rbf" else 1.0
        return replace(self, scale=scale, bandwidth=bandwidth)

    def to_dict(self):
        return {"family": self.family, "scale": self.scale,
                "bandwidth": self.bandwidth, "diag_value": self.diag_value}

    @classmethod
    def from_dict(cls, d):
        known = {"family", "scale", "bandwidth", "diag_value"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown kernel keys: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class KernelMatrix:
    spec: KernelSpec
    gram: np.ndarray
    source_fingerprint: str


def fingerprint(X):
    X = np.ascontiguousarray(X, dtype=float)
    h = hashlib.sha256()
    h.update(str(X.shape).encode())
    h.update(X.tobytes())
    return h.hexdigest()


def _as_data(X, name="X"):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} has non-finite entries")
    return X


def median_heuristic_bandwidth(X):
    """Median Euclidean distance over all pairs i < j."""
    X = _as_data(X)
    if X.shape[0] < 2:
        raise ValueError("median heuristic needs at least two points")
    sigma = float(np.median(pdist(X)))
    if sigma == 0.0:
        raise DegenerateBandwidthError("median pairwise distance is zero; bandwidth is degenerate")
    return sigma


def _inner_product(spec, T):
    if spec.family == "linear":
        return T
    if spec.family == "scaled-linear":
        return T / spec.scale
    return T**2 / spec.scale


def gram(X, spec):
    """Training kernel matrix for the rows of X."""
    X = _as_data(X)
    spec = spec.resolve(X)
    n = X.shape[0]
    if spec.family == "trivial-diagonal":
        K = spec.diag_value * np.eye(n)
    elif spec.family == "rbf":
        sq = squareform(pdist(X, "sqeuclidean"))
        K = np.exp(-sq / (2.0 * spec.bandwidth**2))
    else:
        T = X @ X.T
        K = _inner_product(spec, 0.5 * (T + T.T))
    return KernelMatrix(spec=spec, gram=K, source_fingerprint=fingerprint(X))


def cross_gram(X_test, X_train, spec, train_fingerprint=None):
    """Kernel rows of the test points against the training points, shape (m, n).

    ``spec`` must already be resolved (take it from the training
    KernelMatrix) so both sides use the same scale and bandwidth.
    """
    X_test = _as_data(X_test, "X_test")
    X_train = _as_data(X_train, "X_train")
    if X_test.shape[1] != X_train.shape[1]:
        raise ValueError(f"dimension mismatch: test p={X_test.shape[1]}, train p={X_train.shape[1]}")
    if not spec.resolved:
        raise ValueError("kernel spec has unresolved scale/bandwidth; use the spec from the training gram")
    if train_fingerprint is not None and train_fingerprint != fingerprint(X_train):
        raise ValueError("X_train does not match the training fingerprint")
    if spec.family == "trivial-diagonal":
        rows = {}
        for j, row in enumerate(X_train):
            rows.setdefault(row.tobytes(), []).append(j)
        C = np.zeros((X_test.shape[0], X_train.shape[0]))
        for i, row in enumerate(X_test):
            for j in rows.get(row.tobytes(), ()):
                C[i, j] = spec.diag_value
        return C
    if spec.family == "rbf":
        return np.exp(-cdist(X_test, X_train, "sqeuclidean") / (2.0 * spec.bandwidth**2))
    return _inner_product(spec, X_test @ X_train.T)
