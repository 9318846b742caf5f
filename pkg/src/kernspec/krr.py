"""Kernel ridge regression solved through the eigendecomposition of K.

With ``K = sum_i d_i u_i u_i^T`` and ``P_i = u_i^T y``:

    alpha   = sum_i P_i u_i / (d_i + z)
    y_hat   = sum_i d_i P_i u_i / (d_i + z)
    E_re    = (1/n) sum_i (P_i z / (d_i + z))**2

No matrix is ever inverted; the eigenpairs used for fitting are the same
ones the diagnostics consume.  Eigenvalues the decomposition classifies as
zero are treated as exact zeros, so null-space components of y are left
untouched at every ridge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelMatrix
from .linalg import EigenDecomposition, sym_eig


class SingularSystemError(ValueError):
    pass


def effective_values(eig):
    """Eigenvalues with those below the rank threshold set to exactly 0."""
    return np.where(eig.zero_mask, 0.0, eig.values)


@dataclass(frozen=True)
class KrrModel:
    eig: EigenDecomposition
    ridge: float
    projections: np.ndarray
    spectral_weights: np.ndarray
    dual_coefficients: np.ndarray
    target: np.ndarray

    @property
    def n(self):
        return self.target.shape[0]

    @property
    def inverse_weights(self):
        """P_i / (d_i + z), the coefficients of alpha in the eigenbasis."""
        return self.projections / (effective_values(self.eig) + self.ridge)


@dataclass(frozen=True)
class ErrorReport:
    reconstruction_mse: float
    generalization_mse: float
    generalization_mae: float
    per_point_residuals: np.ndarray


def fit(K, y, z, eig=None):
    """Fit KRR on a kernel matrix.

    ``K`` may be a KernelMatrix or a plain symmetric array.  Pass ``eig``
    to reuse a decomposition across a ridge sweep.
    """
    if eig is None:
        gram = K.gram if isinstance(K, KernelMatrix) else K
        eig = sym_eig(gram)
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != eig.n:
        raise ValueError(f"target length {y.shape} does not match kernel size {eig.n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("target has non-finite entries")
    z = float(z)
    if not z >= 0:
        raise ValueError("ridge z must be nonnegative")
    if z == 0 and eig.rank < eig.n:
        raise SingularSystemError(
            f"z = 0 with a rank-deficient kernel ({eig.n - eig.rank} zero eigenvalues)"
        )
    U, d = eig.vectors, effective_values(eig)
    P = U.T @ y
    inv = P / (d + z)
    return KrrModel(
        eig=eig,
        ridge=z,
        projections=P,
        spectral_weights=d * inv,
        dual_coefficients=U @ inv,
        target=y.copy(),
    )


def reconstruct(model):
    """Training predictions, a weighted sum of eigenvectors."""
    return model.eig.vectors @ model.spectral_weights


def predict(model, cross, check=False):
    """Predictions for the test rows of ``cross`` (shape m x n).

    Computed in the eigenbasis; ``check=True`` also evaluates ``cross @ alpha``
    and raises if the two disagree beyond 1e-8 relative.
    """
    cross = np.atleast_2d(np.asarray(cross, dtype=float))
    if cross.shape[1] != model.n:
        raise ValueError(f"cross kernel has {cross.shape[1]} columns, model has {model.n}")
    pred = (cross @ model.eig.vectors) @ model.inverse_weights
    if check:
        direct = cross @ model.dual_coefficients
        scale = max(np.linalg.norm(direct), np.finfo(float).tiny)
        if np.linalg.norm(pred - direct) > 1e-8 * scale:
            raise ArithmeticError("spectral and direct predictions disagree")
    return pred


def reconstruction_error(model):
    """(1/n) sum_i (P_i z / (d_i + z))**2."""
    z = model.ridge
    if z == 0:
        return 0.0
    r = model.projections * z / (effective_values(model.eig) + z)
    return float(r @ r) / model.n


def generalization_error(predictions, truth, metric="mse"):
    predictions = np.asarray(predictions, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if predictions.shape != truth.shape:
        raise ValueError(f"length mismatch: {predictions.shape[0]} predictions, {truth.shape[0]} truths")
    if predictions.size == 0:
        raise ValueError("need at least one test point")
    r = truth - predictions
    if metric == "mse":
        return float(np.mean(r * r))
    if metric == "mae":
        return float(np.mean(np.abs(r)))
    raise ValueError(f"unknown metric {metric!r}")


def error_report(model, predictions, truth):
    r = np.asarray(truth, dtype=float) - np.asarray(predictions, dtype=float)
    return ErrorReport(
        reconstruction_mse=reconstruction_error(model),
        generalization_mse=generalization_error(predictions, truth, "mse"),
        generalization_mae=generalization_error(predictions, truth, "mae"),
        per_point_residuals=r,
    )


@dataclass(frozen=True)
class BatchErrors:
    reconstruction: np.ndarray
    generalization_mse: np.ndarray | None
    generalization_mae: np.ndarray | None
    predictions: np.ndarray | None


def batch_errors(eig, Y, z, cross_u=None, truth=None):
    """Errors for many targets sharing one kernel, one column per target.

    ``cross_u`` is the test cross kernel already projected on the
    eigenvectors (``cross @ eig.vectors``) so a ridge sweep pays for it once.
    Column t matches fit(K, Y[:, t], z) followed by predict.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] != eig.n:
        raise ValueError(f"targets must have shape ({eig.n}, T), got {Y.shape}")
    z = float(z)
    if not z > 0:
        raise ValueError("batch_errors needs z > 0")
    d = effective_values(eig)[:, None]
    P = eig.vectors.T @ Y
    shrink = P * z / (d + z)
    recon = np.sum(shrink * shrink, axis=0) / eig.n
    if cross_u is None:
        return BatchErrors(recon, None, None, None)
    pred = cross_u @ (P / (d + z))
    r = np.asarray(truth, dtype=float) - pred
    return BatchErrors(recon, np.mean(r * r, axis=0), np.mean(np.abs(r), axis=0), pred)
