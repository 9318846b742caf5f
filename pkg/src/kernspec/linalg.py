"""Dense symmetric linear algebra.

Eigendecompositions come back sorted by decreasing eigenvalue with a fixed
sign per eigenvector (largest-magnitude entry positive), so downstream
projections and bounds are reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy.spatial.distance import cdist

SYMMETRY_TOL = 1e-12
DEFAULT_RANK_TOL = 1e-12
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
# Above this size "auto" hands the problem to LAPACK; cyclic Jacobi is O(n^3)
# per sweep with a large constant.
JACOBI_MAX_DIM = 256


class NotSymmetricError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Jacobi sweeps hit the cap before the off-diagonal mass vanished."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


def check_symmetric(A, tol=SYMMETRY_TOL):
    """Validate a square symmetric matrix and return (A + A.T) / 2.

    The asymmetry allowed is ``tol * max(1, max|A|)``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise NotSymmetricError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NotSymmetricError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A))))
    asym = float(np.max(np.abs(A - A.T)))
    if asym > tol * scale:
        raise NotSymmetricError(f"matrix is not symmetric: max |A - A^T| = {asym:.3e}")
    return 0.5 * (A + A.T)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix, ``values[i]`` paired with ``vectors[:, i]``."""

    values: np.ndarray
    vectors: np.ndarray
    rank_tol: float = DEFAULT_RANK_TOL

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def zero_threshold(self):
        return self.rank_tol * max(float(self.values[0]), 1.0)

    @property
    def zero_mask(self):
        """True where an eigenvalue counts as zero under ``rank_tol``."""
        return self.values <= self.zero_threshold

    @property
    def rank(self):
        return int(np.count_nonzero(~self.zero_mask))

    def reconstruct(self):
        return (self.vectors * self.values) @ self.vectors.T


@numba.njit(cache=True)
def _jacobi_sweeps(a, v, tol, max_sweeps):
    # Cyclic-by-row Jacobi on a full symmetric matrix, in place.
    # Returns (sweeps used or -1, final off-diagonal Frobenius norm).
    n = a.shape[0]
    off = 0.0
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        off = np.sqrt(2.0 * off)
        if off <= tol:
            return sweep, off
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return -1, off


def jacobi_eig(A, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Unsorted eigenpairs of a symmetric matrix by cyclic Jacobi rotations.

    Converged when the off-diagonal Frobenius norm is at most
    ``tol * ||A||_F``.  Raises ConvergenceError otherwise.
    """
    a = np.array(A, dtype=float, order="C")
    v = np.eye(a.shape[0])
    target = tol * np.linalg.norm(a)
    sweeps, off = _jacobi_sweeps(a, v, target, max_sweeps)
    if sweeps < 0:
        raise ConvergenceError(
            f"Jacobi did not converge in {max_sweeps} sweeps "
            f"(off-diagonal norm {off:.3e} > {target:.3e})",
            residual=off,
        )
    return np.diag(a).copy(), v


def _canonical_order(values, vectors):
    # Descending, ties by ascending original column (stable sort).
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    # Largest |entry| positive; argmax picks the lowest index on ties.
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return values, vectors * signs


def sym_eig(A, rank_tol=DEFAULT_RANK_TOL, method="auto"):
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Symmetric matrix; symmetrized before solving.
    rank_tol : float
        Relative threshold for classifying eigenvalues as zero.
    method : {"auto", "jacobi", "lapack"}
        ``auto`` uses Jacobi rotations up to ``JACOBI_MAX_DIM`` and LAPACK's
        ``syevd`` above that.

    Returns
    -------
    EigenDecomposition
    """
    if rank_tol < 0:
        raise ValueError("rank_tol must be nonnegative")
    A = check_symmetric(A)
    n = A.shape[0]
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_DIM else "lapack"
    if method == "jacobi":
        values, vectors = jacobi_eig(A)
    elif method == "lapack":
        values, vectors = np.linalg.eigh(A)
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    values, vectors = _canonical_order(values, vectors)
    return EigenDecomposition(values=values, vectors=vectors, rank_tol=float(rank_tol))


def operator_norm(A, eig=None):
    """Spectral norm of a symmetric matrix, max |eigenvalue|."""
    if eig is None:
        eig = sym_eig(A)
    return float(max(abs(eig.values[0]), abs(eig.values[-1])))


def project(v, u):
    """Coefficient of ``v`` along the unit vector ``u``."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    if v.shape != u.shape or v.ndim != 1:
        raise ValueError(f"dimension mismatch: {v.shape} vs {u.shape}")
    return float(u @ v)


def _greedy_match(K, K_star, n_modes=10):
    # Spectral row signatures; the sign convention is permutation invariant,
    # so a relabelled copy of K produces the same signatures row for row.
    k = min(n_modes, K.shape[0])
    ea = sym_eig(K)
    eb = sym_eig(K_star)
    sa = ea.vectors[:, :k] * np.sqrt(np.abs(ea.values[:k]))
    sb = eb.vectors[:, :k] * np.sqrt(np.abs(eb.values[:k]))
    cost = cdist(sa, sb)
    n = K.shape[0]
    perm = np.full(n, -1)
    taken = np.zeros(n, dtype=bool)
    assigned = 0
    for flat in np.argsort(cost, axis=None, kind="stable"):
        i, j = divmod(int(flat), n)
        if perm[i] >= 0 or taken[j]:
            continue
        perm[i] = j
        taken[j] = True
        assigned += 1
        if assigned == n:
            break
    return perm


def aligned_kernel_distance(K, K_star, strategy="identity"):
    """Operator norm of ``K - Q K_star Q^T`` for a row permutation Q.

    ``identity`` uses Q = I.  ``greedy-eig-match`` pairs rows by their
    leading spectral coordinates and never returns more than the identity
    distance.
    """
    K = check_symmetric(K)
    K_star = check_symmetric(K_star)
    if K.shape != K_star.shape:
        raise ValueError(f"dimension mismatch: {K.shape} vs {K_star.shape}")
    base = operator_norm(K - K_star)
    if strategy == "identity":
        return base
    if strategy != "greedy-eig-match":
        raise ValueError(f"unknown permutation strategy {strategy!r}")
    perm = _greedy_match(K, K_star)
    permuted = operator_norm(K - K_star[np.ix_(perm, perm)])
    return min(base, permuted)
