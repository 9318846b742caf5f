"""Eigenalignment diagnostics and perturbation bounds for KRR.

The reference kernel K* (eigenpairs d*_i, u*_i) stands for the best
achievable training sample of size n; the observed kernel is K = K* + dK.
The per-test-point bound is

    S_j = C_j * sum_i |P*_i| * ( sum_{k != i, k aligned} 2||dK|| / |d*_i - d*_k|
                                 + (1 - Theta_i)
                                 + (||dK|| + sqrt(2 - 2 Theta_i)) / (d*_i + z) )

with P*_i = u*_i^T y, Theta_i = sqrt(1 - min(1, (||dK|| / delta_i)^2)) and
C_j = max(|b_1|, ..., |b_n|, ||k_j||), b_i = (u*_i^T k_j) / (d*_i + z).

Every ratio bound on |<u, u'>| is clamped to 1; a zero gap yields the
clamp value and sets a degeneracy flag instead of dividing by zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import EigenDecomposition

DEFAULT_ALIGN_TOL = 1e-10


@dataclass(frozen=True)
class AlignmentProfile:
    projections: np.ndarray
    energy_fractions: np.ndarray
    support: np.ndarray  # 0-based indices


@dataclass(frozen=True)
class GapProfile:
    within_gaps: np.ndarray
    cross_gaps: np.ndarray | None = None

    @property
    def effective(self):
        return self.within_gaps if self.cross_gaps is None else self.cross_gaps


def _target(y, n):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != n:
        raise ValueError(f"target length {y.shape} does not match dimension {n}")
    norm = float(np.linalg.norm(y))
    if norm == 0.0:
        raise ValueError("target vector is zero")
    return y, norm


def alignment_profile(eig, y, align_tol=DEFAULT_ALIGN_TOL):
    """Projections of y on each eigenvector and their share of ||y||^2.

    ``support`` holds the indices with |P_i| > align_tol * ||y||.
    """
    y, norm = _target(y, eig.n)
    P = eig.vectors.T @ y
    energy = P**2 / norm**2
    support = np.flatnonzero(np.abs(P) > align_tol * norm)
    return AlignmentProfile(projections=P, energy_fractions=energy, support=support)


def recon_split(eig, y, z, rank_tol=None):
    """Split n * E_re into the ridge-shrinkage part and the null-space floor.

    Returns ``(ridge_part, null_part)`` where ridge_part sums
    z^2 P_i^2 / (d_i + z)^2 over nonzero eigenvalues and null_part sums P_i^2
    over eigenvalues classified as zero.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (eig.n,):
        raise ValueError(f"target length {y.shape} does not match dimension {eig.n}")
    if rank_tol is None:
        zero = eig.zero_mask
    else:
        zero = eig.values <= rank_tol * max(float(eig.values[0]), 1.0)
    P = eig.vectors.T @ y
    d = eig.values[~zero]
    shrink = z * P[~zero] / (d + z)
    return float(shrink @ shrink), float(P[zero] @ P[zero])


def within_gaps(values):
    """delta_i = min_{j != i} |d_i - d_j| inside one spectrum."""
    d = np.asarray(values, dtype=float)
    if d.size < 2:
        return np.full(d.shape, np.inf)
    diff = np.abs(d[:, None] - d[None, :])
    np.fill_diagonal(diff, np.inf)
    return diff.min(axis=1)


def cross_gaps(perturbed, reference):
    """delta_i = min_{k != i} |d_k - d*_i| between two index-aligned spectra."""
    d = np.asarray(perturbed, dtype=float)
    ds = np.asarray(reference, dtype=float)
    if d.shape != ds.shape:
        raise ValueError("spectra must have the same length")
    if d.size < 2:
        return np.full(d.shape, np.inf)
    diff = np.abs(d[None, :] - ds[:, None])
    np.fill_diagonal(diff, np.inf)
    return diff.min(axis=1)


def gap_profile(reference, perturbed=None):
    ref = np.asarray(reference, dtype=float)
    cross = None if perturbed is None else cross_gaps(perturbed, ref)
    return GapProfile(within_gaps=within_gaps(ref), cross_gaps=cross)


def _clamped_ratio(numerator, gaps):
    gaps = np.asarray(gaps, dtype=float)
    degenerate = gaps == 0
    if numerator == 0:
        return np.zeros(gaps.shape), degenerate
    with np.errstate(divide="ignore"):
        ratio = np.where(degenerate, 1.0, numerator / np.where(degenerate, 1.0, gaps))
    return np.minimum(1.0, ratio), degenerate


def davis_kahan(delta_k_norm, gaps):
    """Upper bounds on sin(theta_t) = min(1, ||dK|| / delta_t).

    Uses the cross-spectrum gaps when the profile has them (perturbed
    eigenvalues against the reference one), else the within-spectrum gaps.
    Returns ``(bounds, degenerate)``.
    """
    if delta_k_norm < 0:
        raise ValueError("delta_k_norm must be nonnegative")
    g = gaps.effective if isinstance(gaps, GapProfile) else gaps
    return _clamped_ratio(float(delta_k_norm), g)


def theta(delta_k_norm, gaps):
    """Overlap floor Theta_i = sqrt(1 - min(1, (||dK|| / delta_i)^2)).

    ||dK|| = 0 gives 1 everywhere, including at zero gaps.
    """
    if delta_k_norm < 0:
        raise ValueError("delta_k_norm must be nonnegative")
    sin_bound, _ = _clamped_ratio(float(delta_k_norm), gaps)
    return np.sqrt(1.0 - sin_bound**2)


def loukas_bound(delta_k_norm, d_i, d_j):
    """min(1, 2||dK|| / |d_i - d_j|) and a flag for an exact tie."""
    if delta_k_norm < 0:
        raise ValueError("delta_k_norm must be nonnegative")
    bound, degenerate = _clamped_ratio(2.0 * float(delta_k_norm), np.array([abs(d_i - d_j)]))
    return float(bound[0]), bool(degenerate[0])


def loukas_condition(d_star_i, d_star_j, d_i):
    """2 sign(d*_i - d*_j) d_i > sign(d*_i - d*_j) (d*_i + d*_j); false on ties."""
    s = np.sign(d_star_i - d_star_j)
    if s == 0:
        return False
    return bool(2.0 * s * d_i > s * (d_star_i + d_star_j))


def loukas_condition_matrix(reference, perturbed):
    """Entry (i, j) is loukas_condition(d*_i, d*_j, d_i); diagonal False."""
    ds = np.asarray(reference, dtype=float)
    d = np.asarray(perturbed, dtype=float)
    s = np.sign(ds[:, None] - ds[None, :])
    flags = (2.0 * s * d[:, None] > s * (ds[:, None] + ds[None, :])) & (s != 0)
    np.fill_diagonal(flags, False)
    return flags


def empirical_overlap(eig_a, eig_b):
    """Matrix of |u_i^T v_j| between two eigenbases."""
    if eig_a.n != eig_b.n:
        raise ValueError(f"dimension mismatch: {eig_a.n} vs {eig_b.n}")
    return np.abs(eig_a.vectors.T @ eig_b.vectors)


@dataclass(frozen=True)
class BoundReport:
    delta_k_norm: float
    ridge: float
    projections: np.ndarray
    support: np.ndarray
    test_projections: np.ndarray
    gaps: np.ndarray
    theta: np.ndarray
    cross_gap_terms: np.ndarray
    misalignment_terms: np.ndarray
    tail_terms: np.ndarray
    C_j: float
    total: float
    degenerate: np.ndarray
    loukas_condition_flags: np.ndarray | None = field(default=None, repr=False)

    def weights(self):
        """|P*_i| on the aligned support, zero elsewhere."""
        w = np.zeros_like(self.projections)
        w[self.support] = np.abs(self.projections[self.support])
        return w

    def per_index_contributions(self):
        terms = self.cross_gap_terms + self.misalignment_terms + self.tail_terms
        w = self.weights()
        out = np.zeros_like(w)
        # C_j may be infinite at z = 0 with null eigenvalues; zero terms stay zero.
        nz = (w != 0) & (terms != 0)
        out[nz] = self.C_j * w[nz] * terms[nz]
        return out

    def recompute_total(self):
        return float(np.sum(self.per_index_contributions()))

    def squared(self, approx_const=0.0):
        """(S_j + approx_const)^2, the bound on the expected squared error."""
        return (self.total + float(approx_const)) ** 2

    def to_dict(self, include_flags=False):
        out = {
            "delta_k_norm": self.delta_k_norm,
            "ridge": self.ridge,
            "C_j": self.C_j,
            "total": self.total,
            "support": self.support.tolist(),
            "projections": self.projections.tolist(),
            "test_projections": self.test_projections.tolist(),
            "gaps": _json_floats(self.gaps),
            "theta": self.theta.tolist(),
            "cross_gap_terms": self.cross_gap_terms.tolist(),
            "misalignment_terms": self.misalignment_terms.tolist(),
            "tail_terms": _json_floats(self.tail_terms),
            "contributions": _json_floats(self.per_index_contributions()),
            "degenerate": self.degenerate.tolist(),
        }
        if include_flags and self.loukas_condition_flags is not None:
            out["loukas_condition_flags"] = self.loukas_condition_flags.tolist()
        return out


def _json_floats(a):
    return [v if np.isfinite(v) else None for v in np.asarray(a, dtype=float).tolist()]


def generalization_bound(ref_eig, y, z, delta_k_norm, test_row,
                         align_tol=DEFAULT_ALIGN_TOL, perturbed_values=None, C_j=None):
    """Per-test-point generalization bound S_j with its per-index terms.

    Parameters
    ----------
    ref_eig : EigenDecomposition
        Eigenpairs of the reference kernel K*.
    y : array, shape (n,)
        Training target.
    z : float
        Ridge.
    delta_k_norm : float
        ||K - Q K* Q^T||.
    test_row : array, shape (n,)
        Kernel row of the test point against the training points.
    align_tol : float
        Relative threshold deciding which P*_k count as nonzero.
    perturbed_values : array, optional
        Eigenvalues of the observed kernel.  When given, Theta uses the
        cross gaps min_{k != i} |d_k - d*_i| and the Loukas condition flags
        are filled in; otherwise Theta uses gaps within the reference spectrum.
    C_j : float, optional
        Override for the test-point multiplier.
    """
    if not isinstance(ref_eig, EigenDecomposition):
        raise TypeError("ref_eig must be an EigenDecomposition")
    n = ref_eig.n
    y, _ = _target(y, n)
    if z < 0:
        raise ValueError("ridge z must be nonnegative")
    if delta_k_norm < 0:
        raise ValueError("delta_k_norm must be nonnegative")
    row = np.asarray(test_row, dtype=float)
    if row.shape != (n,):
        raise ValueError(f"test row length {row.shape} does not match dimension {n}")

    ds = ref_eig.values
    profile = alignment_profile(ref_eig, y, align_tol)
    support = profile.support
    gaps = gap_profile(ds, perturbed_values)
    eff_gaps = gaps.effective
    th = theta(delta_k_norm, eff_gaps)
    degenerate = eff_gaps == 0

    cross = np.zeros(n)
    if support.size:
        pair_gaps = np.abs(ds[:, None] - ds[None, support])
        summands, tie = _clamped_ratio(2.0 * float(delta_k_norm), pair_gaps)
        self_pair = np.arange(n)[:, None] == support[None, :]
        summands[self_pair] = 0.0
        tie &= ~self_pair
        cross = summands.sum(axis=1)
        degenerate = degenerate | tie.any(axis=1)

    denom = ds + z
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = (delta_k_norm + np.sqrt(np.maximum(0.0, 2.0 - 2.0 * th))) / denom
        beta = ref_eig.vectors.T @ row
        b = beta / denom
    tail = np.where(denom > 0, tail, np.inf)
    if delta_k_norm == 0:
        tail = np.zeros(n)
    if C_j is None:
        b_max = float(np.max(np.abs(np.where(denom > 0, b, np.inf))))
        C_j = max(b_max, float(np.linalg.norm(row)))

    flags = None
    if perturbed_values is not None:
        flags = loukas_condition_matrix(ds, perturbed_values)

    report = BoundReport(
        delta_k_norm=float(delta_k_norm),
        ridge=float(z),
        projections=profile.projections,
        support=support,
        test_projections=beta,
        gaps=eff_gaps,
        theta=th,
        cross_gap_terms=cross,
        misalignment_terms=1.0 - th,
        tail_terms=tail,
        C_j=float(C_j),
        total=0.0,
        degenerate=degenerate,
        loukas_condition_flags=flags,
    )
    return replace(report, total=report.recompute_total())
