"""Spectral kernel ridge regression with eigenalignment diagnostics."""

from .linalg import EigenDecomposition, aligned_kernel_distance, operator_norm, project, sym_eig
from .kernels import KernelMatrix, KernelSpec, cross_gram, gram, median_heuristic_bandwidth
from .krr import (KrrModel, fit, generalization_error, predict, reconstruct,
                  reconstruction_error)
from .diagnostics import BoundReport, alignment_profile, generalization_bound, recon_split
from .targets import TargetSpec, build_target, restrict_target

__all__ = [
    "EigenDecomposition",
    "aligned_kernel_distance",
    "operator_norm",
    "project",
    "sym_eig",
    "KernelMatrix",
    "KernelSpec",
    "cross_gram",
    "gram",
    "median_heuristic_bandwidth",
    "KrrModel",
    "fit",
    "generalization_error",
    "predict",
    "reconstruct",
    "reconstruction_error",
    "BoundReport",
    "alignment_profile",
    "generalization_bound",
    "recon_split",
    "TargetSpec",
    "build_target",
    "restrict_target",
]

__version__ = "0.1.0"
