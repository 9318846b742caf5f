"""Synthetic learning targets built from kernel eigenvectors.

Configs use 1-based eigenvector ranks (rank 1 = largest eigenvalue); arrays
are 0-based internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("indexed-combination", "cumulative-mean", "random-weighted")


@dataclass(frozen=True)
class TargetSpec:
    kind: str
    indices: tuple[int, ...] = ()
    weights: tuple[float, ...] = ()
    count: int = 1
    scale: float = 1.0
    normalize: bool = False
    seed: int = 0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown target kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.kind == "indexed-combination" and len(self.weights) != len(self.indices):
            raise ValueError("indexed-combination needs one weight per index")
        if self.kind in ("indexed-combination", "random-weighted") and not self.indices:
            raise ValueError(f"{self.kind} needs at least one index")
        if any(i < 1 for i in self.indices):
            raise ValueError("eigenvector ranks are 1-based")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        if self.kind == "cumulative-mean" and self.count < 1:
            raise ValueError("count must be positive")

    def label(self):
        if self.name:
            return self.name
        if self.kind == "cumulative-mean":
            return f"mean{self.count}"
        if self.kind == "random-weighted":
            return "rw" + "+".join(str(i) for i in self.indices)
        parts = []
        for i, w in zip(self.indices, self.weights):
            sign = "-" if w < 0 else "+"
            mag = "" if abs(w) == 1 else f"{abs(w):g}*"
            parts.append(f"{sign}{mag}u{i}")
        out = "".join(parts)
        return out[1:] if out.startswith("+") else out

    def check(self, n):
        if self.kind == "cumulative-mean":
            if self.count > n:
                raise ValueError(f"count {self.count} exceeds dimension {n}")
        elif max(self.indices) > n:
            raise ValueError(f"eigenvector rank {max(self.indices)} out of range 1..{n}")


def single(rank, scale=1.0, normalize=False):
    return TargetSpec("indexed-combination", (rank,), (1.0,), scale=scale, normalize=normalize)


def build_target(eig, spec):
    """Target vector from the eigenvectors of ``eig`` per ``spec``."""
    spec.check(eig.n)
    U = eig.vectors
    if spec.kind == "cumulative-mean":
        y = U[:, : spec.count].sum(axis=1) / spec.count
    elif spec.kind == "indexed-combination":
        cols = [i - 1 for i in spec.indices]
        y = U[:, cols] @ np.asarray(spec.weights)
    else:
        rng = np.random.default_rng(spec.seed)
        w = rng.uniform(0.0, 1.0, size=len(spec.indices))
        y = U[:, [i - 1 for i in spec.indices]] @ w
    if spec.normalize or spec.kind == "random-weighted":
        norm = np.linalg.norm(y)
        if norm == 0:
            raise ValueError("target has zero norm and cannot be normalized")
        y = y / norm
    return spec.scale * y


def restrict_target(y_full, sample_indices):
    """Entries of ``y_full`` at 1-based ``sample_indices``, in sample order."""
    y_full = np.asarray(y_full, dtype=float)
    idx = np.asarray(sample_indices, dtype=int)
    if idx.ndim != 1:
        raise ValueError("sample indices must be one-dimensional")
    if np.unique(idx).size != idx.size:
        raise ValueError("sample indices must be distinct")
    if idx.size and (idx.min() < 1 or idx.max() > y_full.shape[0]):
        raise ValueError(f"sample indices must lie in 1..{y_full.shape[0]}")
    return y_full[idx - 1]
