"""Datasets: IDX and CSV loaders, binary label filtering, seeded sampling,
and the synthetic generators used by the experiments.

All randomness goes through ``numpy.random.default_rng`` (PCG64) seeded
from the caller.
"""

from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

IDX_UBYTE = 0x08


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = ""
    seed_used: int | None = None
    preprocessing: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError(f"dataset needs at least one row, got features of shape {self.features.shape}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("dataset features contain non-finite values")
        if self.labels.size and self.labels.shape[0] != self.features.shape[0]:
            raise ValueError("labels and features disagree on the number of rows")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def p(self):
        return self.features.shape[1]

    def take(self, indices):
        idx = np.asarray(indices, dtype=int)
        labels = self.labels[idx] if self.labels.size else self.labels
        return replace(self, features=self.features[idx], labels=labels)


def _open(path):
    path = Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def read_idx(path):
    """Unsigned-byte IDX tensor as a uint8 array of its declared shape."""
    with _open(path) as f:
        raw = f.read()
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: truncated header")
    if raw[0] != 0 or raw[1] != 0:
        raise IdxFormatError(f"{path}: bad magic bytes {raw[:2]!r}")
    if raw[2] != IDX_UBYTE:
        raise IdxFormatError(f"{path}: unsupported type byte 0x{raw[2]:02x} (expected 0x08)")
    ndim = raw[3]
    header = 4 + 4 * ndim
    if ndim == 0 or len(raw) < header:
        raise IdxFormatError(f"{path}: truncated dimension header")
    shape = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(shape, dtype=np.int64))
    payload = raw[header:]
    if len(payload) < size:
        raise IdxFormatError(f"{path}: payload has {len(payload)} bytes, header declares {size}")
    return np.frombuffer(payload, dtype=np.uint8, count=size).reshape(shape)


def write_idx(path, array):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = bytes([0, 0, IDX_UBYTE, array.ndim]) + struct.pack(f">{array.ndim}I", *array.shape)
    with open(path, "wb") as f:
        f.write(header)
        f.write(array.tobytes())


def load_idx(images_path, labels_path, pixel_scale=255.0, name=None):
    """Images flattened row-major to (n, rows*cols), divided by ``pixel_scale``.

    ``pixel_scale=None`` keeps raw 0-255 values.
    """
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.shape[0] == 0:
        raise IdxFormatError(f"{images_path}: dataset is empty")
    if labels.ndim != 1:
        raise IdxFormatError(f"{labels_path}: labels must be one-dimensional")
    if labels.shape[0] != images.shape[0]:
        raise IdxFormatError(
            f"image/label count mismatch: {images.shape[0]} images, {labels.shape[0]} labels"
        )
    features = images.reshape(images.shape[0], -1).astype(float)
    if pixel_scale is not None:
        features /= pixel_scale
    return Dataset(
        features=features,
        labels=labels.astype(float),
        name=name or Path(images_path).name,
        preprocessing={"format": "idx", "pixel_scale": pixel_scale,
                       "image_shape": list(images.shape[1:])},
    )


def load_csv(path, has_label_column=False, skip_header=False, name=None):
    """Numeric CSV, one row per point; the last column is the label if flagged."""
    rows = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if skip_header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
            if len(rows[-1]) != len(rows[0]):
                raise ValueError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    table = np.array(rows)
    if has_label_column:
        if table.shape[1] < 2:
            raise ValueError(f"{path}: need at least one feature column besides the label")
        features, labels = table[:, :-1], table[:, -1]
    else:
        features, labels = table, np.empty(0)
    return Dataset(features=features, labels=labels, name=name or Path(path).name,
                   preprocessing={"format": "csv", "has_label_column": has_label_column})


def filter_binary(ds, class_a, class_b):
    """Keep rows labelled class_a or class_b, relabelled -1 and +1."""
    if class_a == class_b:
        raise ValueError("filter_binary needs two distinct classes")
    labels = ds.labels
    for c in (class_a, class_b):
        if not np.any(labels == c):
            raise ValueError(f"class {c} does not occur in {ds.name or 'dataset'}")
    keep = np.flatnonzero((labels == class_a) | (labels == class_b))
    new_labels = np.where(labels[keep] == class_a, -1.0, 1.0)
    prep = dict(ds.preprocessing, binary_classes=[class_a, class_b])
    return replace(ds, features=ds.features[keep], labels=new_labels, preprocessing=prep)


def subsample(ds, n, seed):
    """Seeded draw of n rows without replacement.

    Returns ``(sample, kept, held_out)``; both index arrays are sorted so the
    sample keeps the original row order.
    """
    if not 1 <= n <= ds.n:
        raise ValueError(f"cannot draw {n} rows from a dataset of {ds.n}")
    perm = np.random.default_rng(seed).permutation(ds.n)
    kept = np.sort(perm[:n])
    held_out = np.sort(perm[n:])
    return replace(ds.take(kept), seed_used=seed), kept, held_out


def synth_uniform(n, low, high, seed):
    if not low < high:
        raise ValueError(f"need low < high, got ({low}, {high})")
    x = np.random.default_rng(seed).uniform(low, high, size=(n, 1))
    return Dataset(features=x, labels=np.empty(0), name=f"uniform({low},{high})", seed_used=seed,
                   preprocessing={"generator": "uniform", "low": low, "high": high})


def synth_gaussian(n, p, seed):
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    x = np.random.default_rng(seed).standard_normal((n, p))
    return Dataset(features=x, labels=np.empty(0), name=f"gaussian(p={p})", seed_used=seed,
                   preprocessing={"generator": "standard-normal"})


# ----------------------------------------------------------------------------
# Bundled image fixture: two classes of 28x28 stroke drawings standing in
# for MNIST 4s and 9s when the real files are not available.

FIXTURE_IMAGES = "digits49-images.idx"
FIXTURE_LABELS = "digits49-labels.idx"


def _stroke(canvas, r0, c0, r1, c1):
    steps = int(max(abs(r1 - r0), abs(c1 - c0)) * 3) + 1
    rr = np.linspace(r0, r1, steps)
    cc = np.linspace(c0, c1, steps)
    ri = np.clip(np.round(rr).astype(int), 0, canvas.shape[0] - 1)
    ci = np.clip(np.round(cc).astype(int), 0, canvas.shape[1] - 1)
    canvas[ri, ci] = 1.0


def _arc(canvas, rc, cc, radius_r, radius_c):
    t = np.linspace(0, 2 * np.pi, 80)
    ri = np.clip(np.round(rc + radius_r * np.sin(t)).astype(int), 0, canvas.shape[0] - 1)
    ci = np.clip(np.round(cc + radius_c * np.cos(t)).astype(int), 0, canvas.shape[1] - 1)
    canvas[ri, ci] = 1.0


def _draw_digit(label, rng, size=28):
    canvas = np.zeros((size, size))
    j = lambda s: rng.normal(0.0, s)  # noqa: E731
    if label == 4:
        top, bottom, bar = 5 + j(1), 23 + j(1), 15 + j(1.2)
        left, right = 9 + j(1.2), 18 + j(1.2)
        _stroke(canvas, top, left + j(1), bar, left)
        _stroke(canvas, bar, left - 1 + j(0.5), bar + j(0.7), right + 3 + j(1))
        _stroke(canvas, top + j(1), right + j(0.8), bottom, right + j(1.5))
    else:
        rc, cc = 10 + j(1), 14 + j(1.2)
        rr, rcol = 4.5 + j(0.6), 4.5 + j(0.6)
        _arc(canvas, rc, cc, rr, rcol)
        _stroke(canvas, rc + j(0.5), cc + rcol, 23 + j(1), cc + rcol - 2 + j(1.5))
    canvas = ndimage.rotate(canvas, rng.normal(0.0, 8.0), reshape=False, order=1)
    canvas = ndimage.shift(canvas, rng.normal(0.0, 1.0, size=2), order=1)
    canvas = ndimage.grey_dilation(canvas, size=(2, 2)) if rng.random() < 0.5 else canvas
    canvas = ndimage.gaussian_filter(canvas, 0.7 + 0.3 * rng.random())
    canvas = canvas / max(canvas.max(), 1e-12) * rng.uniform(0.75, 1.0)
    canvas += rng.normal(0.0, 0.03, canvas.shape)
    return np.clip(np.round(canvas * 255), 0, 255).astype(np.uint8)


def make_digit_fixture(n=200, seed=0):
    """Deterministic (images uint8 [n, 28, 28], labels uint8 [n]) in {4, 9}."""
    rng = np.random.default_rng(seed)
    labels = np.where(rng.random(n) < 0.5, 4, 9).astype(np.uint8)
    images = np.stack([_draw_digit(int(lab), rng) for lab in labels])
    return images, labels


def fixture_paths():
    root = resources.files("kernspec") / "fixtures"
    return Path(str(root / FIXTURE_IMAGES)), Path(str(root / FIXTURE_LABELS))


def load_fixture(pixel_scale=255.0):
    """The bundled 200-image two-class fixture (labels 4 and 9)."""
    images, labels = fixture_paths()
    return load_idx(images, labels, pixel_scale=pixel_scale, name="digits49-fixture")
