"""Experiment configuration: loading, defaults and validation.

Configs are YAML or JSON mappings.  Nested keys are reported as flat dotted
paths (``dataset.source``, ``kernel.family``) in every message.

Top-level keys
--------------
experiment     one of EXPERIMENTS
seed           base seed (int)
repeats        number of seeded repetitions
train_size     training rows per repetition
ridge_grid     list of ridge values z > 0
output_dir     where result files go
full_scale     use the full-size defaults instead of desk-sized ones
dataset.*      source and its parameters (see DATASET_SOURCES)
kernel.*       family, scale, bandwidth, diag_value
kernel_b.*     second kernel (multi-kernel-compare)
kernels        list of {name, family, ...} (kernel-table)
targets.*      experiment-specific target settings
bound.*        reference, population_size, test_rows, align_tol, permutation
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .. import data
from ..kernels import KernelSpec
from ..targets import TargetSpec

EXPERIMENTS = (
    "dim-sweep",
    "rbf-rank-reg",
    "top-vs-trailing",
    "multi-kernel-compare",
    "cumulative-targets",
    "resample-volatility",
    "kernel-table",
)
DATASET_SOURCES = ("synthetic-gaussian", "synthetic-uniform", "fixture", "idx", "csv")
REFERENCE_STRATEGIES = ("disjoint-sample", "population-subsample", "training")
OUTPUT_ENV = "KERNSPEC_OUTPUT_DIR"
TOP_KEYS = {"experiment", "seed", "repeats", "train_size", "ridge_grid", "output_dir",
            "full_scale", "threads", "dataset", "kernel", "kernel_b", "kernels",
            "targets", "bound"}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _image_dataset():
    return {"source": "fixture", "classes": [4, 9], "pixel_scale": 255.0}


def _table_kernels():
    return [
        {"name": "K1", "family": "linear"},
        {"name": "K2", "family": "scaled-linear", "scale": "sqrt-dim"},
        {"name": "K3", "family": "scaled-square", "scale": "sqrt-dim"},
        {"name": "K4", "family": "trivial-diagonal", "diag_value": 500.0},
    ]


def defaults(experiment, full_scale=False):
    """Resolved default settings for one experiment."""
    common = {"seed": 0, "repeats": 1, "threads": 1, "full_scale": full_scale,
              "bound": {"reference": "disjoint-sample", "test_rows": 50, "align_tol": 1e-10, "permutation": "identity"}}
    if experiment == "dim-sweep":
        n = 1000 if full_scale else 400
        dims = [10, 100, 200, 300, 500, 600, 800, 900] if full_scale else [10, 50, 100, 150, 200, 300, 400]
        ranks = [1, 2, 100, 400, 500] if full_scale else [1, 2, 40, 120, 150]
        return {**common,
                "dataset": {"source": "synthetic-gaussian", "n": n, "dims": dims},
                "kernel": {"family": "scaled-linear", "scale": "dim"},
                "targets": {"kind": "random-weighted", "ranks": ranks},
                "ridge_grid": [1e-8, 1e-6, 1e-4, 1e-2, 1.0, 10.0, 100.0],
                "train_size": n}
    if experiment == "rbf-rank-reg":
        return {**common, "repeats": 20,
                "dataset": {"source": "synthetic-uniform", "n": 1000, "low": -3.0, "high": 3.0},
                "kernel": {"family": "rbf", "bandwidth": "median-heuristic"},
                "targets": {"ranks": [1, 5, 10, 20, 40, 60, 80, 95]},
                "ridge_grid": [1e-8, 1e-5, 1e-2],
                "train_size": 100}
    image = _image_dataset()
    if full_scale:
        image = {**image, "size": 1000}
    if experiment == "top-vs-trailing":
        return {**common, "dataset": image,
                "kernel": {"family": "scaled-square", "scale": "sqrt-dim"},
                "targets": {"combinations": [
                    {"indices": [3, 5], "weights": [1.0, -1.0]},
                    {"indices": [100, 101], "weights": [1.0, 1.0]}]},
                "ridge_grid": [1e-8, 1e-2],
                "train_size": 0.7}
    if experiment == "multi-kernel-compare":
        return {**common, "dataset": image,
                "kernel": {"family": "scaled-square", "scale": "sqrt-dim"},
                "kernel_b": {"family": "rbf", "bandwidth": "median-heuristic"},
                "targets": {"ranks": "even10", "scale": 10.0, "normalize": True},
                "ridge_grid": [1e-8, 1e-2],
                "train_size": 0.7}
    if experiment == "cumulative-targets":
        return {**common, "repeats": 10, "dataset": image,
                "kernel": {"family": "scaled-square", "scale": "sqrt-dim"},
                "targets": {"counts": {"start": 1, "stop": 200, "step": 10}, "basis": "full"},
                "ridge_grid": [1e-8, 1e-2],
                "train_size": 0.7}
    if experiment == "resample-volatility":
        return {**common, "repeats": 100 if full_scale else 30, "dataset": image,
                "kernel": {"family": "scaled-square", "scale": "sqrt-dim"},
                "targets": {"ranks": "all"},
                "ridge_grid": [1e-8],
                "train_size": 0.7}
    if experiment == "kernel-table":
        return {**common, "dataset": image,
                "kernels": _table_kernels(),
                "targets": {"kind": "labels"},
                "ridge_grid": [0.1],
                "train_size": 0.5}
    raise ConfigError([f"experiment: unknown experiment {experiment!r}; expected one of {list(EXPERIMENTS)}"])


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def read_config_file(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from None
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError([f"config: parse failure in {path}: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError([f"config: {path} must contain a mapping at the top level"])
    return raw


@dataclass
class ExperimentConfig:
    experiment: str
    dataset: dict
    kernel: KernelSpec | None
    kernel_b: KernelSpec | None
    kernels: list
    targets: dict
    ridge_grid: list
    train_size: int
    repeats: int
    seed: int
    output_dir: Path
    full_scale: bool = False
    threads: int = 1
    bound: dict = field(default_factory=dict)
    dataset_size: int = 0

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "repeats": self.repeats,
            "train_size": self.train_size,
            "ridge_grid": list(self.ridge_grid),
            "full_scale": self.full_scale,
            "threads": self.threads,
            "output_dir": str(self.output_dir),
            "dataset": self.dataset,
            "dataset_size": self.dataset_size,
            "kernel": self.kernel.to_dict() if self.kernel else None,
            "kernel_b": self.kernel_b.to_dict() if self.kernel_b else None,
            "kernels": [{"name": name, **spec.to_dict()} for name, spec in self.kernels],
            "targets": self.targets,
            "bound": self.bound,
        }


def _kernel(d, key, errors):
    if not isinstance(d, dict):
        errors.append(f"{key}: must be a mapping")
        return None
    d = dict(d)
    d.pop("name", None)
    try:
        return KernelSpec.from_dict(d)
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        field_name = next((f for f in ("family", "scale", "bandwidth", "diag_value") if f in msg), None)
        errors.append(f"{key}.{field_name}: {msg}" if field_name else f"{key}: {msg}")
        return None


def dataset_size(ds_cfg, errors):
    """Number of rows the dataset section yields, or None if unknown."""
    source = ds_cfg.get("source")
    if source not in DATASET_SOURCES:
        errors.append(f"dataset.source: unknown source {source!r}; expected one of {list(DATASET_SOURCES)}")
        return None
    if source.startswith("synthetic"):
        n = ds_cfg.get("n")
        if not isinstance(n, int) or n < 1:
            errors.append(f"dataset.n: must be a positive integer, got {n!r}")
            return None
        if source == "synthetic-uniform" and not ds_cfg.get("low", -3.0) < ds_cfg.get("high", 3.0):
            errors.append("dataset.low: must be below dataset.high")
        return n
    for key in {"idx": ("images", "labels"), "csv": ("path",)}.get(source, ()):
        p = ds_cfg.get(key)
        if not p or not Path(p).exists():
            errors.append(f"dataset.{key}: file not found: {p!r}")
            return None
    try:
        ds = load_dataset(ds_cfg, seed=0)
    except ValueError as exc:
        errors.append(f"dataset: {exc}")
        return None
    return ds.n


def load_dataset(ds_cfg, seed, p=None):
    """Materialize the dataset section. ``p`` selects the dimension for sweeps."""
    source = ds_cfg["source"]
    if source == "synthetic-gaussian":
        return data.synth_gaussian(ds_cfg["n"], p if p is not None else ds_cfg.get("p", 10), seed)
    if source == "synthetic-uniform":
        return data.synth_uniform(ds_cfg["n"], ds_cfg.get("low", -3.0), ds_cfg.get("high", 3.0), seed)
    scale = ds_cfg.get("pixel_scale", 255.0)
    if source == "fixture":
        ds = data.load_fixture(pixel_scale=scale)
    elif source == "idx":
        ds = data.load_idx(ds_cfg["images"], ds_cfg["labels"], pixel_scale=scale)
    else:
        ds = data.load_csv(ds_cfg["path"], has_label_column=ds_cfg.get("has_label_column", True),
                           skip_header=ds_cfg.get("skip_header", False))
    classes = ds_cfg.get("classes")
    if classes and ds.labels.size:
        ds = data.filter_binary(ds, classes[0], classes[1])
    size = ds_cfg.get("size")
    if size and size < ds.n:
        ds, _, _ = data.subsample(ds, size, ds_cfg.get("size_seed", 0))
    return ds


def _positive_int(value, key, errors, allow_zero=False):
    ok = isinstance(value, int) and not isinstance(value, bool) and (value >= 0 if allow_zero else value >= 1)
    if not ok:
        errors.append(f"{key}: must be a {'nonnegative' if allow_zero else 'positive'} integer, got {value!r}")
    return ok


def _check_targets(exp, t, n_total, n_train, errors):
    def ranks_ok(ranks, key):
        if ranks in ("all", "even10"):
            return
        if not isinstance(ranks, list) or not ranks or not all(isinstance(r, int) and r >= 1 for r in ranks):
            errors.append(f"{key}: must be a non-empty list of 1-based ranks, 'all' or 'even10'")
        elif n_total and max(ranks) > n_total:
            errors.append(f"{key}: rank {max(ranks)} exceeds the number of eigenvectors ({n_total})")

    if exp in ("dim-sweep", "rbf-rank-reg", "multi-kernel-compare", "resample-volatility"):
        ranks_ok(t.get("ranks"), "targets.ranks")
    elif exp == "top-vs-trailing":
        combos = t.get("combinations")
        if not isinstance(combos, list) or not combos:
            errors.append("targets.combinations: must be a non-empty list of {indices, weights}")
        else:
            for i, c in enumerate(combos):
                try:
                    spec = TargetSpec("indexed-combination", tuple(c.get("indices", ())), tuple(c.get("weights", ())))
                    if n_total:
                        spec.check(n_total)
                except (ValueError, TypeError, AttributeError) as exc:
                    errors.append(f"targets.combinations[{i}]: {exc}")
    elif exp == "cumulative-targets":
        counts = t.get("counts")
        if isinstance(counts, dict):
            if not all(isinstance(counts.get(k), int) for k in ("start", "stop", "step")) or counts["step"] < 1:
                errors.append("targets.counts: needs integer start, stop and a positive step")
        elif not isinstance(counts, list) or not counts:
            errors.append("targets.counts: must be a list or {start, stop, step}")
        if t.get("basis", "full") not in ("full", "train-only"):
            errors.append(f"targets.basis: must be 'full' or 'train-only', got {t.get('basis')!r}")


def build_config(raw, full_scale=None, output_dir=None, threads=None):
    """Merge ``raw`` over the experiment defaults and validate everything.

    Raises ConfigError listing every problem found.
    """
    errors = []
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError([f"experiment: unknown experiment {exp!r}; expected one of {list(EXPERIMENTS)}"])
    for k in raw:
        if k not in TOP_KEYS:
            errors.append(f"{k}: unknown key")
    fs = bool(raw.get("full_scale", False) if full_scale is None else full_scale)
    merged = _merge(defaults(exp, fs), raw)
    if raw.get("dataset", {}).get("source") not in (None, defaults(exp, fs)["dataset"]["source"]):
        # A different source replaces the default section instead of merging into it.
        merged["dataset"] = copy.deepcopy(raw["dataset"])
    merged["full_scale"] = fs
    if threads is not None:
        merged["threads"] = threads

    ridge = merged.get("ridge_grid")
    if not isinstance(ridge, list) or not ridge:
        errors.append("ridge_grid: must be a non-empty list of positive numbers")
    elif not all(isinstance(z, (int, float)) and not isinstance(z, bool) and z > 0 and math.isfinite(z) for z in ridge):
        errors.append(f"ridge_grid: every entry must be a positive number, got {ridge}")
    _positive_int(merged.get("repeats"), "repeats", errors)
    _positive_int(merged.get("seed"), "seed", errors, allow_zero=True)
    _positive_int(merged.get("threads"), "threads", errors)

    ds_cfg = merged.get("dataset")
    n_total = None
    if not isinstance(ds_cfg, dict):
        errors.append("dataset: must be a mapping")
    else:
        if exp == "dim-sweep":
            dims = ds_cfg.get("dims")
            if not isinstance(dims, list) or not dims or not all(isinstance(p, int) and p >= 1 for p in dims):
                errors.append("dataset.dims: must be a non-empty list of positive integers")
        n_total = dataset_size(ds_cfg, errors)

    kernel = kernel_b = None
    kernels = []
    if exp == "kernel-table":
        ks = merged.get("kernels")
        if not isinstance(ks, list) or not ks:
            errors.append("kernels: must be a non-empty list")
        else:
            for i, kd in enumerate(ks):
                spec = _kernel(kd, f"kernels[{i}]", errors)
                if spec is not None:
                    kernels.append((kd.get("name", f"K{i + 1}"), spec))
    else:
        kernel = _kernel(merged.get("kernel"), "kernel", errors)
        if merged.get("kernel_b") is not None:
            kernel_b = _kernel(merged["kernel_b"], "kernel_b", errors)

    train = merged.get("train_size")
    n_train = None
    if isinstance(train, float) and 0 < train < 1 and n_total:
        n_train = int(round(train * n_total))
    elif isinstance(train, int) and not isinstance(train, bool) and train >= 1:
        n_train = train
    else:
        errors.append(f"train_size: must be a positive integer or a fraction in (0, 1), got {train!r}")
    if n_train is not None and n_total is not None and n_train > n_total:
        errors.append(f"train_size: {n_train} exceeds dataset size {n_total}")
    needs_test = exp not in ("dim-sweep",)
    if n_train is not None and n_total is not None and needs_test and exp != "rbf-rank-reg" and n_train >= n_total:
        errors.append(f"train_size: {n_train} leaves no test rows out of {n_total}")

    targets = merged.get("targets")
    if not isinstance(targets, dict):
        errors.append("targets: must be a mapping")
    else:
        _check_targets(exp, targets, n_total, n_train, errors)

    bound = merged.get("bound", {})
    if bound.get("reference") not in REFERENCE_STRATEGIES:
        errors.append(f"bound.reference: must be one of {list(REFERENCE_STRATEGIES)}, got {bound.get('reference')!r}")
    if bound.get("permutation") not in ("identity", "greedy-eig-match"):
        errors.append("bound.permutation: must be 'identity' or 'greedy-eig-match'")

    if output_dir is None:
        output_dir = merged.get("output_dir") or os.environ.get(OUTPUT_ENV) or f"results/{exp}"
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        experiment=exp,
        dataset=ds_cfg,
        kernel=kernel,
        kernel_b=kernel_b,
        kernels=kernels,
        targets=targets,
        ridge_grid=[float(z) for z in ridge],
        train_size=n_train,
        repeats=merged["repeats"],
        seed=merged["seed"],
        output_dir=Path(output_dir),
        full_scale=fs,
        threads=merged["threads"],
        bound=bound,
        dataset_size=n_total,
    )


def load_config(path, **overrides):
    return build_config(read_config_file(path), **overrides)


def validate(path, **overrides):
    """Validate a config file without running it.

    Returns ``(ok, lines)``: "valid" followed by every resolved setting as
    ``key = value``, or one line per error.
    """
    try:
        cfg = load_config(path, **overrides)
    except ConfigError as exc:
        return False, [f"error: {e}" for e in exc.errors]
    lines = ["valid"]
    for k, v in sorted(flatten(cfg.to_dict()).items()):
        lines.append(f"{k} = {json.dumps(v)}")
    return True, lines
