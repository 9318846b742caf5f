"""The named experiments, each expanded into independent sweep cells.

A cell fixes every coordinate except the ones it sweeps internally (ranks,
counts, ridges) and returns its result rows.  Cells never share mutable
state, so they can run on worker threads and be re-run for spot checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..diagnostics import alignment_profile, within_gaps
from ..kernels import cross_gram, gram
from ..krr import batch_errors
from ..linalg import sym_eig
from ..targets import TargetSpec, build_target, single
from .config import load_dataset

COLUMNS = (
    "experiment",
    "run",
    "seed",
    "kernel",
    "target",
    "p",
    "ridge",
    "rank",
    "count",
    "n_train",
    "n_test",
    "min_aligned_gap",
    "reconstruction_error",
    "reconstruction_sse",
    "generalization_mse",
    "generalization_mae",
)
COORDINATES = ("kernel", "target", "p", "ridge", "rank", "count")


class CellError(RuntimeError):
    pass


@dataclass(frozen=True)
class CellResult:
    rows: list
    predictions: list = field(default_factory=list)


@dataclass(frozen=True)
class Cell:
    key: tuple
    seeds: dict
    func: object

    def compute(self):
        try:
            return self.func()
        except (ValueError, ArithmeticError) as exc:
            raise CellError(f"cell {self.label()}: {exc}") from exc

    def label(self):
        return "/".join(str(k) for k in self.key)


STREAMS = {"data": 1, "split": 2, "weights": 3}


def derive_seed(base, run, stream, *extra):
    """Independent 32-bit seed for one named random stream of one run."""
    words = [int(base), int(run), STREAMS[stream], *map(int, extra)]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def split(n_total, n_train, seed):
    perm = np.random.default_rng(seed).permutation(n_total)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def even_ranks(n, k=10):
    """Ranks ceil(j * n / k) for j = 1..k."""
    return [math.ceil(j * n / k) for j in range(1, k + 1)]


def _ranks(cfg, n):
    ranks = cfg.targets.get("ranks")
    if ranks == "all":
        return list(range(1, n + 1))
    if ranks == "even10":
        return even_ranks(n)
    return list(ranks)


def _counts(cfg, n):
    counts = cfg.targets["counts"]
    if isinstance(counts, dict):
        counts = range(counts["start"], counts["stop"] + 1, counts["step"])
    return [c for c in counts if 1 <= c <= n]


def _aligned_gap(gaps, ranks):
    g = gaps[np.asarray(ranks, dtype=int) - 1]
    return float(np.min(g)) if g.size else None


def _row(cfg, run, seed, **kw):
    row = dict.fromkeys(COLUMNS)
    row.update(experiment=cfg.experiment, run=run, seed=seed)
    row.update(kw)
    return row


def _evaluate(cfg, run, seed, kernel, eig_train, cross, Y_train, Y_test, target_rows, extra=None,
              keep_predictions=False, test_index=None):
    """Rows for every (target column, ridge) pair.

    ``target_rows`` holds one coordinate dict per column of ``Y_train``.
    """
    cross_u = None if cross is None else cross @ eig_train.vectors
    errs = [batch_errors(eig_train, Y_train, z, cross_u, Y_test) for z in cfg.ridge_grid]
    n_test = 0 if Y_test is None else Y_test.shape[0]
    rows, preds = [], []
    for t, coords in enumerate(target_rows):
        for z, err in zip(cfg.ridge_grid, errs):
            r = _row(cfg, run, seed, kernel=kernel, ridge=z, n_train=eig_train.n, n_test=n_test,
                     **coords, **(extra or {}))
            r["reconstruction_error"] = float(err.reconstruction[t])
            r["reconstruction_sse"] = float(err.reconstruction[t]) * eig_train.n
            if err.generalization_mse is not None:
                r["generalization_mse"] = float(err.generalization_mse[t])
                r["generalization_mae"] = float(err.generalization_mae[t])
            rows.append(r)
            if keep_predictions:
                for i, idx in enumerate(test_index):
                    preds.append({"run": run, "target": coords["target"], "ridge": z, "row_index": int(idx),
                                  "truth": float(Y_test[i, t]), "prediction": float(err.predictions[i, t])})
    return CellResult(rows, preds)


# ----------------------------------------------------------------------------
# Per-experiment cell builders


def _dim_sweep(cfg):
    cells = []
    ranks = _ranks(cfg, cfg.dataset["n"])
    for run in range(cfg.repeats):
        for p in cfg.dataset["dims"]:
            seeds = {"data": derive_seed(cfg.seed, run, "data", p),
                     "split": derive_seed(cfg.seed, run, "split", p),
                     "weights": derive_seed(cfg.seed, run, "weights", p)}

            def func(run=run, p=p, seeds=seeds):
                ds = load_dataset(cfg.dataset, seeds["data"], p=p)
                train, _ = split(ds.n, cfg.train_size, seeds["split"])
                X = ds.features[train]
                spec = cfg.kernel.resolve(X)
                eig = sym_eig(gram(X, spec).gram)
                target = TargetSpec("random-weighted", tuple(ranks), seed=seeds["weights"])
                y = build_target(eig, target)
                gap = _aligned_gap(within_gaps(eig.values), ranks)
                coords = [{"target": target.label(), "p": p, "min_aligned_gap": gap}]
                return _evaluate(cfg, run, seeds["data"], spec.family, eig, None,
                                 y[:, None], None, coords)

            cells.append(Cell((run, p), seeds, func))
    return cells


def _full_basis_cell(cfg, run, spec_of, ranks_of, build, keep_predictions=False, test_on_all=False,
                     name=None):
    """Cell builder shared by the experiments whose targets live on the full-data kernel.

    ``build(eig_full, n)`` returns (list of coordinate dicts, full target matrix).
    """
    seeds = {"data": derive_seed(cfg.seed, run, "data"), "split": derive_seed(cfg.seed, run, "split")}

    def func():
        ds = load_dataset(cfg.dataset, seeds["data"])
        spec = spec_of.resolve(ds.features)
        K = gram(ds.features, spec).gram
        eig_full = sym_eig(K)
        train, test = split(ds.n, cfg.train_size, seeds["split"])
        if test_on_all:
            test = np.arange(ds.n)
        eig_train = sym_eig(K[np.ix_(train, train)])
        coords, Y = build(eig_full, ds.n)
        gaps = within_gaps(eig_full.values)
        for c, ranks in zip(coords, ranks_of(coords)):
            c["min_aligned_gap"] = _aligned_gap(gaps, ranks)
        return _evaluate(cfg, run, seeds["data"], name or spec.family, eig_train, K[np.ix_(test, train)],
                         Y[train], Y[test], coords, keep_predictions=keep_predictions, test_index=test)

    return seeds, func


def _rank_targets(ranks, scale=1.0, normalize=False):
    def build(eig, n):
        coords, cols = [], []
        for r in ranks:
            spec = single(r, scale=scale, normalize=normalize)
            coords.append({"target": spec.label(), "rank": r})
            cols.append(build_target(eig, spec))
        return coords, np.column_stack(cols)

    return build


def _by_rank(coords):
    return [[c["rank"]] for c in coords]


def _rbf_rank_reg(cfg):
    ranks = _ranks(cfg, cfg.dataset_size)
    cells = []
    for run in range(cfg.repeats):
        seeds, func = _full_basis_cell(cfg, run, cfg.kernel, _by_rank, _rank_targets(ranks), test_on_all=True)
        cells.append(Cell((run,), seeds, func))
    return cells


def _top_vs_trailing(cfg):
    specs = [TargetSpec("indexed-combination", tuple(c["indices"]), tuple(c["weights"]),
                        scale=c.get("scale", 1.0), normalize=c.get("normalize", False))
             for c in cfg.targets["combinations"]]

    def build(eig, n):
        coords = [{"target": s.label()} for s in specs]
        return coords, np.column_stack([build_target(eig, s) for s in specs])

    cells = []
    for run in range(cfg.repeats):
        seeds, func = _full_basis_cell(cfg, run, cfg.kernel, lambda coords: [s.indices for s in specs],
                                       build, keep_predictions=True)
        cells.append(Cell((run,), seeds, func))
    return cells


def _multi_kernel(cfg):
    ranks = _ranks(cfg, cfg.dataset_size)
    scale = cfg.targets.get("scale", 1.0)
    normalize = cfg.targets.get("normalize", False)
    kernels = [cfg.kernel] + ([cfg.kernel_b] if cfg.kernel_b is not None else [])
    names = [k.family for k in kernels]
    if len(set(names)) < len(names):
        names = [f"{n}-{tag}" for n, tag in zip(names, ("a", "b"))]
    cells = []
    for run in range(cfg.repeats):
        for which, spec in enumerate(kernels):
            seeds, func = _full_basis_cell(cfg, run, spec, _by_rank, _rank_targets(ranks, scale, normalize),
                                           name=names[which])
            cells.append(Cell((run, which), seeds, func))
    return cells


def _cumulative(cfg):
    basis = cfg.targets.get("basis", "full")
    cells = []
    for run in range(cfg.repeats):
        if basis == "full":
            def build(eig, n):
                counts = _counts(cfg, min(n, 200))
                coords = [{"target": f"mean{c}", "count": c} for c in counts]
                return coords, np.column_stack([build_target(eig, TargetSpec("cumulative-mean", count=c))
                                                for c in counts])

            seeds, func = _full_basis_cell(cfg, run, cfg.kernel,
                                           lambda coords: [range(1, c["count"] + 1) for c in coords], build)
        else:
            seeds, func = _train_basis_cell(cfg, run)
        cells.append(Cell((run,), seeds, func))
    return cells


def _train_basis_cell(cfg, run):
    """Cumulative targets on the train-only kernel; test truth is the Nystrom extension."""
    seeds = {"data": derive_seed(cfg.seed, run, "data"), "split": derive_seed(cfg.seed, run, "split")}

    def func():
        ds = load_dataset(cfg.dataset, seeds["data"])
        train, test = split(ds.n, cfg.train_size, seeds["split"])
        spec = cfg.kernel.resolve(ds.features[train])
        K = gram(ds.features[train], spec).gram
        eig = sym_eig(K)
        cross = cross_gram(ds.features[test], ds.features[train], spec)
        d = eig.values
        scale = np.where(eig.zero_mask, 0.0, 1.0 / np.where(eig.zero_mask, 1.0, d))
        U_test = (cross @ eig.vectors) * scale
        counts = _counts(cfg, min(eig.n, 200))
        coords = [{"target": f"mean{c}", "count": c} for c in counts]
        Y_train = np.column_stack([eig.vectors[:, :c].mean(axis=1) for c in counts])
        Y_test = np.column_stack([U_test[:, :c].mean(axis=1) for c in counts])
        gaps = within_gaps(d)
        for c in coords:
            c["min_aligned_gap"] = _aligned_gap(gaps, range(1, c["count"] + 1))
        return _evaluate(cfg, run, seeds["data"], spec.family, eig, cross, Y_train, Y_test, coords)

    return seeds, func


def _resample(cfg):
    ranks = _ranks(cfg, cfg.dataset_size)
    cells = []
    for run in range(cfg.repeats):
        seeds, func = _full_basis_cell(cfg, run, cfg.kernel, _by_rank, _rank_targets(ranks))
        cells.append(Cell((run,), seeds, func))
    return cells


def _kernel_table(cfg):
    cells = []
    for run in range(cfg.repeats):
        for name, kspec in cfg.kernels:
            seeds = {"data": derive_seed(cfg.seed, run, "data"), "split": derive_seed(cfg.seed, run, "split")}

            def func(run=run, name=name, kspec=kspec, seeds=seeds):
                ds = load_dataset(cfg.dataset, seeds["data"])
                if not ds.labels.size:
                    raise ValueError("kernel-table needs a labelled dataset")
                train, test = split(ds.n, cfg.train_size, seeds["split"])
                Xtr, Xte = ds.features[train], ds.features[test]
                spec = kspec.resolve(Xtr)
                km = gram(Xtr, spec)
                eig = sym_eig(km.gram)
                cross = cross_gram(Xte, Xtr, spec, train_fingerprint=km.source_fingerprint)
                y_train, y_test = ds.labels[train], ds.labels[test]
                support = alignment_profile(eig, y_train).support
                gap = _aligned_gap(within_gaps(eig.values), support + 1)
                coords = [{"target": "labels", "min_aligned_gap": gap}]
                return _evaluate(cfg, run, seeds["data"], name, eig, cross,
                                 y_train[:, None], y_test[:, None], coords)

            cells.append(Cell((run, name), seeds, func))
    return cells


BUILDERS = {
    "dim-sweep": _dim_sweep,
    "rbf-rank-reg": _rbf_rank_reg,
    "top-vs-trailing": _top_vs_trailing,
    "multi-kernel-compare": _multi_kernel,
    "cumulative-targets": _cumulative,
    "resample-volatility": _resample,
    "kernel-table": _kernel_table,
}


def plan(cfg):
    """All cells of the configured experiment, in output order."""
    return BUILDERS[cfg.experiment](cfg)
