"""Run an experiment and write results.csv, summary.json, manifest.json.

Wall-clock timings go to a separate timings.csv so that results.csv is
byte-identical across runs of the same config.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .. import __version__
from .config import load_dataset
from .experiments import COLUMNS, COORDINATES, CellError, even_ranks, plan

SPOT_CHECK_TOL = 1e-10
PREDICTION_COLUMNS = ("run", "target", "ridge", "row_index", "truth", "prediction")

# Metric whose trend against rank or count the summary reports.
TREND = {
    "rbf-rank-reg": ("rank", "generalization_mse"),
    "multi-kernel-compare": ("rank", "generalization_mse"),
    "resample-volatility": ("rank", "generalization_mse"),
    "top-vs-trailing": None,
    "cumulative-targets": ("count", "generalization_mae"),
    "dim-sweep": None,
    "kernel-table": None,
}
METRICS = ("reconstruction_error", "reconstruction_sse", "generalization_mse", "generalization_mae",
           "min_aligned_gap")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    Path(path).write_text(buf.getvalue())


def read_results(path):
    """results.csv back as a list of dicts with numbers parsed; blanks become None."""
    ints = {"run", "seed", "p", "rank", "count", "n_train", "n_test"}
    out = []
    with open(path, newline="") as f:
        for rec in csv.DictReader(f):
            row = {}
            for k, v in rec.items():
                if v == "":
                    row[k] = None
                elif k in ints:
                    row[k] = int(v)
                elif k in ("experiment", "kernel", "target"):
                    row[k] = v
                else:
                    row[k] = float(v)
            out.append(row)
    return out


def _std(values):
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def summarize(experiment, rows):
    """Per-cell mean and sample stddev over runs, plus trend statistics.

    A cell is one combination of COORDINATES.  Trend Spearman correlations
    are computed on the cell means, one per (kernel, ridge).
    """
    cells = {}
    for r in rows:
        cells.setdefault(tuple(r[c] for c in COORDINATES), []).append(r)
    cell_out = []
    for key, members in cells.items():
        entry = dict(zip(COORDINATES, key))
        entry["runs"] = len(members)
        for m in METRICS:
            vals = [r[m] for r in members if r[m] is not None]
            if vals:
                entry[m] = {"mean": float(np.mean(vals)), "std": _std(vals)}
        cell_out.append(entry)
    summary = {"experiment": experiment, "cells": cell_out}

    trend = TREND[experiment]
    if trend:
        axis, metric = trend
        groups = {}
        for c in cell_out:
            if metric in c:
                groups.setdefault((c["kernel"], c["ridge"]), []).append((c[axis], c[metric]["mean"]))
        summary["spearman"] = []
        for (kernel, ridge), pts in groups.items():
            xs, ys = zip(*sorted(pts))
            # Ranks are invariant under log, so the means are used directly.
            rho = float(spearmanr(xs, ys)[0]) if len(xs) > 2 else None
            summary["spearman"].append({"kernel": kernel, "ridge": ridge, "axis": axis,
                                        "metric": f"log10 {metric}", "rho": rho})
    if experiment == "rbf-rank-reg":
        summary["crossover"] = _crossover(rows)
    if experiment == "resample-volatility":
        summary["volatility"] = _volatility(cell_out)
    return summary


def _crossover(rows):
    """Fraction of runs in which E_ge at the largest ridge exceeds E_ge at the smallest, per rank."""
    ridges = sorted({r["ridge"] for r in rows})
    if len(ridges) < 2:
        return []
    lo, hi = ridges[0], ridges[-1]
    by = {}
    for r in rows:
        by.setdefault((r["kernel"], r["rank"], r["run"]), {})[r["ridge"]] = r["generalization_mse"]
    out = {}
    for (kernel, rank, _), v in by.items():
        out.setdefault((kernel, rank), []).append(v[hi] > v[lo])
    return [{"kernel": k, "rank": rank, "low_ridge": lo, "high_ridge": hi,
             "fraction_high_worse": float(np.mean(flags)), "runs": len(flags)}
            for (k, rank), flags in sorted(out.items())]


def _volatility(cells):
    """Mean per-rank stddev of E_ge over the top and bottom deciles of ranks."""
    groups = {}
    for c in cells:
        if "generalization_mse" in c:
            groups.setdefault((c["kernel"], c["ridge"]), []).append((c["rank"], c["generalization_mse"]["std"]))
    out = []
    for (kernel, ridge), pts in groups.items():
        pts.sort()
        k = max(1, len(pts) // 10)
        top = [s for _, s in pts[:k]]
        bottom = [s for _, s in pts[-k:]]
        out.append({"kernel": kernel, "ridge": ridge, "decile_size": k,
                    "top_decile_std": float(np.mean(top)), "bottom_decile_std": float(np.mean(bottom))})
    return out


def execute(cells, threads=1):
    """Compute cells in order; returns (results, wall times in ms)."""
    def timed(cell):
        t0 = time.perf_counter()
        res = cell.compute()
        return res, (time.perf_counter() - t0) * 1e3

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(timed, cells))
    else:
        out = [timed(c) for c in cells]
    return [o[0] for o in out], [o[1] for o in out]


def spot_check(cfg, cells, results):
    """Re-run one seeded random cell and compare its reconstruction errors."""
    idx = int(np.random.default_rng(cfg.seed).integers(len(cells)))
    again = cells[idx].compute()
    worst = 0.0
    for a, b in zip(results[idx].rows, again.rows):
        x, y = a["reconstruction_error"], b["reconstruction_error"]
        worst = max(worst, abs(x - y) / max(abs(x), np.finfo(float).tiny))
    ok = len(again.rows) == len(results[idx].rows) and worst <= SPOT_CHECK_TOL
    return {"cell": cells[idx].label(), "rows": len(again.rows), "max_relative_difference": worst,
            "tolerance": SPOT_CHECK_TOL, "passed": bool(ok)}


def _preprocessing(cfg):
    p = cfg.dataset.get("dims", [None])[0] if cfg.experiment == "dim-sweep" else None
    ds = load_dataset(cfg.dataset, 0, p=p) if not cfg.dataset["source"].startswith("synthetic") else None
    if ds is None:
        return {"source": cfg.dataset["source"], "generator": "numpy PCG64 default_rng"}
    return {"source": cfg.dataset["source"], "name": ds.name, "rows": ds.n, "features": ds.p,
            **ds.preprocessing}


def run(cfg):
    """Run ``cfg`` and write its result files. Returns the summary dict."""
    cells = plan(cfg)
    results, times = execute(cells, cfg.threads)
    rows = [r for res in results for r in res.rows]
    for r in rows:
        for m in ("reconstruction_error", "generalization_mse", "generalization_mae"):
            if r[m] is not None and not r[m] >= 0:
                raise CellError(f"run {r['run']}: negative or non-finite {m}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "results.csv", COLUMNS, rows)
    preds = [p for res in results for p in res.predictions]
    if preds:
        write_csv(out / "predictions.csv", PREDICTION_COLUMNS, preds)
    write_csv(out / "timings.csv", ("cell", "wall_ms"),
              [{"cell": c.label(), "wall_ms": round(t, 3)} for c, t in zip(cells, times)])

    summary = summarize(cfg.experiment, read_results(out / "results.csv"))
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")

    check = spot_check(cfg, cells, results)
    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "cells": [{"cell": c.label(), "seeds": c.seeds} for c in cells],
        "preprocessing": _preprocessing(cfg),
        "spot_check": check,
        "numpy": np.__version__,
    }
    if cfg.targets.get("ranks") == "even10":
        manifest["rank_rule"] = {"rule": "ceil(k * n / 10), k = 1..10",
                                 "ranks": even_ranks(cfg.dataset_size)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if not check["passed"]:
        raise CellError(f"spot check failed for cell {check['cell']}: "
                        f"relative difference {check['max_relative_difference']:.3g}")
    return summary
