"""Machine-readable run reports.

A report is a plain JSON object with a ``report_version``. Serialization sorts keys,
rounds nothing and omits wall-clock time in deterministic mode, so reruns of the same
configuration are byte-identical. The formal schema ships next to this module as
``report.schema.json``.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import REPORT_VERSION, RunConfig
from .data import Dataset
from .metric import Metric, check_feasibility, eigen_sym, error_rate

SCHEMA_PATH = Path(__file__).with_name("report.schema.json")
BASELINES = ("euclidean", "manhattan", "chebyshev")


def load_schema() -> dict:
    return json.loads(SCHEMA_PATH.read_text())


def new_report(command: str, cfg: RunConfig) -> dict:
    return {"report_version": REPORT_VERSION, "command": command,
            "config": cfg.to_dict(), "warnings": []}


def jsonable(v):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if np.isnan(f):
            return None
        if np.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return v


def dumps(report: dict) -> str:
    return json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n"


def write_report(path, report: dict) -> None:
    Path(path).write_text(dumps(report))


def dataset_summary(d: Dataset) -> dict:
    counts = np.bincount(d.labels, minlength=len(d.classes))
    return {"name": d.name, "N": d.N, "D": d.D,
            "class_map": {str(c): i for i, c in enumerate(d.classes)},
            "class_counts": {str(c): int(n) for c, n in zip(d.classes, counts)}}


def metric_warnings(m: Metric, points, b_max: float | None = None) -> list:
    """Clamped negative distances on ``points``, coefficients at the bound, indefinite B."""
    out = []
    if m.kind == "chebyshev":
        return out
    _, neg = m.pairwise(points)
    if neg:
        out.append({"code": "clamped_distances", "count": neg,
                    "message": f"{neg} negative pairwise distances clamped to 0"})
    if b_max is not None:
        iu = np.triu_indices(m.dimension)
        hit = [[int(i), int(j)] for i, j in zip(*iu) if abs(m.B[i, j]) >= b_max * (1 - 1e-9)]
        if hit:
            out.append({"code": "b_at_bound", "count": len(hit), "entries": hit,
                        "message": f"{len(hit)} B entries at |b| = b_max"})
    lo = float(eigen_sym(m.B).values[-1])
    if lo < -1e-9:
        out.append({"code": "indefinite_B", "min_eigenvalue": lo,
                    "message": "B has a negative eigenvalue"})
    return out


def condition_status(res, d: Dataset) -> dict:
    """Whether the fitted metric separates the classes as the model demands."""
    br = res.breakdown
    if br.lam is not None:
        feas = check_feasibility(res.metric.with_norm(None), d, 1, res.outliers)
        if br.lam <= 0:
            status = "separation condition infeasible"
        elif res.outliers:
            status = "separation condition holds on non-outlier points"
        else:
            status = "separation condition holds"
        return {"status": status, "lambda": br.lam, "certified": bool(feas.holds),
                "min_margin": feas.min_margin}
    K = res.vmap.params.K
    need = K // 2 + 1
    feas = check_feasibility(res.metric.with_norm(None), d, K, res.outliers)
    status = ("majority condition holds" if br.kappa >= need - 1e-9
              else "majority condition infeasible")
    out = {"status": status, "kappa": br.kappa, "needed": need, "certified": bool(feas.holds)}
    if K == 1:
        out["min_margin"] = feas.min_margin
    else:
        kept = feas.counts[feas.counts >= 0]
        out["min_co_class_count"] = int(kept.min()) if kept.size else None
    return out


def error_table(m: Metric, train: Dataset, test: Dataset, K: int = 1, exclude=()) -> dict:
    """Test error of ``m`` and the three baselines; ``exclude`` only affects ``m``."""
    rows = {"learned": error_rate(m, train, test, K, exclude)}
    for kind in BASELINES:
        rows[kind] = error_rate(Metric.baseline(kind, train.D), train, test, K)
    return rows


def write_cdf_csv(path, cdf) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["R", "fraction_at_or_above"])
        for r, f in cdf:
            w.writerow([repr(float(r)), repr(float(f))])


def write_history_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "n_points", "removed", "objective"])
        for h in history:
            w.writerow([h["iteration"], h["n_points"], len(h["removed"]), repr(h["objective"])])
