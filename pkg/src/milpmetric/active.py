"""R-ratio profiles, knee detection, interior/boundary/outlier partitions and
acquisition plans, plus the outlier-removal refit loop."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, NormParams
from .metric import Metric, eigen_sym, r_ratio
from .models import FitParams, fit
from .solver import SolverParams

log = logging.getLogger(__name__)

CATEGORIES = ("interior", "boundary", "outlier")


def metric_id(m: Metric) -> str:
    d = m.to_dict()
    d.pop("provenance", None)
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class RProfile:
    """Per-point R (NaN where a point was excluded) and per-class ascending lists."""

    values: np.ndarray
    labels: np.ndarray
    by_class: dict
    metric_id: str = ""

    def class_values(self, c) -> np.ndarray:
        if c not in self.by_class:
            raise KeyError(f"unknown class {c!r}")
        return self.by_class[c]


def compute_r_profile(m: Metric, d: Dataset, exclude=(), ignore=()) -> RProfile:
    """R for every non-excluded point. Excluded points get no value and are never
    neighbor candidates; ``ignore`` points still get a value but are not candidates.
    A point left without any co-class candidate gets ``inf``; one without any non-class
    candidate gets 0."""
    exclude = set(int(i) for i in exclude)
    blocked = sorted(exclude | set(int(i) for i in ignore))
    keep = np.array([i for i in range(d.N) if i not in exclude], dtype=np.int64)
    if len(np.unique(d.labels[keep])) < 2:
        raise ValueError("R-ratios need at least two classes among the remaining points")
    dist, _ = m.pairwise(d.points)
    vals = np.full(d.N, np.nan)
    cand = np.ones(d.N, dtype=bool)
    cand[blocked] = False
    for i in keep:
        same = d.labels == d.labels[i]
        co = cand & same
        co[i] = False
        if not co.any():
            vals[i] = np.inf
        elif not (cand & ~same).any():
            vals[i] = 0.0
        else:
            vals[i] = r_ratio(m, d, int(i), blocked, dist)
    by = {int(c): np.sort(vals[keep[d.labels[keep] == c]]) for c in np.unique(d.labels[keep])}
    return RProfile(vals, d.labels.copy(), by, metric_id(m))


def class_cdf(profile: RProfile, c) -> list:
    """Exact tail CDF ``(R, fraction of the class with value >= R)`` over distinct R."""
    r = profile.class_values(c)
    if r.size == 0:
        raise ValueError(f"class {c!r} has no points")
    distinct = np.unique(r)
    frac = 1.0 - np.searchsorted(r, distinct, side="left") / r.size
    return [(float(a), float(b)) for a, b in zip(distinct, frac)]


def _clip_curve(cdf):
    R = np.array([p[0] for p in cdf])
    F = np.array([p[1] for p in cdf])
    end = min(1.0, R.max())
    inside = R <= end
    Rc, Fc = R[inside], F[inside]
    if R.max() > 1.0 and not np.any(R == 1.0):
        # the curve value at R = 1 is the fraction at or beyond 1
        Rc = np.append(Rc, 1.0)
        Fc = np.append(Fc, F[np.argmax(R > 1.0)])
    return Rc, Fc


def _chord_offsets(R, F):
    """Signed perpendicular distance of each point from the endpoint chord; positive
    means below the chord."""
    dx, dy = R[-1] - R[0], F[-1] - F[0]
    norm = np.hypot(dx, dy)
    return ((R - R[0]) * dy - (F - F[0]) * dx) / norm


def is_convex_decreasing(cdf, test: str = "chord", tol: float = 0.05) -> bool:
    """``chord``: at most ``tol`` of the interior corners lie above the endpoint chord.
    ``slopes``: at most ``tol`` of consecutive slope pairs fail to increase."""
    R, F = _clip_curve(cdf)
    if R.size < 3:
        return False
    if test == "chord":
        off = _chord_offsets(R, F)[1:-1]
        return bool(np.mean(off < -1e-12) <= tol)
    if test == "slopes":
        s = np.diff(F) / np.diff(R)
        bad = np.diff(s) < -1e-12
        return bool(np.mean(bad) <= tol)
    raise ValueError(f"unknown convexity test {test!r}")


def knee_point(cdf, test: str = "chord", tol: float = 0.05) -> float:
    """R at the largest perpendicular distance below the endpoint chord of the clipped
    curve; 0 when there is no interior corner or the curve fails the convexity test."""
    R, F = _clip_curve(cdf)
    if R.size < 3 or not is_convex_decreasing(cdf, test, tol):
        return 0.0
    off = _chord_offsets(R, F)
    k = 1 + int(np.argmax(off[1:-1]))
    if off[k] <= 0:
        return 0.0
    return float(min(R[k], 1.0))


@dataclass(frozen=True)
class Partition:
    interior: dict
    boundary: dict
    outlier: dict
    knees: dict

    def category(self, i) -> str | None:
        for name in CATEGORIES:
            for ix in getattr(self, name).values():
                if i in ix:
                    return name
        return None

    def flat(self, name) -> list:
        return sorted(int(i) for ix in getattr(self, name).values() for i in ix)

    def summary(self) -> dict:
        return {str(c): {"knee": self.knees[c], "interior": len(self.interior[c]),
                         "boundary": len(self.boundary[c]), "outlier": len(self.outlier[c])}
                for c in sorted(self.knees)}


def classify_r(R: float, knee: float) -> str:
    if R >= 1:
        return "outlier"
    if R > knee:
        return "boundary"
    return "interior"


def partition(profile: RProfile, knees: dict) -> Partition:
    cats = {name: {} for name in CATEGORIES}
    for c in profile.by_class:
        if c not in knees:
            raise ValueError(f"no knee value for class {c!r}")
        ix = np.flatnonzero((profile.labels == c) & ~np.isnan(profile.values))
        for name in CATEGORIES:
            cats[name][c] = [int(i) for i in ix if classify_r(profile.values[i], knees[c]) == name]
    return Partition(cats["interior"], cats["boundary"], cats["outlier"], dict(knees))


def knees_for(profile: RProfile, test: str = "chord") -> dict:
    return {c: knee_point(class_cdf(profile, c), test) for c in profile.by_class}


@dataclass(frozen=True)
class AcquisitionPlan:
    entries: list = field(default_factory=list)

    def to_list(self) -> list:
        return [dict(e) for e in self.entries]


def rank_acquisition(p: Partition, profile: RProfile, radius: float, d: Dataset | None = None,
                     norm: NormParams | None = None) -> AcquisitionPlan:
    """Outlier and boundary points by decreasing R (ties by index). With ``d`` given, each
    entry carries an axis-aligned box of half-width ``radius`` in original units."""
    idx = p.flat("outlier") + p.flat("boundary")
    idx.sort(key=lambda i: (-profile.values[i], i))
    entries = []
    for i in idx:
        e = {"index": int(i), "R": _num(profile.values[i]), "class": int(profile.labels[i]),
             "category": p.category(i)}
        if d is not None:
            x = d.points[i] if norm is None else norm.invert(d.points[i])
            e["center"] = [float(v) for v in x]
            e["box"] = [[float(v - radius), float(v + radius)] for v in x]
        entries.append(e)
    return AcquisitionPlan(entries)


def _num(v):
    return float(v) if np.isfinite(v) else "inf"


# -- refit loops ----------------------------------------------------------------
def remove_refit_loop(d: Dataset, fp: FitParams, sp: SolverParams | None = None,
                      max_iters: int = 3, norm: NormParams | None = None):
    """Fit, drop points with R >= 1 (fit-flagged outliers are not neighbor candidates
    while R is computed), refit on the rest; stop when nothing is dropped.

    Returns ``(metric, history, kept indices)``; indices refer to ``d``.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    active = np.arange(d.N)
    history = []
    metric = None
    for it in range(1, max_iters + 1):
        sub = d.subset(active)
        res = fit(sub, fp, sp, norm)
        metric = res.metric
        prof = compute_r_profile(metric, sub, ignore=res.outliers)
        drop_local = [int(i) for i in np.flatnonzero(prof.values >= 1)]
        drop = [int(active[i]) for i in drop_local]
        history.append({
            "iteration": it, "n_points": int(sub.N), "objective": float(res.breakdown.objective),
            "lambda": res.breakdown.lam, "kappa": res.breakdown.kappa,
            "fit_outliers": [int(active[i]) for i in res.outliers], "removed": drop,
            "solver_status": res.solution.status,
        })
        if not drop:
            history[-1]["converged"] = True
            break
        if it == max_iters:
            break
        remaining = np.setdiff1d(active, drop)
        need = 2 if fp.K == 1 else fp.K
        counts = {c: int(np.sum(d.labels[remaining] == c)) for c in np.unique(d.labels)}
        if min(counts.values()) < need:
            history[-1]["halted"] = f"removal would leave a class with fewer than {need} points"
            log.warning(history[-1]["halted"])
            break
        active = remaining
    return metric, history, active


def trace_normalized(B) -> np.ndarray:
    s = np.abs(eigen_sym(B).values).sum()
    return np.asarray(B, float) / s if s > 0 else np.asarray(B, float)


def metric_similarity(B1, B2) -> float:
    """Frobenius distance between B matrices scaled to unit sum of |eigenvalues|."""
    return float(np.linalg.norm(trace_normalized(B1) - trace_normalized(B2)))


@dataclass
class BoundaryCheck:
    metric_full: Metric
    metric_boundary: Metric | None
    similarity: float | None
    refit_indices: list
    partition: Partition
    note: str = ""


def boundary_refit_check(d: Dataset, fp: FitParams, sp: SolverParams | None = None,
                         norm: NormParams | None = None, test: str = "chord") -> BoundaryCheck:
    """Fit on everything, partition, refit on boundary and outlier points only."""
    full = fit(d, fp, sp, norm)
    prof = compute_r_profile(full.metric, d, ignore=full.outliers)
    part = partition(prof, knees_for(prof, test))
    keep = sorted(set(part.flat("boundary")) | set(part.flat("outlier")))
    need = 2 if fp.K == 1 else fp.K
    short = [c for c in part.boundary if len(part.boundary[c]) + len(part.outlier[c]) < need]
    if short:
        note = f"classes {short} have fewer than {need} boundary points; no boundary refit"
        return BoundaryCheck(full.metric, None, None, keep, part, note)
    sub = d.subset(keep)
    bres = fit(sub, fp, sp, norm)
    sim = metric_similarity(full.metric.B, bres.metric.B)
    return BoundaryCheck(full.metric, bres.metric, sim, keep, part)
