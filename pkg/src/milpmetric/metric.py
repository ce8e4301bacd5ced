"""Distance evaluation, nearest-neighbor queries, R-ratios and eigen-analysis."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, NormParams

KINDS = ("learned", "euclidean", "manhattan", "chebyshev")


@dataclass(frozen=True)
class Metric:
    """``d(x, y) = a^T |x - y| + (x - y)^T B (x - y)``, or the max-coordinate distance
    for ``kind="chebyshev"`` (which carries no coefficients)."""

    a: np.ndarray | None
    B: np.ndarray | None
    kind: str = "learned"
    norm: NormParams | None = None
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "chebyshev":
            if self.a is not None or self.B is not None:
                raise ValueError("chebyshev metrics carry no coefficients")
            return
        a = np.asarray(self.a, float).copy()
        B = np.asarray(self.B, float)
        if B.shape != (a.size, a.size):
            raise ValueError("B must be D x D with D = len(a)")
        # keep the upper triangle as the source of truth so B is exactly symmetric
        B = np.triu(B) + np.triu(B, 1).T
        a.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "B", B)

    @classmethod
    def euclidean(cls, dim, norm=None) -> "Metric":
        return cls(np.zeros(dim), np.eye(dim), "euclidean", norm)

    @classmethod
    def manhattan(cls, dim, norm=None) -> "Metric":
        return cls(np.ones(dim), np.zeros((dim, dim)), "manhattan", norm)

    @classmethod
    def chebyshev(cls, dim=None, norm=None) -> "Metric":
        return cls(None, None, "chebyshev", norm, {"dimension": dim})

    @classmethod
    def baseline(cls, kind, dim, norm=None) -> "Metric":
        return {"euclidean": cls.euclidean, "manhattan": cls.manhattan,
                "chebyshev": cls.chebyshev}[kind](dim, norm)

    @property
    def dimension(self) -> int | None:
        if self.kind == "chebyshev":
            return self.provenance.get("dimension")
        return self.a.size

    @property
    def b_upper(self) -> np.ndarray:
        return self.B[np.triu_indices(self.a.size)]

    def with_norm(self, norm) -> "Metric":
        return Metric(self.a, self.B, self.kind, norm, self.provenance)

    # -- evaluation ---------------------------------------------------------------
    def raw(self, x, y) -> np.ndarray:
        """Unclamped distance between broadcastable point arrays (last axis = features)."""
        delta = np.asarray(x, float) - np.asarray(y, float)
        if self.kind == "chebyshev":
            return np.abs(delta).max(axis=-1)
        if delta.shape[-1] != self.a.size:
            raise ValueError(f"dimension mismatch: metric has D={self.a.size}, "
                             f"points have {delta.shape[-1]}")
        return np.abs(delta) @ self.a + np.einsum("...p,pq,...q->...", delta, self.B, delta)

    def pairwise(self, X, Y=None) -> tuple[np.ndarray, int]:
        """Distance matrix between rows of X and Y plus the count of clamped negatives."""
        X = np.asarray(X, float)
        Y = X if Y is None else np.asarray(Y, float)
        self._check_dim(X.shape[-1])
        self._check_dim(Y.shape[-1])
        dist = self.raw(X[:, None, :], Y[None, :, :])
        neg = dist < 0
        return np.where(neg, 0.0, dist), int(neg.sum())

    def _check_dim(self, D):
        if self.dimension is not None and D != self.dimension:
            raise ValueError(f"dimension mismatch: metric has D={self.dimension}, points have {D}")

    # -- serialization ------------------------------------------------------------
    def to_dict(self) -> dict:
        out = {"dimension": self.dimension, "kind": self.kind}
        if self.kind != "chebyshev":
            out["a"] = [float(v) for v in self.a]
            out["B"] = [[float(v) for v in row] for row in self.B]
        out["norm_params"] = self.norm.to_dict() if self.norm is not None else None
        out["provenance"] = {k: v for k, v in self.provenance.items() if k != "dimension"}
        return out

    @classmethod
    def from_dict(cls, d) -> "Metric":
        norm = NormParams.from_dict(d["norm_params"]) if d.get("norm_params") else None
        prov = dict(d.get("provenance") or {})
        if d["kind"] == "chebyshev":
            prov["dimension"] = d.get("dimension")
            return cls(None, None, "chebyshev", norm, prov)
        a = np.array(d["a"], float)
        B = np.array(d["B"], float)
        if d.get("dimension") is not None and a.size != d["dimension"]:
            raise ValueError("metric JSON dimension disagrees with its coefficients")
        if not np.array_equal(B, B.T):
            raise ValueError("metric JSON holds a non-symmetric B")
        return cls(a, B, d["kind"], norm, prov)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Metric":
        return cls.from_dict(json.loads(Path(path).read_text()))


def distance(m: Metric, x, y) -> float:
    """Single distance; negative values are clamped to 0 (use :func:`distance_counted`
    to learn whether clamping happened)."""
    return distance_counted(m, x, y)[0]


def distance_counted(m: Metric, x, y) -> tuple[float, bool]:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("dimension mismatch between the two points")
    m._check_dim(x.size)
    v = float(m.raw(x, y))
    return (0.0, True) if v < 0 else (v, False)


# -- nearest neighbors ------------------------------------------------------------
def _order(row, idx):
    # sort by distance, then by index
    return idx[np.lexsort((idx, row[idx]))]


def knn_classify(m: Metric, train: Dataset, query, K: int, exclude=()):
    """Majority label among the K nearest non-excluded training points.

    Vote ties go to the class with the smallest summed neighbor distance, then
    the lowest class id. Returns ``(label id, neighbor indices)``.
    """
    dist, _ = m.pairwise(np.atleast_2d(query), train.points)
    return _vote(dist[0], train.labels, K, _allowed(train.N, exclude))


def _allowed(N, exclude):
    ok = np.ones(N, dtype=bool)
    ex = np.fromiter(exclude, dtype=np.int64) if not isinstance(exclude, np.ndarray) \
        else exclude.astype(np.int64)
    ok[ex] = False
    return np.flatnonzero(ok)


def _vote(row, labels, K, idx):
    if idx.size == 0:
        raise ValueError("no training points left after exclusion")
    if K < 1 or K > idx.size:
        raise ValueError(f"K={K} must lie in [1, {idx.size}]")
    nn = _order(row, idx)[:K]
    labs = labels[nn]
    classes, counts = np.unique(labs, return_counts=True)
    sums = np.array([row[nn[labs == c]].sum() for c in classes])
    best = np.lexsort((classes, sums, -counts))[0]
    return int(classes[best]), nn


def predict(m: Metric, train: Dataset, queries, K: int = 1, exclude=()) -> tuple[np.ndarray, int]:
    """Labels for many queries and the number of clamped negative distances."""
    dist, neg = m.pairwise(queries, train.points)
    idx = _allowed(train.N, exclude)
    return np.array([_vote(r, train.labels, K, idx)[0] for r in dist], dtype=np.int64), neg


def error_rate(m: Metric, train: Dataset, test: Dataset, K: int = 1, exclude=()) -> float:
    """Fraction of test points misclassified by K-NN over the (non-excluded) training set."""
    if train.D != test.D:
        raise ValueError(f"dimension mismatch: train D={train.D}, test D={test.D}")
    if tuple(train.classes) != tuple(test.classes):
        test = _remap(test, train.classes)
    pred, _ = predict(m, train, test.points, K, exclude)
    return float(np.mean(pred != test.labels))


def _remap(d: Dataset, classes) -> Dataset:
    lut = {c: i for i, c in enumerate(classes)}
    extra = [c for c in d.classes if c not in lut]
    classes = tuple(classes) + tuple(extra)
    lut.update({c: len(lut) + k for k, c in enumerate(extra)})
    return Dataset(d.points, [lut[n] for n in d.label_names()], classes, d.name, d.meta)


# -- ratio and feasibility ------------------------------------------------------
def _nearest_split(dist_row, labels, i, allowed):
    same = allowed & (labels == labels[i])
    same[i] = False
    other = allowed & (labels != labels[i])
    if not same.any():
        raise ValueError(f"point {i} has no available co-class neighbor")
    if not other.any():
        raise ValueError(f"point {i} has no available non-class neighbor")
    return dist_row[same].min(), dist_row[other].min()


def _mask(N, exclude):
    ok = np.ones(N, dtype=bool)
    ok[list(exclude)] = False
    return ok


def r_ratio(m: Metric, d: Dataset, i: int, exclude=(), dist=None) -> float:
    """Closest co-class over closest non-class distance, self excluded; ``inf`` when the
    non-class distance is 0."""
    row = dist[i] if dist is not None else m.pairwise(d.points[i:i + 1], d.points)[0][0]
    co, non = _nearest_split(row, d.labels, i, _mask(d.N, exclude))
    if non <= 0:
        return np.inf
    return float(co / non)


def r_ratios(m: Metric, d: Dataset, exclude=()) -> np.ndarray:
    """R for every non-excluded point (NaN at excluded positions)."""
    dist, _ = m.pairwise(d.points)
    ok = _mask(d.N, exclude)
    out = np.full(d.N, np.nan)
    for i in np.flatnonzero(ok):
        out[i] = r_ratio(m, d, i, exclude, dist)
    return out


@dataclass(frozen=True)
class Feasibility:
    holds: bool
    margins: np.ndarray | None = None  # K = 1: nearest non-class minus nearest co-class
    counts: np.ndarray | None = None  # K > 1: co-class count among the K nearest
    needed: int = 1

    @property
    def min_margin(self) -> float:
        vals = self.margins[~np.isnan(self.margins)]
        return float(vals.min()) if vals.size else np.inf


def check_feasibility(m: Metric, d: Dataset, K: int = 1, outliers=()) -> Feasibility:
    """Nearest-neighbor condition on the training set. Outliers are skipped and never
    serve as neighbors. Entries for outliers are NaN (margins) or -1 (counts)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    dist, _ = m.pairwise(d.points)
    ok = _mask(d.N, outliers)
    if K == 1:
        margins = np.full(d.N, np.nan)
        for i in np.flatnonzero(ok):
            co, non = _nearest_split(dist[i], d.labels, i, ok)
            margins[i] = non - co
        vals = margins[ok]
        return Feasibility(bool(np.all(vals > 0)), margins=margins)
    need = K // 2 + 1
    counts = np.full(d.N, -1, dtype=np.int64)
    for i in np.flatnonzero(ok):
        cand = ok.copy()
        cand[i] = False
        idx = np.flatnonzero(cand)
        if idx.size < K:
            raise ValueError(f"fewer than K={K} neighbor candidates for point {i}")
        nn = _order(dist[i], idx)[:K]
        counts[i] = int(np.sum(d.labels[nn] == d.labels[i]))
    return Feasibility(bool(np.all(counts[ok] >= need)), counts=counts, needed=need)


# -- eigen-analysis ---------------------------------------------------------------
@dataclass(frozen=True)
class EigenDecomp:
    values: np.ndarray  # descending
    vectors: np.ndarray  # columns are eigenvectors

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def eigen_sym(B, max_sweeps: int = 100) -> EigenDecomp:
    """Cyclic Jacobi rotations until every off-diagonal is below 1e-12 * ||B||_F."""
    A = np.array(B, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("eigen_sym needs a symmetric matrix")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    tol = 1e-12 * np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.abs(A - np.diag(np.diag(A)))
        if off.max(initial=0.0) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= tol:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(1.0, theta)) if theta != 0 else 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                # A <- J^T A J with the rotation in the (p, q) plane
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    vals = np.diag(A).copy()
    order = np.argsort(-vals, kind="stable")
    V = V[:, order]
    # sign convention: the largest-magnitude component of each vector is positive
    lead = V[np.argmax(np.abs(V), axis=0), np.arange(n)]
    V = V * np.where(lead < 0, -1.0, 1.0)
    return EigenDecomp(vals[order], V)


def coordinate_significance(B) -> np.ndarray:
    """``W_j = sum_i lambda_i |v_ij|`` over the eigenpairs of B."""
    e = eigen_sym(B)
    return np.abs(e.vectors) @ e.values


def is_indefinite(B, tol: float = 1e-9) -> bool:
    return bool(eigen_sym(B).values.min() < -tol * max(1.0, np.abs(B).max()))


def transform_coords(m: Metric, points) -> np.ndarray:
    """Point coordinates in the eigenbasis of B, each axis scaled by sqrt(max(lambda, 0))."""
    if m.kind == "chebyshev":
        raise ValueError("chebyshev metrics have no quadratic form to transform with")
    e = eigen_sym(m.B)
    pts = np.asarray(points, float)
    m._check_dim(pts.shape[-1])
    return (pts @ e.vectors) * np.sqrt(np.maximum(e.values, 0.0))
