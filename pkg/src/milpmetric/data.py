"""Datasets: loading, normalization, synthetic scenarios and pairwise-difference caches."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SYNTH_KINDS = ("two-lines", "gaussian-blobs", "nonconvex-rings", "stripes-6d",
               "outlier-injected", "two-ellipses")


@dataclass(frozen=True)
class Dataset:
    """Labeled points. ``labels`` holds dense integer ids into ``classes``."""

    points: np.ndarray
    labels: np.ndarray
    classes: tuple
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise ValueError("points must be an (N, D) array with D >= 1")
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.shape != (pts.shape[0],):
            raise ValueError("every point needs exactly one label")
        if lab.size and (lab.min() < 0 or lab.max() >= len(self.classes)):
            raise ValueError("label ids must index into classes")
        pts.setflags(write=False)
        lab.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    @classmethod
    def from_labels(cls, points, labels, name="", meta=None) -> "Dataset":
        """Build from arbitrary label values; ids follow the sorted label strings."""
        raw = [_label_str(v) for v in labels]
        classes = tuple(sorted(set(raw), key=_natural_key))
        ids = {c: i for i, c in enumerate(classes)}
        return cls(np.asarray(points, float), np.array([ids[r] for r in raw], dtype=np.int64),
                   classes, name, dict(meta or {}))

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def D(self) -> int:
        return self.points.shape[1]

    @property
    def class_index(self) -> dict:
        return {c: np.flatnonzero(self.labels == c) for c in np.unique(self.labels)}

    @property
    def n_classes(self) -> int:
        return len(np.unique(self.labels))

    def label_names(self):
        return [self.classes[i] for i in self.labels]

    def subset(self, idx, name=None) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.points[idx], self.labels[idx], self.classes,
                       self.name if name is None else name,
                       {**self.meta, "parent_index": idx.tolist()})

    def with_points(self, points) -> "Dataset":
        return Dataset(np.asarray(points, float), self.labels, self.classes, self.name, self.meta)

    def summary(self) -> dict:
        counts = {self.classes[c]: int(len(ix)) for c, ix in self.class_index.items()}
        return {"name": self.name, "N": self.N, "D": self.D, "class_counts": counts}


def _label_str(v) -> str:
    s = str(v).strip()
    try:
        f = float(s)
    except ValueError:
        return s
    if np.isfinite(f) and f == int(f):
        return str(int(f))
    return s


def _natural_key(s):
    try:
        return (0, float(s), s)
    except ValueError:
        return (1, 0.0, s)


# -- loading --------------------------------------------------------------------
def load_csv(path, label_column=-1, name=None) -> Dataset:
    """Read a headed CSV; ``label_column`` is a header name or a column index."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        dup = sorted({h for h in header if header.count(h) > 1})
        raise ValueError(f"{path}: duplicate header names {dup}")
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r}")
        li = header.index(label_column)
    else:
        li = int(label_column)
        if not -len(header) <= li < len(header):
            raise ValueError(f"{path}: label column index {li} out of range")
        li %= len(header)
    feats = [j for j in range(len(header)) if j != li]
    pts, labels = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        vals = []
        for j in feats:
            try:
                vals.append(float(row[j]))
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric cell {row[j]!r} at row {r}, column {header[j]!r}"
                ) from None
        pts.append(vals)
        labels.append(row[li])
    if not pts:
        raise ValueError(f"{path}: no records")
    d = Dataset.from_labels(np.array(pts), labels, name or path.stem,
                            {"feature_names": [header[j] for j in feats],
                             "label_name": header[li]})
    _warn_degenerate(d)
    return d


def load_libsvm(path, name=None) -> Dataset:
    """Read ``label idx:val ...`` lines (1-based ascending indices) into a dense dataset."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    labels, recs, dmax = [], [], 0
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        feats = {}
        last = 0
        for tok in parts[1:]:
            try:
                k, v = tok.split(":")
                k, v = int(k), float(v)
            except ValueError:
                raise ValueError(f"{path}: malformed entry {tok!r} on line {lineno}") from None
            if k <= last:
                raise ValueError(f"{path}: indices not ascending on line {lineno}")
            feats[k] = v
            last = k
        labels.append(parts[0])
        recs.append(feats)
        dmax = max(dmax, last)
    if not recs:
        raise ValueError(f"{path}: no records")
    pts = np.zeros((len(recs), max(dmax, 1)))
    for i, feats in enumerate(recs):
        for k, v in feats.items():
            pts[i, k - 1] = v
    d = Dataset.from_labels(pts, labels, name or path.stem)
    _warn_degenerate(d)
    return d


def _warn_degenerate(d: Dataset) -> None:
    if d.n_classes < 2:
        warnings.warn(f"dataset {d.name!r} has fewer than 2 distinct labels", stacklevel=3)
    cross = duplicate_pairs(d, cross_class_only=True)
    if cross:
        warnings.warn(f"dataset {d.name!r} has {len(cross)} co-located point pairs with "
                      "different labels; the nearest-neighbor condition cannot hold for them",
                      stacklevel=3)


def duplicate_pairs(d: Dataset, cross_class_only=False) -> list:
    """Index pairs (i < j) of identical points."""
    _, inv, counts = np.unique(d.points, axis=0, return_inverse=True, return_counts=True)
    inv = np.asarray(inv).ravel()
    out = []
    for g in np.flatnonzero(counts > 1):
        members = np.flatnonzero(inv == g)
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                i, j = int(members[a]), int(members[b])
                if not cross_class_only or d.labels[i] != d.labels[j]:
                    out.append((i, j))
    return out


def write_csv(d: Dataset, path, label_name="label", feature_names=None) -> None:
    names = feature_names or d.meta.get("feature_names") or [f"f{p + 1}" for p in range(d.D)]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(list(names) + [label_name])
        for x, lab in zip(d.points, d.label_names()):
            w.writerow([repr(float(v)) for v in x] + [lab])


# -- normalization --------------------------------------------------------------
@dataclass(frozen=True)
class NormParams:
    """Per-dimension minimum and range of the original feature units."""

    minimum: np.ndarray
    range: np.ndarray

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, float)
        safe = np.where(self.range > 0, self.range, 1.0)
        return np.where(self.range > 0, (pts - self.minimum) / safe, 0.0)

    def invert(self, points) -> np.ndarray:
        return np.asarray(points, float) * self.range + self.minimum

    def to_dict(self) -> dict:
        return {"min": [float(v) for v in self.minimum], "range": [float(v) for v in self.range]}

    @classmethod
    def from_dict(cls, d) -> "NormParams":
        return cls(np.array(d["min"], float), np.array(d["range"], float))

    @classmethod
    def identity(cls, dim) -> "NormParams":
        return cls(np.zeros(dim), np.ones(dim))


def normalize(d: Dataset):
    """Min-max scale every feature to [0, 1]; constant features map to 0."""
    if d.N < 1:
        raise ValueError("cannot normalize an empty dataset")
    lo = d.points.min(axis=0)
    rng = d.points.max(axis=0) - lo
    params = NormParams(lo, rng)
    return d.with_points(params.apply(d.points)), params


def denormalize(d: Dataset, params: NormParams) -> Dataset:
    return d.with_points(params.invert(d.points))


def is_normalized(d: Dataset, tol=1e-9) -> bool:
    return bool(d.points.min() >= -tol and d.points.max() <= 1 + tol)


# -- pairwise differences -------------------------------------------------------
def upper_pairs(D: int):
    """Index pairs (p, q), p <= q, in row-major order; the layout of ``b`` variables."""
    return [(p, q) for p in range(D) for q in range(p, D)]


def quad_features(delta) -> np.ndarray:
    """Features whose dot product with upper-triangular B gives ``delta^T B delta``."""
    delta = np.asarray(delta, float)
    D = delta.shape[-1]
    iu, ju = np.triu_indices(D)
    f = delta[..., iu] * delta[..., ju]
    f[..., iu != ju] *= 2.0
    return f


@dataclass(frozen=True)
class DeltaCache:
    """Per ordered pair: ``|x_i - x_j|``, quadratic features and the Euclidean norm."""

    abs_delta: np.ndarray  # (N, N, D)
    quad: np.ndarray  # (N, N, D(D+1)/2)
    euclid: np.ndarray  # (N, N)

    @property
    def N(self) -> int:
        return self.euclid.shape[0]

    def coeffs(self, i, j) -> np.ndarray:
        """Coefficients of d_ij over the stacked (a, upper-tri B) vector."""
        return np.concatenate([self.abs_delta[i, j], self.quad[i, j]])

    def distances(self, a, b_upper) -> np.ndarray:
        return self.abs_delta @ np.asarray(a, float) + self.quad @ np.asarray(b_upper, float)


def build_delta_cache(d: Dataset) -> DeltaCache:
    diff = d.points[:, None, :] - d.points[None, :, :]
    return DeltaCache(np.abs(diff), quad_features(diff), np.sqrt((diff ** 2).sum(-1)))


# -- synthetic scenarios ----------------------------------------------------------
@dataclass(frozen=True)
class SynthSpec:
    """Parameters for :func:`synth_generate`. ``noise`` of None picks the kind's default."""

    kind: str
    per_class: int = 20
    noise: float | None = None
    seed: int = 0
    n_classes: int = 2
    flips: int = 0
    gap: float = 0.025

    def __post_init__(self):
        if self.per_class < 1:
            raise ValueError("per_class must be >= 1")
        if self.kind not in SYNTH_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; choose from {SYNTH_KINDS}")


def synth_generate(spec: SynthSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    gen = {
        "two-lines": _two_lines,
        "gaussian-blobs": _blobs,
        "outlier-injected": _blobs,
        "nonconvex-rings": _rings,
        "stripes-6d": _stripes,
        "two-ellipses": _ellipses,
    }[spec.kind]
    pts, lab, meta = gen(spec, rng)
    if spec.kind == "outlier-injected" or spec.flips:
        lab, flipped = _flip(pts, lab, spec.flips if spec.kind != "outlier-injected"
                             else max(spec.flips, 1), rng)
        meta["flipped"] = flipped
    meta["spec"] = {k: getattr(spec, k) for k in spec.__dataclass_fields__}
    return Dataset(pts, lab, tuple(str(c) for c in range(int(lab.max()) + 1)),
                   f"{spec.kind}-s{spec.seed}", meta)


def _two_lines(spec, rng):
    # two horizontal rows of thickness `noise`, `gap` apart, spanning [0, 1] horizontally;
    # row offsets are cubed stratified quantiles, so points crowd toward the gap and
    # vertical co-class spacing near the gap is far below the horizontal spacing
    n, h = spec.per_class, 0.3 if spec.noise is None else spec.noise
    pts, lab = [], []
    for c in (0, 1):
        x = rng.uniform(0.0, 1.0, n)
        t = ((np.arange(n) + rng.uniform(0.2, 0.8, n)) / n) ** 3
        v = h * rng.permutation(t)
        y = -v if c == 0 else spec.gap + v
        pts.append(np.column_stack([x, y]))
        lab.append(np.full(n, c))
    return np.vstack(pts), np.concatenate(lab), {"gap": spec.gap, "thickness": h}


def _centers(k, dim, radius=1.0):
    ang = 2 * np.pi * np.arange(k) / k
    c = np.zeros((k, dim))
    c[:, 0] = radius * np.cos(ang)
    if dim > 1:
        c[:, 1] = radius * np.sin(ang)
    return c


def _blobs(spec, rng):
    s = 0.15 if spec.noise is None else spec.noise
    cen = _centers(spec.n_classes, 2)
    pts = np.vstack([c + s * rng.standard_normal((spec.per_class, 2)) for c in cen])
    lab = np.repeat(np.arange(spec.n_classes), spec.per_class)
    return pts, lab, {"centers": cen.tolist()}


def _rings(spec, rng):
    # class 0: inner disk plus outer ring (non-convex, two islands); class 1: middle ring
    s = 0.05 if spec.noise is None else spec.noise
    n = spec.per_class
    n_in = n // 2
    pts0 = []
    r = np.concatenate([rng.uniform(0, 0.4, n_in), 1.6 + s * rng.standard_normal(n - n_in)])
    t = rng.uniform(0, 2 * np.pi, n)
    pts0 = np.column_stack([r * np.cos(t), r * np.sin(t)])
    r1 = 1.0 + s * rng.standard_normal(n)
    t1 = rng.uniform(0, 2 * np.pi, n)
    pts1 = np.column_stack([r1 * np.cos(t1), r1 * np.sin(t1)])
    return np.vstack([pts0, pts1]), np.repeat([0, 1], n), {}


def _stripes(spec, rng):
    # informative dims 0-2 sit near class-specific levels; dims 3-5 are uniform clutter
    k = max(spec.n_classes, 3) if spec.n_classes == 2 else spec.n_classes
    s = 0.03 if spec.noise is None else spec.noise
    levels = rng.permutation(np.linspace(0.1, 0.9, k))
    pts, lab = [], []
    for c in range(k):
        inf = np.empty((spec.per_class, 3))
        for p in range(3):
            inf[:, p] = levels[(c + p) % k] + s * rng.standard_normal(spec.per_class)
        clutter = rng.uniform(0, 1, (spec.per_class, 3))
        pts.append(np.hstack([inf, clutter]))
        lab.append(np.full(spec.per_class, c))
    return np.vstack(pts), np.concatenate(lab), {"levels": levels.tolist()}


def _ellipses(spec, rng):
    # two elongated classes stacked vertically; long axis horizontal
    s = 0.2 if spec.noise is None else spec.noise
    n = spec.per_class
    pts = []
    for c, cy in enumerate((0.0, 1.0)):
        pts.append(np.column_stack([3.0 * s * rng.standard_normal(n) * 2.0,
                                    cy + s * rng.standard_normal(n)]))
    return np.vstack(pts), np.repeat([0, 1], n), {}


def _flip(pts, lab, count, rng):
    """Relabel the `count` points deepest inside their own class (round-robin over classes)."""
    lab = lab.copy()
    classes = np.unique(lab)
    if count > len(lab):
        raise ValueError("more flips than points")
    order = {}
    for c in classes:
        ix = np.flatnonzero(lab == c)
        center = pts[ix].mean(axis=0)
        order[c] = list(ix[np.argsort(np.linalg.norm(pts[ix] - center, axis=1), kind="stable")])
    flipped = []
    k = 0
    while len(flipped) < count:
        c = classes[k % len(classes)]
        i = order[c].pop(0)
        flipped.append(int(i))
        lab[i] = classes[(np.searchsorted(classes, c) + 1) % len(classes)]
        k += 1
    return lab, sorted(flipped)


# -- splitting ------------------------------------------------------------------
def split(d: Dataset, train_fraction: float, seed: int = 0):
    """Stratified split. Each class with >= 2 points keeps at least one point on each
    side (so the per-class train count is ``round(fraction * n)`` clipped to
    ``[1, n - 1]``); a single-point class goes to train with a warning."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    tr, te = [], []
    for c, ix in sorted(d.class_index.items()):
        ix = rng.permutation(ix)
        n = len(ix)
        if n == 1:
            warnings.warn(f"class {d.classes[c]!r} has a single point; it goes to train",
                          stacklevel=2)
            tr.extend(ix)
            continue
        k = int(np.clip(np.floor(train_fraction * n + 0.5), 1, n - 1))
        tr.extend(ix[:k])
        te.extend(ix[k:])
    if not tr or not te:
        raise ValueError("split leaves one side empty")
    tr, te = np.sort(np.array(tr)), np.sort(np.array(te))
    return d.subset(tr, f"{d.name}-train"), d.subset(te, f"{d.name}-test")


def sample_split(d: Dataset, n_train: int, n_test: int, seed: int = 0):
    """Disjoint random train/test subsamples of fixed sizes (not stratified)."""
    if n_train < 1 or n_test < 1:
        raise ValueError("sample sizes must be >= 1")
    if n_train + n_test > d.N:
        raise ValueError(f"asked for {n_train + n_test} points, dataset has {d.N}")
    perm = np.random.default_rng(seed).permutation(d.N)
    tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:n_train + n_test])
    return d.subset(tr, f"{d.name}-train"), d.subset(te, f"{d.name}-test")
