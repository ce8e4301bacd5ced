"""MILP formulations that learn a metric from labeled points, and decoding of their solutions.

Distances ``d_ij = a^T |x_i - x_j| + (x_i - x_j)^T B (x_i - x_j)`` never appear as
variables: every row that mentions one carries its coefficients over the stacked
``(a, upper-triangular B)`` vector directly.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset, DeltaCache, NormParams, build_delta_cache, is_normalized, upper_pairs
from .metric import Metric, r_ratios
from .solver import MilpModel, MilpSolution, ModelBuilder, SolverParams, solve_milp

log = logging.getLogger(__name__)

A_MODES = ("free", "nonneg", "zero")


@dataclass(frozen=True)
class FitParams:
    """Formulation parameters. ``W=None`` selects ``2 / (N K)`` for the K-NN model;
    ``model=None`` picks single-NN for K = 1 and K-NN otherwise."""

    rho: float = 0.2
    d_min: float = 0.01
    K: int = 1
    W: float | None = None
    epsilon_alpha: float = 0.5
    allow_outliers: bool = True
    big_m: float = 1.0
    relax_outlier_rows: bool = True
    gershgorin: bool = False
    sparsify_U: int | None = None
    b_max: float = 10.0
    a_mode: str = "free"
    model: str | None = None

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if not 0 < self.d_min < 1:
            raise ValueError("d_min must lie in (0, 1)")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.W is not None and self.W < 0:
            raise ValueError("W must be >= 0")
        if not 0 < self.epsilon_alpha <= 1:
            raise ValueError("epsilon_alpha must lie in (0, 1]")
        if self.big_m < 1:
            raise ValueError("big_m must be >= 1")
        if self.b_max <= 0:
            raise ValueError("b_max must be positive")
        if self.a_mode not in A_MODES:
            raise ValueError(f"a_mode must be one of {A_MODES}")
        if self.sparsify_U is not None and self.sparsify_U < 0:
            raise ValueError("sparsify_U must be >= 0")
        if self.model not in (None, "nn1", "knn"):
            raise ValueError("model must be 'nn1' or 'knn'")
        if self.model == "nn1" and self.K != 1:
            raise ValueError("the single-NN model needs K = 1")

    @property
    def family(self) -> str:
        if self.model is not None:
            return self.model
        return "nn1" if self.K == 1 else "knn"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class VariableMap:
    """Semantic groups of model variable indices.

    Pair-indexed groups map ``(i, j)`` to a column; point-indexed groups map ``i``.
    """

    D: int
    N: int
    labels: np.ndarray
    family: str
    a: np.ndarray
    b: np.ndarray  # upper triangle, row-major (see data.upper_pairs)
    lam: int | None = None
    kappa: int | None = None
    Delta: dict = field(default_factory=dict)
    y: dict = field(default_factory=dict)
    w: dict = field(default_factory=dict)
    u: dict = field(default_factory=dict)
    z: dict = field(default_factory=dict)
    q: dict = field(default_factory=dict)
    q_limit: int | None = None
    b_plus: dict = field(default_factory=dict)
    params: FitParams | None = None
    epsilon: float | None = None
    W: float | None = None
    index_map: np.ndarray | None = None  # positions in the caller's dataset

    @property
    def ab(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    def groups(self) -> dict:
        g = {"a": list(self.a), "b": list(self.b)}
        if self.lam is not None:
            g["lambda"] = [self.lam]
        if self.kappa is not None:
            g["kappa"] = [self.kappa]
        for name in ("Delta", "y", "w", "u", "z", "q", "b_plus"):
            g[name] = list(getattr(self, name).values())
        return g

    def binaries(self) -> list:
        out = []
        for name in ("y", "z", "u", "q"):
            out.extend(getattr(self, name).values())
        return sorted(out)


# -- validation of inputs ---------------------------------------------------------
def _check_dataset(d: Dataset, min_per_class: int):
    if not is_normalized(d):
        raise ValueError("dataset must be normalized to [0, 1] before building a model")
    counts = {c: len(ix) for c, ix in d.class_index.items()}
    if len(counts) < 2:
        raise ValueError("need at least 2 classes to learn a metric")
    small = [d.classes[c] for c, n in counts.items() if n < min_per_class]
    if small:
        raise ValueError(f"classes {small} have fewer than {min_per_class} points")


def _base(b: ModelBuilder, D: int, p: FitParams):
    if p.a_mode == "free":
        alo, ahi = -np.inf, np.inf
    elif p.a_mode == "nonneg":
        alo, ahi = 0.0, np.inf
    else:
        alo, ahi = 0.0, 0.0
    a = np.array([b.add_var(f"a_{k}", alo, ahi) for k in range(D)])
    bb = np.array([b.add_var(f"b_{k}_{l}", -p.b_max, p.b_max) for k, l in upper_pairs(D)])
    return a, bb


def _f_region(b: ModelBuilder, d: Dataset, delta: DeltaCache, ab, p: FitParams):
    """0 <= d_ij <= 1 for every pair and d_ik >= d_min for non-class pairs (one ranged row
    per unordered pair)."""
    for i in range(d.N):
        for j in range(i + 1, d.N):
            coef = delta.coeffs(i, j)
            nz = coef != 0
            lo = p.d_min if d.labels[i] != d.labels[j] else 0.0
            if not nz.any():
                if lo > 0:
                    raise ValueError(f"points {i} and {j} coincide but carry different labels")
                continue
            b.add_row(f"F_{i}_{j}", ab[nz], coef[nz], "G", lo, 1.0 - lo)


def _d_terms(delta, ab, i, j, sign=1.0):
    coef = delta.coeffs(i, j)
    nz = coef != 0
    return list(ab[nz]), list(sign * coef[nz])


# -- single nearest neighbor ------------------------------------------------------
def build_single_nn(d: Dataset, delta: DeltaCache, p: FitParams):
    """Single-NN model with outlier binaries and McCormick-linearized assignment terms."""
    _check_dataset(d, 2)
    M = p.big_m
    b = ModelBuilder()
    a, bb = _base(b, d.D, p)
    ab = np.concatenate([a, bb])
    if p.allow_outliers:
        lam = b.add_var("lambda", 0.0, M, obj=1.0)
    else:
        lam = b.add_var("lambda", -np.inf, M, obj=1.0)
    vm = VariableMap(d.D, d.N, d.labels.copy(), "nn1", a, bb, lam=lam, params=p)
    same = d.labels[:, None] == d.labels[None, :]
    if p.allow_outliers:
        for i in range(d.N):
            vm.z[i] = b.add_binary(f"z_{i}", obj=-p.rho, priority=2)
    for i in range(d.N):
        for j in np.flatnonzero(same[i]):
            if j == i:
                continue
            vm.y[(i, int(j))] = b.add_binary(f"y_{i}_{j}", priority=1)
            vm.w[(i, int(j))] = b.add_var(f"w_{i}_{j}", 0.0, 1.0)

    for i in range(d.N):
        cos = [j for j in range(d.N) if same[i, j] and j != i]
        wsum = [vm.w[(i, j)] for j in cos]
        for k in np.flatnonzero(~same[i]):
            k = int(k)
            cols, vals = _d_terms(delta, ab, i, k, -1.0)
            cols += wsum + [lam]
            vals += [1.0] * len(wsum) + [1.0]
            if p.allow_outliers:
                cols.append(vm.z[k])
                vals.append(-M)
                if p.relax_outlier_rows:
                    cols.append(vm.z[i])
                    vals.append(-M)
            b.add_row(f"sep_{i}_{k}", cols, vals, "L", 0.0)
        for j in cos:
            w, y = vm.w[(i, j)], vm.y[(i, j)]
            cols, vals = _d_terms(delta, ab, i, j, -1.0)
            b.add_row(f"mc1_{i}_{j}", cols + [w], vals + [1.0], "L", 0.0)
            b.add_row(f"mc2_{i}_{j}", [w, y], [1.0, -1.0], "L", 0.0)
            b.add_row(f"mc3_{i}_{j}", cols + [w, y], vals + [1.0, -1.0], "G", -1.0)
        ys = [vm.y[(i, j)] for j in cos]
        if p.allow_outliers:
            b.add_row(f"assign_{i}", ys + [vm.z[i]], [1.0] * (len(ys) + 1), "E", 1.0)
            for j in cos:
                b.add_row(f"yz_{i}_{j}", [vm.y[(i, j)], vm.z[j]], [1.0, 1.0], "L", 1.0)
        else:
            b.add_row(f"assign_{i}", ys, [1.0] * len(ys), "E", 1.0)
    _f_region(b, d, delta, ab, p)
    model, vm = _extensions(b, vm, p)
    return model, vm


# -- K nearest neighbors --------------------------------------------------------
def epsilon_for(delta: DeltaCache, alpha: float) -> float:
    N = delta.N
    off = delta.euclid[~np.eye(N, dtype=bool)]
    return float(alpha * off.min())


def default_W(N: int, K: int) -> float:
    return 1.0 / (N * K / 2.0)


def build_knn(d: Dataset, delta: DeltaCache, p: FitParams):
    """K-NN model over all ordered pairs, with outlier binaries when allowed.

    With outliers allowed and ``relax_outlier_rows`` on, the count row of an outlier
    is relaxed by ``K z_i`` so a flagged point does not pin the minimum count to 0.
    """
    _check_dataset(d, p.K)
    N, K, M = d.N, p.K, p.big_m
    eps = epsilon_for(delta, p.epsilon_alpha)
    if eps <= 0:
        raise ValueError("co-located points make epsilon zero")
    W = default_W(N, K) if p.W is None else p.W
    b = ModelBuilder()
    a, bb = _base(b, d.D, p)
    ab = np.concatenate([a, bb])
    kappa = b.add_var("kappa", 0.0, float(K), obj=1.0)
    vm = VariableMap(d.D, N, d.labels.copy(), "knn", a, bb, kappa=kappa, params=p,
                     epsilon=eps, W=W)
    same = d.labels[:, None] == d.labels[None, :]
    for i in range(N):
        vm.Delta[i] = b.add_var(f"Delta_{i}", 0.0, 1.0)
    if p.allow_outliers:
        for i in range(N):
            vm.z[i] = b.add_binary(f"z_{i}", obj=-p.rho, priority=2)
    for i in range(N):
        for j in range(N):
            if i != j:
                vm.u[(i, j)] = b.add_binary(f"u_{i}_{j}", obj=W if same[i, j] else 0.0,
                                            priority=1)
    for i in range(N):
        co = [vm.u[(i, j)] for j in range(N) if j != i and same[i, j]]
        cols, vals = co + [kappa], [1.0] * len(co) + [-1.0]
        if p.allow_outliers and p.relax_outlier_rows:
            cols.append(vm.z[i])
            vals.append(float(K))
        b.add_row(f"kappa_{i}", cols, vals, "G", 0.0)
        allu = [vm.u[(i, j)] for j in range(N) if j != i]
        b.add_row(f"atmostK_{i}", allu, [1.0] * len(allu), "L", float(K))
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            u = vm.u[(i, j)]
            if p.allow_outliers:
                b.add_row(f"uzi_{i}_{j}", [u, vm.z[i]], [1.0, 1.0], "L", 1.0)
                b.add_row(f"uzj_{i}_{j}", [u, vm.z[j]], [1.0, 1.0], "L", 1.0)
            cols, vals = _d_terms(delta, ab, i, j)
            # d_ij - Delta_i + M u_ij <= M
            b.add_row(f"within_{i}_{j}", cols + [vm.Delta[i], u], vals + [-1.0, M], "L", M)
            if not same[i, j]:
                # d_ik - Delta_i + M (u_ik + z_i + z_k) >= eps
                cc, cv = cols + [vm.Delta[i], u], vals + [-1.0, M]
                if p.allow_outliers:
                    cc += [vm.z[i], vm.z[j]]
                    cv += [M, M]
                b.add_row(f"beyond_{i}_{j}", cc, cv, "G", eps)
    _f_region(b, d, delta, ab, p)
    return _extensions(b, vm, p)


def _extensions(b: ModelBuilder, vm: VariableMap, p: FitParams):
    if p.gershgorin:
        add_gershgorin(b, vm)
    if p.sparsify_U is not None:
        add_sparsification(b, vm, p.sparsify_U, p.b_max)
    return b.build(), vm


def build_model(d: Dataset, delta: DeltaCache, p: FitParams):
    return build_single_nn(d, delta, p) if p.family == "nn1" else build_knn(d, delta, p)


# -- extensions -------------------------------------------------------------------
def _builder(model_or_builder):
    if isinstance(model_or_builder, MilpModel):
        return ModelBuilder.from_model(model_or_builder), True
    return model_or_builder, False


def add_gershgorin(model, vm: VariableMap):
    """Diagonal dominance of B through ``b+_kl >= |b_kl|`` and
    ``b_kk - sum_{l != k} b+_kl >= 0``. Accepts a model or a builder; a model input
    returns a new model."""
    b, rebuild = _builder(model)
    D = vm.D
    pos = {pq: vm.b[t] for t, pq in enumerate(upper_pairs(D))}
    for k in range(D):
        for l in range(k + 1, D):
            bp = b.add_var(f"bplus_{k}_{l}", 0.0, np.inf)
            vm.b_plus[(k, l)] = bp
            b.add_row(f"absp_{k}_{l}", [bp, pos[(k, l)]], [1.0, -1.0], "G", 0.0)
            b.add_row(f"absn_{k}_{l}", [bp, pos[(k, l)]], [1.0, 1.0], "G", 0.0)
    for k in range(D):
        cols = [pos[(k, k)]] + [vm.b_plus[tuple(sorted((k, l)))] for l in range(D) if l != k]
        vals = [1.0] + [-1.0] * (len(cols) - 1)
        b.add_row(f"gersh_{k}", cols, vals, "G", 0.0)
    return b.build() if rebuild else b


def add_sparsification(model, vm: VariableMap, U: int, b_max: float):
    """At most U nonzero entries of upper-triangular B, via binaries q and
    ``-b_max q <= b <= b_max q``."""
    Q = len(vm.b)
    if U > Q:
        raise ValueError(f"U={U} exceeds the {Q} coefficients of B")
    p = vm.params
    if U == 0 and p is not None and p.a_mode == "zero":
        raise ValueError("U = 0 with a fixed to 0 leaves only the zero metric, which "
                         "violates d_min > 0")
    b, rebuild = _builder(model)
    for t, (k, l) in enumerate(upper_pairs(vm.D)):
        q = b.add_binary(f"q_{k}_{l}", priority=3)
        vm.q[(k, l)] = q
        b.add_row(f"sparse_hi_{k}_{l}", [vm.b[t], q], [1.0, -b_max], "L", 0.0)
        b.add_row(f"sparse_lo_{k}_{l}", [vm.b[t], q], [1.0, b_max], "G", 0.0)
    vm.q_limit = U
    qs = list(vm.q.values())
    b.add_row("sparse_card", qs, [1.0] * len(qs), "L", float(U))
    return b.build() if rebuild else b


def add_similarity_pairs(model, vm: VariableMap, delta: DeltaCache, must=(), cannot=(),
                         margin: float = 0.0):
    """For every must-link (i, j) and cannot-link (k, l) combination add
    ``d_ij + margin <= d_kl``."""
    must, cannot = list(must), list(cannot)
    for i, j in must + cannot:
        if i == j:
            raise ValueError(f"pair ({i}, {j}) references the same point twice")
        if not (0 <= i < vm.N and 0 <= j < vm.N):
            raise ValueError(f"pair ({i}, {j}) out of range")
    if not must or not cannot:
        return model
    b, rebuild = _builder(model)
    ab = vm.ab
    for s, (i, j) in enumerate(must):
        for t, (k, l) in enumerate(cannot):
            coef = delta.coeffs(i, j) - delta.coeffs(k, l)
            nz = coef != 0
            if not nz.any():
                # identical distances: the row reduces to margin <= 0
                if margin > 0:
                    one = b.add_var(f"sim_one_{s}_{t}", 1.0, 1.0)
                    b.add_row(f"sim_{s}_{t}", [one], [margin], "L", 0.0)
                continue
            b.add_row(f"sim_{s}_{t}", ab[nz], coef[nz], "L", -margin)
    return b.build() if rebuild else b


# -- decoding -------------------------------------------------------------------
@dataclass
class FitBreakdown:
    lam: float | None
    kappa: float | None
    outliers: list
    objective: float
    co_class_count: float | None = None

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "kappa": self.kappa, "outliers": self.outliers,
                "outlier_count": len(self.outliers), "objective": self.objective,
                "co_class_assignments": self.co_class_count}


def metric_from_vector(vm: VariableMap, x, norm: NormParams | None = None) -> Metric:
    x = np.asarray(x, float)
    a = x[vm.a] + 0.0
    B = np.zeros((vm.D, vm.D))
    iu, ju = np.triu_indices(vm.D)
    B[iu, ju] = x[vm.b]
    B[ju, iu] = x[vm.b]
    return Metric(a, B + 0.0, "learned", norm)


def extract_metric(vm: VariableMap, sol: MilpSolution, norm: NormParams | None = None,
                   provenance: dict | None = None):
    """Return ``(metric, outlier indices, breakdown)`` from a solution with an incumbent."""
    if not sol.has_incumbent:
        raise ValueError(f"no incumbent to extract (status {sol.status})")
    x = sol.x
    m = metric_from_vector(vm, x, norm)
    outliers = sorted(int(i) for i, col in vm.z.items() if x[col] > 0.5)
    if vm.index_map is not None:
        outliers = [int(vm.index_map[i]) for i in outliers]
    lam = float(x[vm.lam]) if vm.lam is not None else None
    kap = float(x[vm.kappa]) if vm.kappa is not None else None
    cnt = None
    if vm.u:
        cnt = float(sum(x[c] for (i, j), c in vm.u.items() if vm.labels[i] == vm.labels[j]))
    br = FitBreakdown(lam, kap, outliers, float(sol.objective), cnt)
    prov = {"model": vm.family, "params": vm.params.to_dict() if vm.params else None,
            "objective": float(sol.objective)}
    prov.update(provenance or {})
    return Metric(m.a, m.B, "learned", norm, prov), outliers, br


def mccormick_gap(vm: VariableMap, delta: DeltaCache, x) -> float:
    """max |w_ij - y_ij d_ij(a, B)| over the assignment terms of a single-NN solution."""
    if not vm.w:
        return 0.0
    x = np.asarray(x, float)
    ab = x[vm.ab]
    worst = 0.0
    for (i, j), wc in vm.w.items():
        dij = float(delta.coeffs(i, j) @ ab)
        worst = max(worst, abs(x[wc] - x[vm.y[(i, j)]] * dij))
    return worst


# -- heuristics -----------------------------------------------------------------
def greedy_outliers(dist, labels, base=(), limit=None):
    """Repeatedly flag the point with the largest R >= 1, excluding flagged points as
    neighbor candidates, until every remaining R is below 1."""
    N = len(labels)
    out = set(int(i) for i in base)
    limit = N if limit is None else limit
    same = labels[:, None] == labels[None, :]
    while len(out) < limit:
        ok = np.ones(N, dtype=bool)
        ok[list(out)] = False
        co = np.where(same & ok[None, :] & ~np.eye(N, dtype=bool), dist, np.inf).min(axis=1)
        non = np.where(~same & ok[None, :], dist, np.inf).min(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            R = np.where(non > 0, co / non, np.inf)
        R[~ok] = -np.inf
        R[~np.isfinite(co) | ~np.isfinite(non)] = -np.inf
        worst = int(np.argmax(R))
        if R[worst] < 1:
            break
        out.add(worst)
    return sorted(out)


class AssignmentHeuristic:
    """Candidate integer assignments derived from the metric encoded in a solution
    vector: nearest-neighbor assignments under that metric, combined with several
    outlier sets (current, greedy by R-ratio, bottleneck added or removed)."""

    def __init__(self, model: MilpModel, vm: VariableMap, delta: DeltaCache):
        self.model = model
        self.vm = vm
        self.delta = delta
        self.labels = vm.labels
        self.same = self.labels[:, None] == self.labels[None, :]

    def __call__(self, x):
        x = np.asarray(x, float)
        vm = self.vm
        dist = self.delta.distances(x[vm.a], x[vm.b])
        dist = dist + 1e-12 * self.delta.euclid  # break exact ties toward Euclidean order
        outsets = [[]]
        if vm.z:
            cur = sorted(i for i, c in vm.z.items() if x[c] > 0.5)
            greedy = greedy_outliers(dist, self.labels)
            grown = greedy_outliers(dist, self.labels, cur)
            outsets = [cur, greedy, grown, []]
            bott = self._bottleneck(dist, cur)
            if bott is not None:
                outsets.append(sorted(set(cur) | {bott}))
            for i in cur:
                outsets.append([k for k in cur if k != i])
        seen, cands = set(), []
        for out in outsets:
            key = tuple(out)
            if key in seen or not self._outliers_ok(out):
                continue
            seen.add(key)
            if vm.family == "nn1":
                cands.append(self._nn1(dist, out))
            else:
                cands.extend(self._knn(dist, out))
        if vm.q:
            for v in cands:
                self._fill_q(v, x)
        return cands

    def _fill_q(self, v, x):
        """Switch on the U largest |b| entries of ``x`` (ties by position)."""
        vm = self.vm
        U = vm.q_limit
        mag = np.abs(x[vm.b])
        order = np.lexsort((np.arange(mag.size), -mag))[:U]
        cols = list(vm.q.values())
        for t in order:
            v[cols[t]] = 1.0

    def _outliers_ok(self, out):
        need = 2 if self.vm.family == "nn1" else 1
        keep = np.ones(self.vm.N, dtype=bool)
        keep[list(out)] = False
        for c in np.unique(self.labels):
            if np.sum(keep & (self.labels == c)) < need:
                return False
        return True

    def _bottleneck(self, dist, out):
        N = self.vm.N
        ok = np.ones(N, dtype=bool)
        ok[list(out)] = False
        co = np.where(self.same & ok[None, :] & ~np.eye(N, dtype=bool), dist, np.inf).min(1)
        non = np.where(~self.same & ok[None, :], dist, np.inf).min(1)
        margin = np.where(ok, non - co, np.inf)
        if not np.isfinite(margin).any():
            return None
        return int(np.argmin(margin))

    def _nn1(self, dist, out):
        vm = self.vm
        v = np.zeros(self.model.num_vars)
        ok = np.ones(vm.N, dtype=bool)
        ok[list(out)] = False
        for i in out:
            v[vm.z[i]] = 1.0
        for i in np.flatnonzero(ok):
            cand = np.flatnonzero(self.same[i] & ok)
            cand = cand[cand != i]
            j = int(cand[np.lexsort((cand, dist[i, cand]))[0]])
            v[vm.y[(i, j)]] = 1.0
        return v

    def _knn(self, dist, out):
        vm, K = self.vm, self.vm.params.K
        ok = np.ones(vm.N, dtype=bool)
        ok[list(out)] = False
        base = np.zeros(self.model.num_vars)
        for i in out:
            base[vm.z[i]] = 1.0
        nearest, coclass = base.copy(), base.copy()
        for i in np.flatnonzero(ok):
            cand = np.flatnonzero(ok)
            cand = cand[cand != i]
            order = cand[np.lexsort((cand, dist[i, cand]))]
            for j in order[:K]:
                nearest[vm.u[(i, int(j))]] = 1.0
            co = order[self.same[i, order]]
            for j in co[:K]:
                coclass[vm.u[(i, int(j))]] = 1.0
        return [nearest, coclass]


def seed_vectors(model: MilpModel, vm: VariableMap, p: FitParams):
    """Solution-vector stubs carrying simple metrics (Euclidean, Manhattan, single axes)."""
    D = vm.D
    pairs = upper_pairs(D)
    diag = [t for t, (k, l) in enumerate(pairs) if k == l]
    metrics = []
    metrics.append((np.zeros(D), np.eye(D)[np.triu_indices(D)]))
    if p.a_mode != "zero":
        metrics.append((np.ones(D), np.zeros(len(pairs))))
    for k in range(D):
        bq = np.zeros(len(pairs))
        bq[diag[k]] = 1.0
        metrics.append((np.zeros(D), bq))
        if p.a_mode != "zero":
            metrics.append((np.eye(D)[k], np.zeros(len(pairs))))
    out = []
    for a, bq in metrics:
        v = np.zeros(model.num_vars)
        v[vm.a] = a
        v[vm.b] = bq
        out.append(v)
    return out


# -- one-call fitting -----------------------------------------------------------
@dataclass
class FitResult:
    metric: Metric
    outliers: list
    breakdown: FitBreakdown
    solution: MilpSolution
    model: MilpModel
    vmap: VariableMap

    @property
    def condition_holds(self) -> bool:
        """True when the reported separation is positive (K=1) or the count reaches the
        majority (K>1)."""
        if self.breakdown.lam is not None:
            return self.breakdown.lam > 0
        return self.breakdown.kappa >= self.vmap.params.K // 2 + 1 - 1e-9


def fit(d: Dataset, fp: FitParams, sp: SolverParams | None = None, norm=None,
        must=(), cannot=(), margin: float = 0.0, delta: DeltaCache | None = None) -> FitResult:
    """Build, solve and decode. ``d`` must already be normalized."""
    sp = sp or SolverParams()
    delta = delta or build_delta_cache(d)
    model, vm = build_model(d, delta, fp)
    if must or cannot:
        model = add_similarity_pairs(model, vm, delta, must, cannot, margin)
    heur = AssignmentHeuristic(model, vm, delta)
    sol = solve_milp(model, sp, heuristic=heur, seeds=seed_vectors(model, vm, fp))
    if not sol.has_incumbent:
        raise FitError(sol, model, vm)
    metric, outliers, br = extract_metric(
        vm, sol, norm, {"solver": sol.stats(include_time=not sp.deterministic),
                        "solver_params": sp.to_dict()})
    return FitResult(metric, outliers, br, sol, model, vm)


class FitError(RuntimeError):
    """Raised when the solver ends without an incumbent."""

    def __init__(self, sol, model, vm):
        super().__init__(f"no incumbent (solver status {sol.status})")
        self.solution = sol
        self.model = model
        self.vmap = vm


def training_r(metric: Metric, d: Dataset, outliers=()) -> np.ndarray:
    return r_ratios(metric, d, outliers)
