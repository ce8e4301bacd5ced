"""LP-based branch-and-bound and an exhaustive enumeration oracle."""
from __future__ import annotations

import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import solve_lp
from .model import MilpModel
from .params import SolverParams

log = logging.getLogger(__name__)


@dataclass
class MilpSolution:
    status: str  # optimal | feasible | infeasible | limit | unbounded
    x: np.ndarray | None
    objective: float
    bound: float
    gap: float
    nodes: int
    wall_time: float
    lp_solves: int = 0
    trace: list = field(default_factory=list, repr=False)

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None

    def stats(self, include_time: bool = True) -> dict:
        return {
            "status": self.status,
            "objective": _finite(self.objective),
            "bound": _finite(self.bound),
            "gap": _finite(self.gap),
            "nodes": self.nodes,
            "lp_solves": self.lp_solves,
            "wall_time": round(self.wall_time, 3) if include_time else None,
        }


def _finite(v):
    return float(v) if np.isfinite(v) else None


def relative_gap(bound: float, objective: float) -> float:
    """Gap measured against ``max(1, |objective|)`` so tiny objectives stay well defined."""
    if not np.isfinite(objective):
        return np.inf
    return max(bound - objective, 0.0) / max(1.0, abs(objective))


@dataclass(order=True)
class _Node:
    key: tuple
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    bound: float = field(compare=False)
    depth: int = field(compare=False)
    branch: tuple | None = field(compare=False, default=None)  # (var pos, direction, frac)


class BranchAndBound:
    """Maximize a :class:`MilpModel` by LP-based branch-and-bound.

    ``heuristic`` is an optional callable mapping a (fractional) solution
    vector to a list of candidate vectors whose integer entries are tried as
    complete assignments; ``seeds`` are vectors handed to it before the root LP.
    """

    def __init__(self, model: MilpModel, params: SolverParams | None = None,
                 heuristic=None, seeds=()):
        self.model = model
        self.params = params or SolverParams()
        self.heuristic = heuristic
        self.seeds = list(seeds)
        self.ints = np.flatnonzero(model.integer)
        pr = model.priority if model.priority is not None else np.zeros(model.num_vars, int)
        self.prio = np.asarray(pr)[self.ints]
        self.inc_x = None
        self.inc_obj = -np.inf
        self.nodes = 0
        self.lp_solves = 0
        self.tried = set()
        self.trace = []
        k = len(self.ints)
        self.pc_sum = np.zeros((2, k))
        self.pc_cnt = np.zeros((2, k))
        self._seq = itertools.count()

    # -- helpers ----------------------------------------------------------------
    def _abs_gap(self):
        return self.params.rel_gap_tol * max(1.0, abs(self.inc_obj))

    def _solve(self, lb, ub):
        self.lp_solves += 1
        return solve_lp(self.model, self.params, lb, ub)

    def _try_assignment(self, vals) -> bool:
        vals = np.round(np.asarray(vals, float))
        vals = np.clip(vals, self.model.lb[self.ints], self.model.ub[self.ints])
        key = vals.astype(np.int64).tobytes()
        if key in self.tried:
            return False
        self.tried.add(key)
        lb = self.model.lb.copy()
        ub = self.model.ub.copy()
        lb[self.ints] = vals
        ub[self.ints] = vals
        lp = self._solve(lb, ub)
        if lp.status != "optimal":
            return False
        if lp.objective > self.inc_obj + 1e-12:
            self.inc_x = lp.x
            self.inc_obj = lp.objective
            log.debug("incumbent %.9g after %d nodes", lp.objective, self.nodes)
            return True
        return False

    def _run_heuristics(self, x):
        improved = self._try_assignment(x[self.ints])
        if self.heuristic is None:
            return improved
        for cand in self.heuristic(x):
            improved |= self._try_assignment(np.asarray(cand)[self.ints])
        rounds = 0
        last = improved
        while last and rounds < self.params.polish_rounds:
            last = False
            for cand in self.heuristic(self.inc_x):
                last |= self._try_assignment(np.asarray(cand)[self.ints])
            rounds += 1
        return improved

    def _out_of_time(self, t0):
        p = self.params
        if p.deterministic or p.time_limit is None:
            return False
        return time.perf_counter() - t0 > p.time_limit

    # -- branching --------------------------------------------------------------
    def _select(self, xi, frac_mask):
        cand = np.flatnonzero(frac_mask)
        top = self.prio[cand].max()
        cand = cand[self.prio[cand] == top]
        f = xi[cand] - np.floor(xi[cand])
        if self.params.branching == "pseudo-cost":
            known = (self.pc_cnt[0, cand] > 0) & (self.pc_cnt[1, cand] > 0)
            if known.any():
                avg_d = self.pc_sum[0][self.pc_cnt[0] > 0].mean()
                avg_u = self.pc_sum[1][self.pc_cnt[1] > 0].mean()
                cnt = np.maximum(self.pc_cnt[:, cand], 1)
                pd = np.where(self.pc_cnt[0, cand] > 0, self.pc_sum[0, cand] / cnt[0], avg_d)
                pu = np.where(self.pc_cnt[1, cand] > 0, self.pc_sum[1, cand] / cnt[1], avg_u)
                score = np.maximum(pd * f, 1e-6) * np.maximum(pu * (1 - f), 1e-6)
                return int(cand[np.argmax(score)])
        score = np.minimum(f, 1 - f)
        return int(cand[np.argmax(score)])

    def _update_pseudocost(self, node, obj):
        if node.branch is None or not np.isfinite(obj):
            return
        pos, direction, frac = node.branch
        dist = frac if direction == 0 else 1 - frac
        if dist > 1e-9:
            self.pc_sum[direction, pos] += max(node.bound - obj, 0.0) / dist
            self.pc_cnt[direction, pos] += 1

    def _key(self, bound, depth):
        seq = next(self._seq)
        if self.params.node_order == "best-bound":
            return (-bound, seq)
        return (-depth, -seq)

    # -- main loop --------------------------------------------------------------
    def solve(self) -> MilpSolution:
        t0 = time.perf_counter()
        m = self.model
        for s in self.seeds:
            self._run_heuristics(np.asarray(s, float))

        open_nodes = [_Node(self._key(np.inf, 0), m.lb[self.ints].copy(),
                            m.ub[self.ints].copy(), np.inf, 0)]
        limit_hit = False
        unbounded = False
        while open_nodes:
            if self.nodes >= self.params.node_limit or self._out_of_time(t0):
                limit_hit = True
                break
            node = heapq.heappop(open_nodes)
            if node.bound <= self.inc_obj + self._abs_gap():
                continue
            lb = m.lb.copy()
            ub = m.ub.copy()
            lb[self.ints] = node.lb
            ub[self.ints] = node.ub
            lp = self._solve(lb, ub)
            self.nodes += 1
            if lp.status == "unbounded":
                unbounded = True
                break
            if lp.status != "optimal":
                self._record(node, -np.inf, open_nodes)
                continue
            self._update_pseudocost(node, lp.objective)
            if lp.objective <= self.inc_obj + self._abs_gap():
                self._record(node, lp.objective, open_nodes)
                continue
            x = lp.x
            xi = x[self.ints]
            frac = np.abs(xi - np.round(xi)) > self.params.int_tol
            if not frac.any():
                self._try_assignment(xi)
                self._record(node, lp.objective, open_nodes)
                continue
            if self.nodes == 1 or self.nodes % self.params.heuristic_every == 0:
                self._run_heuristics(x)
                if lp.objective <= self.inc_obj + self._abs_gap():
                    self._record(node, lp.objective, open_nodes)
                    continue

            pos = self._select(xi, frac)
            v = xi[pos]
            f = v - np.floor(v)
            down_ub = node.ub.copy()
            down_ub[pos] = np.floor(v)
            up_lb = node.lb.copy()
            up_lb[pos] = np.ceil(v)
            down = _Node(None, node.lb, down_ub, lp.objective, node.depth + 1, (pos, 0, f))
            up = _Node(None, up_lb, node.ub, lp.objective, node.depth + 1, (pos, 1, f))
            # the child matching the rounding direction is explored first
            order = (up, down) if f < 0.5 else (down, up)
            for child in order:
                child.key = self._key(child.bound, child.depth)
                heapq.heappush(open_nodes, child)
            self._record(node, lp.objective, open_nodes)

        wall = time.perf_counter() - t0
        if unbounded:
            return MilpSolution("unbounded", None, np.inf, np.inf, np.inf, self.nodes, wall,
                                self.lp_solves, self.trace)
        open_bound = max((n.bound for n in open_nodes), default=-np.inf)
        if limit_hit:
            bound = max(open_bound, self.inc_obj)
            status = "feasible" if self.inc_x is not None else "limit"
        else:
            bound = self.inc_obj
            status = "optimal" if self.inc_x is not None else "infeasible"
        gap = relative_gap(bound, self.inc_obj) if self.inc_x is not None else np.inf
        return MilpSolution(status, self.inc_x, self.inc_obj, bound, gap, self.nodes, wall,
                            self.lp_solves, self.trace)

    def _record(self, node, lp_obj, open_nodes):
        open_bound = max((n.bound for n in open_nodes), default=-np.inf)
        self.trace.append((self.nodes, lp_obj, max(open_bound, self.inc_obj), self.inc_obj))


def solve_milp(model: MilpModel, params: SolverParams | None = None, heuristic=None,
               seeds=()) -> MilpSolution:
    """Branch-and-bound on LP relaxations; see :class:`BranchAndBound`."""
    return BranchAndBound(model, params, heuristic, seeds).solve()


def brute_force(model: MilpModel, params: SolverParams | None = None,
                max_binaries: int = 22) -> MilpSolution:
    """Exact optimum by enumerating every binary assignment and solving the remaining LP."""
    params = params or SolverParams()
    t0 = time.perf_counter()
    ints = np.flatnonzero(model.integer)
    if np.any((model.lb[ints] < 0) | (model.ub[ints] > 1)):
        raise ValueError("brute force supports binary integer variables only")
    if len(ints) > max_binaries:
        raise ValueError(f"{len(ints)} binaries exceed the enumeration guard of {max_binaries}")
    k = len(ints)

    is_int = model.integer
    A = model.A.tocsr()
    lo, hi = model.row_bounds()
    pure = np.array([np.all(is_int[A.indices[A.indptr[i]:A.indptr[i + 1]]])
                     for i in range(model.num_rows)], dtype=bool)
    Ap = A[pure][:, ints]
    lop, hip = lo[pure], hi[pure]

    best_x, best_obj, lps = None, -np.inf, 0
    chunk = 1 << min(k, 16)
    total = 1 << k
    bits = np.arange(k)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        Z = ((codes[:, None] >> bits) & 1).astype(float)
        ok = np.all((Z >= model.lb[ints]) & (Z <= model.ub[ints]), axis=1)
        if Ap.shape[0]:
            act = (Ap @ Z.T).T
            ok &= np.all((act >= lop - params.feas_tol) & (act <= hip + params.feas_tol), axis=1)
        for z in Z[ok]:
            lb = model.lb.copy()
            ub = model.ub.copy()
            lb[ints] = z
            ub[ints] = z
            lp = solve_lp(model, params, lb, ub)
            lps += 1
            if lp.status == "unbounded":
                return MilpSolution("unbounded", None, np.inf, np.inf, np.inf, lps,
                                    time.perf_counter() - t0, lps)
            if lp.status == "optimal" and lp.objective > best_obj:
                best_x, best_obj = lp.x, lp.objective
    wall = time.perf_counter() - t0
    if best_x is None:
        return MilpSolution("infeasible", None, -np.inf, -np.inf, np.inf, lps, wall, lps)
    return MilpSolution("optimal", best_x, best_obj, best_obj, 0.0, lps, wall, lps)
