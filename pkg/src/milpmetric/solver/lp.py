"""LP relaxation solving.

``solve_lp`` ignores integrality. Before handing the problem to an engine it
substitutes fixed columns, turns singleton rows into bounds and scales every
remaining row to unit max-|coefficient|; results are reported in the original
units.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

from .model import MilpModel
from .params import SolverParams
from .simplex import simplex


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | iteration-limit
    x: np.ndarray | None
    objective: float
    activity: np.ndarray | None
    method: str = ""
    iterations: int = 0


def solve_lp(model: MilpModel, params: SolverParams | None = None, lb=None, ub=None,
             method: str | None = None) -> LpSolution:
    """Solve the continuous relaxation of ``model`` (optionally with overridden bounds)."""
    params = params or SolverParams()
    lb = model.lb if lb is None else np.asarray(lb, float)
    ub = model.ub if ub is None else np.asarray(ub, float)
    lo, hi = model.row_bounds()
    return solve_arrays(model.obj, model.A, lo, hi, lb, ub, params, method,
                        offset=model.obj_offset)


def solve_arrays(c, A, lo, hi, lb, ub, params: SolverParams, method=None, offset=0.0):
    tol = params.feas_tol
    n = len(c)
    A = sp.csr_matrix(A)
    red = _presolve(A, lo.copy(), hi.copy(), lb.copy(), ub.copy(), tol)
    if red is None:
        return LpSolution("infeasible", None, -np.inf, None)
    A2, lo2, hi2, lb2, ub2, free, xfix = red
    c2 = np.asarray(c, float)[free]

    method = method or params.lp_method
    if method == "auto":
        method = "simplex" if A2.shape[0] <= params.simplex_max_rows else "highs"

    if A2.shape[0]:
        scale = 1.0 / np.maximum(abs(A2).max(axis=1).toarray().ravel(), 1e-300)
        S = sp.diags(scale)
        A2 = sp.csr_matrix(S @ A2)
        lo2 = lo2 * scale
        hi2 = hi2 * scale

    if c2.size == 0:
        status, xr, iters = "optimal", np.zeros(0), 0
    elif method == "simplex":
        res = simplex(c2, A2, lo2, hi2, lb2, ub2, feas_tol=tol,
                      max_iter=params.lp_iteration_limit)
        status, xr, iters = res.status, res.x, res.iterations
    elif method == "highs":
        status, xr, iters = _highs(c2, A2, lo2, hi2, lb2, ub2, params)
    else:
        raise ValueError(f"unknown LP method {method!r}")

    if status != "optimal":
        return LpSolution(status, None, -np.inf if status == "infeasible" else np.inf,
                          None, method, iters)
    x = xfix.copy()
    x[free] = xr
    # clean bound noise from the engines
    x = np.minimum(np.maximum(x, lb), ub)
    activity = A @ x
    return LpSolution("optimal", x, float(np.dot(c, x)) + offset, activity, method, iters)


def _presolve(A, lo, hi, lb, ub, tol):
    """Remove fixed columns and singleton rows; return None when infeasibility is detected."""
    if np.any(lo > hi + tol):
        return None
    keep_rows = np.ones(A.shape[0], dtype=bool)
    for _ in range(20):
        if np.any(lb > ub + tol):
            return None
        fixed = ub - lb <= 1e-12
        act = A[:, fixed] @ lb[fixed] if fixed.any() else np.zeros(A.shape[0])
        sub = A[:, ~fixed]
        nnz = np.diff(sub.indptr) * keep_rows
        # empty rows must be satisfied by the fixed part alone
        empty = keep_rows & (nnz == 0)
        if np.any(empty & ((act < lo - tol) | (act > hi + tol))):
            return None
        keep_rows &= ~empty
        single = np.flatnonzero(keep_rows & (nnz == 1))
        if single.size == 0:
            break
        changed = False
        subc = sub.tocsr()
        free_idx = np.flatnonzero(~fixed)
        for i in single:
            s = subc.indptr[i]
            j = free_idx[subc.indices[s]]
            a = subc.data[s]
            rlo, rhi = lo[i] - act[i], hi[i] - act[i]
            blo, bhi = (rlo / a, rhi / a) if a > 0 else (rhi / a, rlo / a)
            if blo > lb[j]:
                lb[j] = blo
                changed = True
            if bhi < ub[j]:
                ub[j] = bhi
                changed = True
            keep_rows[i] = False
        # collapse crossing bounds that are within tolerance
        near = (lb > ub) & (lb <= ub + tol)
        mid = 0.5 * (lb[near] + ub[near])
        lb[near] = mid
        ub[near] = mid
        if not changed:
            break
    if np.any(lb > ub + tol):
        return None
    fixed = ub - lb <= 1e-12
    xfix = np.where(fixed, lb, 0.0)
    act = A[:, fixed] @ lb[fixed] if fixed.any() else np.zeros(A.shape[0])
    free = ~fixed
    rows = np.flatnonzero(keep_rows)
    A2 = A[rows][:, free]
    nz = np.diff(A2.indptr) > 0
    rows, A2 = rows[nz], A2[nz]
    return (A2, lo[rows] - act[rows], hi[rows] - act[rows], lb[free], ub[free], free, xfix)


def _highs(c, A, lo, hi, lb, ub, params):
    opts = {"disp": False, "presolve": True}
    if params.time_limit and not params.deterministic:
        opts["time_limit"] = float(params.time_limit)
    cons = [LinearConstraint(A, lo, hi)] if A.shape[0] else []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = milp(-np.asarray(c, float), constraints=cons, bounds=Bounds(lb, ub),
                   options=opts)
    status = {0: "optimal", 1: "iteration-limit", 2: "infeasible", 3: "unbounded"}.get(
        res.status, "infeasible")
    if status == "optimal" and res.x is None:
        status = "infeasible"
    return status, res.x, 0
