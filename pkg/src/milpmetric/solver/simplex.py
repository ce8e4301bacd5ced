"""Bounded-variable primal simplex.

Solves ``max c.x  s.t.  lo <= A x <= hi,  lb <= x <= ub`` with a revised
simplex that keeps an explicit dense basis inverse. Every row gets a logical
variable ``r = A x`` so the working system is ``[A, -I] v = 0`` with all
bounds carried on ``v``; the all-logical basis is the starting point.

Phase 1 minimizes the sum of bound violations of the basic variables
(composite objective, re-priced each iteration). Pricing is Dantzig's rule
until ``stall_limit`` consecutive degenerate pivots, then Bland's rule until
the objective moves again.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

AT_LOWER, AT_UPPER, FREE, BASIC = 0, 1, 2, 3


@dataclass
class SimplexResult:
    status: str  # optimal | infeasible | unbounded | iteration-limit
    x: np.ndarray
    objective: float
    duals: np.ndarray  # row multipliers y for the maximization, c = A^T y + reduced costs
    reduced_costs: np.ndarray
    iterations: int


class _Simplex:
    def __init__(self, c, A, lo, hi, lb, ub, feas_tol, opt_tol, max_iter, stall_limit):
        self.m, self.n = A.shape
        m, n = self.m, self.n
        self.A = sp.csc_matrix(A, dtype=float)
        self.AT = sp.csr_matrix(self.A.T)
        # internal problem is a minimization of -c
        self.cost = np.concatenate([-np.asarray(c, float), np.zeros(m)])
        self.l = np.concatenate([lb, lo]).astype(float)
        self.u = np.concatenate([ub, hi]).astype(float)
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.piv_tol = 1e-9
        self.max_iter = max_iter
        self.stall_limit = stall_limit
        self.iterations = 0

        N = n + m
        self.status = np.empty(N, dtype=np.int8)
        self.v = np.zeros(N)
        for j in range(n):
            if np.isfinite(self.l[j]):
                self.status[j], self.v[j] = AT_LOWER, self.l[j]
            elif np.isfinite(self.u[j]):
                self.status[j], self.v[j] = AT_UPPER, self.u[j]
            else:
                self.status[j], self.v[j] = FREE, 0.0
        self.basis = np.arange(n, n + m)
        self.status[n:] = BASIC
        self.Binv = -np.eye(m)
        self._recompute_basics()

    # -- linear algebra helpers -------------------------------------------------
    def column(self, j):
        if j < self.n:
            col = np.zeros(self.m)
            s, e = self.A.indptr[j], self.A.indptr[j + 1]
            col[self.A.indices[s:e]] = self.A.data[s:e]
            return col
        col = np.zeros(self.m)
        col[j - self.n] = -1.0
        return col

    def _recompute_basics(self):
        nb = self.status != BASIC
        xs = self.v[: self.n] * nb[: self.n]
        rhs = -(self.A @ xs) + self.v[self.n:] * nb[self.n:]
        # B x_B = -(N x_N); logical columns contribute -I
        self.v[self.basis] = self.Binv @ rhs

    def _refactor(self):
        B = np.zeros((self.m, self.m))
        for k, j in enumerate(self.basis):
            B[:, k] = self.column(j)
        self.Binv = np.linalg.inv(B)
        self._recompute_basics()

    def _reduced_costs(self, cB, cost):
        y = cB @ self.Binv
        d = cost.copy()
        d[: self.n] -= self.AT @ y
        d[self.n:] += y
        return y, d

    # -- main loop --------------------------------------------------------------
    def _infeasibility(self):
        vb = self.v[self.basis]
        lo, hi = self.l[self.basis], self.u[self.basis]
        below = np.maximum(lo - vb, 0.0)
        above = np.maximum(vb - hi, 0.0)
        return below, above

    def run(self):
        bland = False
        degenerate = 0
        since_refactor = 0
        phase = 1
        while True:
            if self.iterations >= self.max_iter:
                return "iteration-limit"
            below, above = self._infeasibility()
            if phase == 1:
                infeas = below + above
                if infeas.max(initial=0.0) <= self.feas_tol:
                    phase = 2
                    degenerate, bland = 0, False
                    continue
                cB = np.where(below > self.feas_tol, -1.0,
                              np.where(above > self.feas_tol, 1.0, 0.0))
                # phase-1 costs live only on the basics
                y, d = self._reduced_costs(cB, np.zeros_like(self.cost))
            else:
                if (below + above).max(initial=0.0) > 10 * self.feas_tol:
                    phase = 1
                    continue
                y, d = self._reduced_costs(self.cost[self.basis], self.cost)
            d[self.basis] = 0.0

            q, sigma = self._price(d, bland)
            if q < 0:
                if phase == 1:
                    return "infeasible"
                return "optimal"

            alpha = self.Binv @ self.column(q)
            delta = -sigma * alpha  # change of basics per unit step
            t, r, to_upper = self._ratio(q, delta, phase, bland)
            if r == -2:
                return "unbounded"

            self.iterations += 1
            if t <= 1e-12:
                degenerate += 1
                if degenerate >= self.stall_limit:
                    bland = True
            else:
                degenerate = 0
                bland = False

            self.v[self.basis] += t * delta
            self.v[q] += sigma * t
            if r == -1:
                # entering variable moves to its opposite bound
                self.status[q] = AT_UPPER if sigma > 0 else AT_LOWER
                self.v[q] = self.u[q] if sigma > 0 else self.l[q]
                continue

            leaving = self.basis[r]
            self.status[leaving] = AT_UPPER if to_upper else AT_LOWER
            self.v[leaving] = self.u[leaving] if to_upper else self.l[leaving]
            self.basis[r] = q
            self.status[q] = BASIC
            piv = alpha[r]
            row = self.Binv[r] / piv
            self.Binv -= np.outer(alpha, row)
            self.Binv[r] = row
            since_refactor += 1
            if since_refactor >= 100:
                self._refactor()
                since_refactor = 0

    def _price(self, d, bland):
        tol = self.opt_tol
        st = self.status
        inc = ((st == AT_LOWER) | (st == FREE)) & (d < -tol) & (self.u > self.l)
        dec = ((st == AT_UPPER) | (st == FREE)) & (d > tol) & (self.u > self.l)
        elig = inc | dec
        if not elig.any():
            return -1, 0
        idx = np.flatnonzero(elig)
        if bland:
            q = int(idx[0])
        else:
            q = int(idx[np.argmax(np.abs(d[idx]))])
        return q, (1.0 if inc[q] else -1.0)

    def _ratio(self, q, delta, phase, bland):
        """Return (step, leaving position or -1 for bound flip, leaves at upper?)."""
        best_t = self.u[q] - self.l[q]
        best_r, best_upper = -1, False
        if not np.isfinite(best_t):
            best_t = np.inf
        vb = self.v[self.basis]
        lo, hi = self.l[self.basis], self.u[self.basis]
        tol = self.feas_tol
        piv = self.piv_tol

        inc = delta > piv
        dec = delta < -piv
        t = np.full(self.m, np.inf)
        upper = np.zeros(self.m, dtype=bool)
        if phase == 1:
            below = vb < lo - tol
            above = vb > hi + tol
            feas = ~(below | above)
            # feasible basics must stay feasible
            m1 = feas & inc & np.isfinite(hi)
            t[m1] = (hi[m1] - vb[m1]) / delta[m1]
            upper[m1] = True
            m2 = feas & dec & np.isfinite(lo)
            t[m2] = (lo[m2] - vb[m2]) / delta[m2]
            # infeasible basics moving toward feasibility stop at the violated bound
            m3 = below & inc
            t[m3] = (lo[m3] - vb[m3]) / delta[m3]
            m4 = above & dec
            t[m4] = (hi[m4] - vb[m4]) / delta[m4]
            upper[m4] = True
        else:
            m1 = inc & np.isfinite(hi)
            t[m1] = (hi[m1] - vb[m1]) / delta[m1]
            upper[m1] = True
            m2 = dec & np.isfinite(lo)
            t[m2] = (lo[m2] - vb[m2]) / delta[m2]
        t = np.maximum(t, 0.0)
        tmin = t.min(initial=np.inf)
        if tmin < best_t or (tmin == best_t and np.isfinite(tmin)):
            cand = np.flatnonzero(t <= tmin + 1e-12)
            if bland:
                r = int(cand[np.argmin(self.basis[cand])])
            else:
                r = int(cand[np.argmax(np.abs(delta[cand]))])
            return float(t[r]), r, bool(upper[r])
        if not np.isfinite(best_t):
            return np.inf, -2, False
        return float(best_t), best_r, best_upper


def simplex(c, A, lo, hi, lb, ub, *, feas_tol=1e-7, opt_tol=1e-9, max_iter=50_000,
            stall_limit=50) -> SimplexResult:
    """Maximize ``c.x`` over ``lo <= A x <= hi``, ``lb <= x <= ub``."""
    A = sp.csr_matrix(A, dtype=float)
    m, n = A.shape
    lb = np.asarray(lb, float)
    ub = np.asarray(ub, float)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if m == 0:
        return _no_rows(np.asarray(c, float), lb, ub)
    s = _Simplex(c, A, lo, hi, lb, ub, feas_tol, opt_tol, max_iter, stall_limit)
    status = s.run()
    if status == "optimal":
        s._refactor()
    x = s.v[:n].copy()
    y, d = s._reduced_costs(s.cost[s.basis], s.cost)
    # report multipliers for the original maximization
    return SimplexResult(status, x, float(np.dot(c, x)), -y, -d[:n], s.iterations)


def _no_rows(c, lb, ub):
    x = np.where(c > 0, ub, np.where(c < 0, lb, np.where(np.isfinite(lb), lb,
                                                          np.where(np.isfinite(ub), ub, 0.0))))
    if not np.all(np.isfinite(x)):
        return SimplexResult("unbounded", np.nan_to_num(x), np.inf, np.zeros(0), c, 0)
    return SimplexResult("optimal", x, float(c @ x), np.zeros(0), c.copy(), 0)
