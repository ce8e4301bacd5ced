"""Solver-agnostic mixed-integer linear program container.

Models are always maximizations. Rows are stored in CSR form together with a
relation letter (``"L"`` for <=, ``"G"`` for >=, ``"E"`` for =), a right-hand
side and an optional MPS-style range, which turns an inequality into a
two-sided row.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

SENSES = ("L", "G", "E")


@dataclass(frozen=True)
class MilpModel:
    """Immutable MILP: ``max c.x  s.t.  row_lo <= A x <= row_hi,  lb <= x <= ub``."""

    names: tuple
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    obj: np.ndarray
    A: sp.csr_matrix
    row_names: tuple
    sense: np.ndarray
    rhs: np.ndarray
    ranges: np.ndarray
    obj_offset: float = 0.0
    priority: np.ndarray | None = None

    def __post_init__(self):
        n, m = len(self.names), len(self.row_names)
        if self.A.shape != (m, n):
            raise ValueError(f"matrix shape {self.A.shape} != ({m}, {n})")
        for arr in (self.lb, self.ub, self.integer, self.obj):
            if len(arr) != n:
                raise ValueError("variable arrays must have one entry per column")
        if np.any(self.lb > self.ub):
            bad = int(np.flatnonzero(self.lb > self.ub)[0])
            raise ValueError(f"variable {self.names[bad]} has lb > ub")
        if np.any(self.integer & ~(np.isfinite(self.lb) & np.isfinite(self.ub))):
            raise ValueError("integer variables must have finite bounds")
        if len(set(self.names)) != n or len(set(self.row_names)) != m:
            raise ValueError("variable and row names must be unique")
        if m and np.any(np.diff(self.A.indptr) == 0):
            bad = int(np.flatnonzero(np.diff(self.A.indptr) == 0)[0])
            raise ValueError(f"row {self.row_names[bad]} is empty")
        for arr in (self.lb, self.ub, self.obj, self.rhs, self.ranges):
            arr.setflags(write=False)

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_rows(self) -> int:
        return len(self.row_names)

    @property
    def num_integer(self) -> int:
        return int(self.integer.sum())

    def row_bounds(self):
        """Return ``(lo, hi)`` activity bounds for every row."""
        lo = np.full(self.num_rows, -np.inf)
        hi = np.full(self.num_rows, np.inf)
        s, b, r = self.sense, self.rhs, self.ranges
        has_r = ~np.isnan(r)
        L, G, E = s == "L", s == "G", s == "E"
        hi[L] = b[L]
        lo[L & has_r] = b[L & has_r] - np.abs(r[L & has_r])
        lo[G] = b[G]
        hi[G & has_r] = b[G & has_r] + np.abs(r[G & has_r])
        lo[E] = b[E]
        hi[E] = b[E]
        pos = E & has_r & (r >= 0)
        neg = E & has_r & (r < 0)
        hi[pos] = b[pos] + r[pos]
        lo[neg] = b[neg] + r[neg]
        return lo, hi

    def objective(self, x) -> float:
        return float(self.obj @ np.asarray(x, dtype=float)) + self.obj_offset

    def var_index(self, name: str) -> int:
        return self.names.index(name)

    def with_bounds(self, lb=None, ub=None) -> "MilpModel":
        return _replace(self, lb=self.lb if lb is None else np.asarray(lb, float).copy(),
                        ub=self.ub if ub is None else np.asarray(ub, float).copy())

    def relaxed(self) -> "MilpModel":
        return _replace(self, integer=np.zeros(self.num_vars, dtype=bool))

    def extend(self) -> "ModelBuilder":
        """Start a builder pre-loaded with this model, for adding rows/columns."""
        return ModelBuilder.from_model(self)


def _replace(model: MilpModel, **kw) -> MilpModel:
    fields = dict(names=model.names, lb=model.lb, ub=model.ub, integer=model.integer,
                  obj=model.obj, A=model.A, row_names=model.row_names, sense=model.sense,
                  rhs=model.rhs, ranges=model.ranges, obj_offset=model.obj_offset,
                  priority=model.priority)
    fields.update(kw)
    return MilpModel(**fields)


@dataclass
class ModelBuilder:
    """Incremental construction of a :class:`MilpModel`."""

    names: list = field(default_factory=list)
    lb: list = field(default_factory=list)
    ub: list = field(default_factory=list)
    integer: list = field(default_factory=list)
    obj: list = field(default_factory=list)
    priority: list = field(default_factory=list)
    row_names: list = field(default_factory=list)
    sense: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    ranges: list = field(default_factory=list)
    _rows: list = field(default_factory=list)
    _cols: list = field(default_factory=list)
    _vals: list = field(default_factory=list)
    obj_offset: float = 0.0

    @classmethod
    def from_model(cls, m: MilpModel) -> "ModelBuilder":
        b = cls()
        b.names = list(m.names)
        b.lb = list(m.lb)
        b.ub = list(m.ub)
        b.integer = list(m.integer)
        b.obj = list(m.obj)
        b.priority = list(m.priority) if m.priority is not None else [0] * m.num_vars
        b.row_names = list(m.row_names)
        b.sense = list(m.sense)
        b.rhs = list(m.rhs)
        b.ranges = list(m.ranges)
        coo = m.A.tocoo()
        b._rows = [coo.row.astype(np.int64)]
        b._cols = [coo.col.astype(np.int64)]
        b._vals = [coo.data.astype(float)]
        b.obj_offset = m.obj_offset
        return b

    def add_var(self, name, lb=0.0, ub=np.inf, integer=False, obj=0.0, priority=0) -> int:
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.integer.append(bool(integer))
        self.obj.append(float(obj))
        self.priority.append(int(priority))
        return len(self.names) - 1

    def add_binary(self, name, obj=0.0, priority=0) -> int:
        return self.add_var(name, 0.0, 1.0, True, obj, priority)

    def add_row(self, name, cols, vals, sense, rhs, rng=np.nan) -> int:
        if sense not in SENSES:
            raise ValueError(f"unknown relation {sense!r}")
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        i = len(self.row_names)
        self.row_names.append(name)
        self.sense.append(sense)
        self.rhs.append(float(rhs))
        self.ranges.append(float(rng))
        self._rows.append(np.full(len(cols), i, dtype=np.int64))
        self._cols.append(cols)
        self._vals.append(vals)
        return i

    def build(self) -> MilpModel:
        n, m = len(self.names), len(self.row_names)
        if self._rows:
            r = np.concatenate(self._rows)
            c = np.concatenate(self._cols)
            v = np.concatenate(self._vals)
        else:
            r = c = np.zeros(0, dtype=np.int64)
            v = np.zeros(0)
        A = sp.coo_matrix((v, (r, c)), shape=(m, n)).tocsr()
        A.sum_duplicates()
        A.eliminate_zeros()
        return MilpModel(
            names=tuple(self.names),
            lb=np.array(self.lb, dtype=float),
            ub=np.array(self.ub, dtype=float),
            integer=np.array(self.integer, dtype=bool),
            obj=np.array(self.obj, dtype=float),
            A=A,
            row_names=tuple(self.row_names),
            sense=np.array(self.sense, dtype="<U1"),
            rhs=np.array(self.rhs, dtype=float),
            ranges=np.array(self.ranges, dtype=float),
            obj_offset=self.obj_offset,
            priority=np.array(self.priority, dtype=np.int64),
        )
