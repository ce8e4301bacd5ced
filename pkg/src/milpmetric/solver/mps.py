"""Fixed-format MPS export and import.

Names are mangled to 8-character identifiers (``C0000012``, ``R0000345``) and
the original names are written to a JSON map next to the MPS file. Numbers
are written with full ``repr`` precision after the fixed name columns, so the
reader splits records on whitespace rather than on column positions.

MPS minimizes, so the stored maximization is written with a negated
objective (noted in a ``* OBJSENSE MAX`` comment) and negated back on read.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .model import MilpModel

_SENSE_TO_MPS = {"L": "L", "G": "G", "E": "E"}
_MARK = "    MARKER                 'MARKER'                 '{}'\n"


def _col(j):
    return f"C{j:07d}"


def _row(i):
    return f"R{i:07d}"


def _num(v):
    return repr(float(v))


def map_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".map.json")


def export_mps(model: MilpModel, path, name: str = "MILPMET") -> Path:
    """Write ``model`` to ``path``; returns the path of the name-map file."""
    path = Path(path)
    lines = [
        "* written by milpmetric\n",
        "* OBJSENSE MAX: objective coefficients negated because MPS minimizes\n",
        f"NAME          {name[:8]}\n",
        "ROWS\n",
        " N  OBJ\n",
    ]
    for i, s in enumerate(model.sense):
        lines.append(f" {_SENSE_TO_MPS[s]}  {_row(i)}\n")
    lines.append("COLUMNS\n")
    csc = sp.csc_matrix(model.A)
    in_int = False
    for j in range(model.num_vars):
        if model.integer[j] and not in_int:
            lines.append(_MARK.format("INTORG"))
            in_int = True
        elif not model.integer[j] and in_int:
            lines.append(_MARK.format("INTEND"))
            in_int = False
        entries = []
        if model.obj[j] != 0 or csc.indptr[j] == csc.indptr[j + 1]:
            entries.append(("OBJ", -model.obj[j]))
        for k in range(csc.indptr[j], csc.indptr[j + 1]):
            entries.append((_row(csc.indices[k]), csc.data[k]))
        for rname, v in entries:
            lines.append(f"    {_col(j):<8}  {rname:<8}  {_num(v)}\n")
    if in_int:
        lines.append(_MARK.format("INTEND"))

    lines.append("RHS\n")
    if model.obj_offset != 0:
        # objective-row RHS holds minus the constant of the minimized objective
        lines.append(f"    RHS       {'OBJ':<8}  {_num(model.obj_offset)}\n")
    for i, b in enumerate(model.rhs):
        if b != 0:
            lines.append(f"    RHS       {_row(i):<8}  {_num(b)}\n")

    rng = np.flatnonzero(~np.isnan(model.ranges))
    if rng.size:
        lines.append("RANGES\n")
        for i in rng:
            lines.append(f"    RNG       {_row(i):<8}  {_num(model.ranges[i])}\n")

    lines.append("BOUNDS\n")
    for j in range(model.num_vars):
        lb, ub, c = model.lb[j], model.ub[j], _col(j)
        if model.integer[j] and lb == 0 and ub == 1:
            lines.append(f" BV BND       {c:<8}\n")
            continue
        if lb == ub:
            lines.append(f" FX BND       {c:<8}  {_num(lb)}\n")
            continue
        if np.isneginf(lb) and np.isposinf(ub):
            lines.append(f" FR BND       {c:<8}\n")
            continue
        if np.isneginf(lb):
            lines.append(f" MI BND       {c:<8}\n")
        elif lb != 0 or model.integer[j]:
            kind = "LI" if model.integer[j] else "LO"
            lines.append(f" {kind} BND       {c:<8}  {_num(lb)}\n")
        if np.isfinite(ub):
            kind = "UI" if model.integer[j] else "UP"
            lines.append(f" {kind} BND       {c:<8}  {_num(ub)}\n")
        else:
            lines.append(f" PL BND       {c:<8}\n")
    lines.append("ENDATA\n")
    path.write_text("".join(lines))

    mp = map_path(path)
    mp.write_text(json.dumps({
        "sense": "max",
        "columns": {_col(j): n for j, n in enumerate(model.names)},
        "rows": {_row(i): n for i, n in enumerate(model.row_names)},
        "priority": [int(p) for p in model.priority] if model.priority is not None else None,
    }, indent=1))
    return mp


def read_mps(path, names_map=None) -> MilpModel:
    """Parse an MPS file written by :func:`export_mps` (or any fixed/free MPS without
    OBJSENSE sections). The JSON name map is picked up automatically when present."""
    path = Path(path)
    if names_map is None and map_path(path).exists():
        names_map = json.loads(map_path(path).read_text())
    text = path.read_text().splitlines()

    rows, row_sense, obj_row = [], {}, None
    cols, col_index = [], {}
    integer = {}
    entries = []
    obj = {}
    rhs, ranges, offset = {}, {}, 0.0
    bounds = []
    section = None
    in_int = False
    for lineno, raw in enumerate(text, 1):
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            section = raw.split()[0]
            continue
        f = raw.split()
        if section == "ROWS":
            kind, rname = f
            if kind == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            row_sense[rname] = kind
            rows.append(rname)
        elif section == "COLUMNS":
            if len(f) >= 3 and f[1] == "'MARKER'":
                in_int = f[2] == "'INTORG'"
                continue
            cname = f[0]
            if cname not in col_index:
                col_index[cname] = len(cols)
                cols.append(cname)
                integer[cname] = in_int
            for rname, v in zip(f[1::2], f[2::2]):
                if rname == obj_row:
                    obj[cname] = float(v)
                else:
                    entries.append((rname, cname, float(v)))
        elif section == "RHS":
            for rname, v in zip(f[1::2], f[2::2]):
                if rname == obj_row:
                    offset = float(v)
                else:
                    rhs[rname] = float(v)
        elif section == "RANGES":
            for rname, v in zip(f[1::2], f[2::2]):
                ranges[rname] = float(v)
        elif section == "BOUNDS":
            bounds.append((f[0], f[2], float(f[3]) if len(f) > 3 else None, lineno))
        else:
            raise ValueError(f"{path}:{lineno}: unexpected record in section {section}")

    n, m = len(cols), len(rows)
    ridx = {r: i for i, r in enumerate(rows)}
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    is_int = np.array([integer[c] for c in cols], dtype=bool)
    for kind, cname, v, lineno in bounds:
        j = col_index[cname]
        if kind in ("UP", "UI"):
            ub[j] = v
            if kind == "UI":
                is_int[j] = True
        elif kind in ("LO", "LI"):
            lb[j] = v
            if kind == "LI":
                is_int[j] = True
        elif kind == "FX":
            lb[j] = ub[j] = v
        elif kind == "FR":
            lb[j], ub[j] = -np.inf, np.inf
        elif kind == "MI":
            lb[j] = -np.inf
        elif kind == "PL":
            ub[j] = np.inf
        elif kind == "BV":
            lb[j], ub[j], is_int[j] = 0.0, 1.0, True
        else:
            raise ValueError(f"{path}:{lineno}: unsupported bound type {kind}")

    r_i = [ridx[r] for r, _, _ in entries]
    c_i = [col_index[c] for _, c, _ in entries]
    vals = [v for _, _, v in entries]
    A = sp.coo_matrix((vals, (r_i, c_i)), shape=(m, n)).tocsr()
    # the file holds a minimization; store the equivalent maximization
    c = -np.array([obj.get(cn, 0.0) for cn in cols])
    names = tuple(cols)
    row_names = tuple(rows)
    priority = None
    if names_map:
        names = tuple(names_map["columns"].get(cn, cn) for cn in cols)
        row_names = tuple(names_map["rows"].get(r, r) for r in rows)
        if names_map.get("priority") is not None:
            priority = np.array(names_map["priority"], dtype=np.int64)
    c = c + 0.0  # normalize -0.0 entries
    return MilpModel(
        names=names, lb=lb, ub=ub, integer=is_int, obj=c, A=A, row_names=row_names,
        sense=np.array([row_sense[r] for r in rows], dtype="<U1"),
        rhs=np.array([rhs.get(r, 0.0) for r in rows]),
        ranges=np.array([ranges.get(r, np.nan) for r in rows]),
        obj_offset=offset, priority=priority,
    )
