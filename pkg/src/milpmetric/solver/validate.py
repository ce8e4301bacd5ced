from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import MilpModel


@dataclass(frozen=True)
class Violation:
    kind: str  # row | bound | integrality
    name: str
    magnitude: float


def validate(model: MilpModel, values, tol: float = 1e-6) -> list[Violation]:
    """List every row, bound and integrality violation larger than ``tol``.

    An empty list means the assignment is feasible within ``tol``.
    """
    x = np.asarray(values, dtype=float)
    if x.shape != (model.num_vars,):
        raise ValueError(f"expected {model.num_vars} values, got {x.shape}")
    out = []
    lo, hi = model.row_bounds()
    act = model.A @ x
    viol = np.maximum(lo - act, act - hi)
    for i in np.flatnonzero(viol > tol):
        out.append(Violation("row", model.row_names[i], float(viol[i])))
    bviol = np.maximum(model.lb - x, x - model.ub)
    for j in np.flatnonzero(bviol > tol):
        out.append(Violation("bound", model.names[j], float(bviol[j])))
    ints = np.flatnonzero(model.integer)
    iviol = np.abs(x[ints] - np.round(x[ints]))
    for j, v in zip(ints[iviol > tol], iviol[iviol > tol]):
        out.append(Violation("integrality", model.names[j], float(v)))
    return out


def write_solution(model: MilpModel, values, path) -> None:
    """Write a plain-text ``name value`` solution file."""
    with open(path, "w") as f:
        for name, v in zip(model.names, np.asarray(values, float)):
            f.write(f"{name} {float(v)!r}\n")


def read_solution(model: MilpModel, path) -> np.ndarray:
    """Read a ``name value`` file into a vector ordered like ``model``; missing names are 0."""
    index = {n: j for j, n in enumerate(model.names)}
    x = np.zeros(model.num_vars)
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith(("#", "*")):
            continue
        parts = line.rsplit(None, 1)
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'name value'")
        if parts[0] not in index:
            raise ValueError(f"{path}:{lineno}: unknown variable {parts[0]!r}")
        x[index[parts[0]]] = float(parts[1])
    return x
