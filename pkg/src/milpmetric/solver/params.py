from __future__ import annotations

from dataclasses import asdict, dataclass

BRANCHING_RULES = ("most-fractional", "pseudo-cost")
NODE_ORDERS = ("best-bound", "depth-first")
LP_METHODS = ("auto", "simplex", "highs")


@dataclass(frozen=True)
class SolverParams:
    """Tolerances and limits for the LP and branch-and-bound routines.

    ``deterministic`` makes every run reproducible: the wall-clock limit is
    ignored (only ``node_limit`` stops the search) and a single thread is used.
    ``lp_method="auto"`` picks the in-tree simplex for small relaxations and
    HiGHS for the rest.
    """

    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    rel_gap_tol: float = 1e-6
    node_limit: int = 100_000
    time_limit: float | None = None
    branching: str = "most-fractional"
    node_order: str = "best-bound"
    deterministic: bool = True
    threads: int = 1
    lp_method: str = "auto"
    simplex_max_rows: int = 600
    lp_iteration_limit: int = 100_000
    heuristic_every: int = 10
    polish_rounds: int = 20

    def __post_init__(self):
        for name in ("feas_tol", "int_tol", "rel_gap_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.branching not in BRANCHING_RULES:
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.node_order not in NODE_ORDERS:
            raise ValueError(f"unknown node order {self.node_order!r}")
        if self.lp_method not in LP_METHODS:
            raise ValueError(f"unknown LP method {self.lp_method!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.deterministic and self.threads != 1:
            raise ValueError("deterministic mode requires threads == 1")
        if self.node_limit < 1:
            raise ValueError("node_limit must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)
