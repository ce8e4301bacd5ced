"""Self-contained MILP machinery: model container, simplex, branch-and-bound, MPS I/O."""
from .bnb import BranchAndBound, MilpSolution, brute_force, relative_gap, solve_milp
from .lp import LpSolution, solve_lp
from .model import MilpModel, ModelBuilder
from .mps import export_mps, read_mps
from .params import SolverParams
from .validate import Violation, read_solution, validate, write_solution

__all__ = [
    "BranchAndBound", "LpSolution", "MilpModel", "MilpSolution", "ModelBuilder",
    "SolverParams", "Violation", "brute_force", "export_mps", "read_mps", "read_solution",
    "relative_gap", "solve_lp", "solve_milp", "validate", "write_solution",
]
