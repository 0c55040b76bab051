"""Exact sparse-correction MILP: assembly, branch-and-bound solver, LP export."""
from .bb import MilpSolution, MilpSolverError, solve
from .lpformat import ParsedLp, export_lp, parse_lp
from .problem import Hyperparams, MilpProblem, assemble
from .simplex import HAS_NUMBA, LpResult, active_backend, get_kernels, solve_lp

__all__ = [
    "Hyperparams",
    "MilpProblem",
    "MilpSolution",
    "MilpSolverError",
    "assemble",
    "solve",
    "export_lp",
    "parse_lp",
    "ParsedLp",
    "LpResult",
    "solve_lp",
    "active_backend",
    "get_kernels",
    "HAS_NUMBA",
]
