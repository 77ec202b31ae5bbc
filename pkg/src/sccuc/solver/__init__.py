"""Built-in LP/MILP solver and MPS exchange."""

from .bnb import LogLine, SolveOptions, SolveResult, solve_lp, solve_milp
from .mps import read_mps, write_mps

__all__ = ["LogLine", "SolveOptions", "SolveResult", "solve_lp", "solve_milp", "read_mps", "write_mps"]
