"""Exact desk-scale MILP solving, LP-file export and solution import."""

from .bnb import HIGHS, SIMPLEX, SolverConfig, SolveStats, solve
from .lpfile import export_lp, import_solution, lp_names, write_solution
from .simplex import LpRelaxation, LpResult, lp_relax_solve, vertex_enumeration

__all__ = ["HIGHS", "SIMPLEX", "SolverConfig", "SolveStats", "solve", "export_lp", "import_solution",
           "lp_names", "write_solution", "LpRelaxation", "LpResult", "lp_relax_solve",
           "vertex_enumeration"]
