"""Interchangeable perturbation solvers.

``brute`` and ``sa`` work on QUBOs; ``sphere`` and ``fse`` search the lattice
directly; ``zf`` is the unperturbed baseline.
"""

from .anneal import ANNEAL_TIME_SWEEPS, anneal_spins, solve_sa, sweeps_for_anneal_time
from .brute import MAX_BRUTE_VARS, brute_force_argmin, solve_brute_force
from .lattice import full_enumeration_nodes, solve_fse, solve_sphere_encoder
from .result import SolverRequest, SolverResult, select_with_fallback

SOLVER_NAMES = ("brute", "sa", "sphere", "fse", "zf")

__all__ = [
    "ANNEAL_TIME_SWEEPS",
    "SOLVER_NAMES",
    "MAX_BRUTE_VARS",
    "SolverRequest",
    "SolverResult",
    "anneal_spins",
    "brute_force_argmin",
    "full_enumeration_nodes",
    "select_with_fallback",
    "solve_brute_force",
    "solve_fse",
    "solve_sa",
    "solve_sphere_encoder",
    "sweeps_for_anneal_time",
]
