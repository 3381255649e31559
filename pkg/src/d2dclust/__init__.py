"""D2D clustering in FDD cellular networks: PRB accounting, exact and greedy
clustering, load balancing, an energy ledger and a system-level simulator."""

from .association import AssociationState, associate_rsrp
from .calb import run_calb
from .config import ConfigError, SimConfig, load_config
from .ecore import gain_matrix, run_ecore
from .kernels import BACKEND
from .optimal import SolveLimits, SolverLimitError, solve_energy_constrained, solve_exact
from .radio import LinkCostTable, build_cost_table
from .resources import load_clustered, load_unclustered, objective
from .scenario import BaseStation, UserSet, deploy

__version__ = "0.1.0"

__all__ = [
    "AssociationState", "BACKEND", "BaseStation", "ConfigError", "LinkCostTable", "SimConfig",
    "SolveLimits", "SolverLimitError", "UserSet", "associate_rsrp", "build_cost_table", "deploy",
    "gain_matrix", "load_clustered", "load_config", "load_unclustered", "objective", "run_calb",
    "run_ecore", "solve_energy_constrained", "solve_exact",
]
