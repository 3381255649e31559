"""Exact minimisation of the total PRB objective over all valid (X, Y).

Small instances are enumerated exhaustively; larger ones go through a
depth-first branch-and-bound (see ``_kernels_py.branch_and_bound`` for the
bound and why it's admissible).  The energy-constrained variant prunes any
head whose expected power would exceed ``(1 + w)`` times its unclustered power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .association import AssociationState
from .config import PowerModel
from .radio import LinkCostTable
from .resources import direct_costs, member_costs, objective
from .scenario import BaseStation, UserSet


class SolverLimitError(RuntimeError):
    """The instance is larger than the configured solver limits."""


@dataclass(frozen=True)
class SolveLimits:
    max_users: int = 25
    exhaustive_max_users: int = 12
    exhaustive_below: int = 9  # auto mode enumerates below this size
    exhaustive_max_states: float = 5e6
    node_budget: int = 2_000_000
    method: str = "auto"  # auto | exhaustive | bnb
    free_association: bool = True


@dataclass(frozen=True)
class SolveReport:
    best_assoc: AssociationState
    best_objective: float
    nodes_explored: int
    proven_optimal: bool
    method: str
    backend: str = kernels.BACKEND


def _states(n_heads_max: int, n_bs: int) -> float:
    # head-set x head-BS combinations visited by the enumeration
    return float((n_bs + 1) ** n_heads_max)


def cost_arrays(table: LinkCostTable, users: UserSet, free_association: bool = True):
    direct = direct_costs(table, users)
    member = member_costs(table, users)
    if not free_association:
        # users keep their baseline cell; so do heads
        keep = np.zeros_like(direct, dtype=bool)
        keep[np.arange(len(users)), table.serving] = True
        direct = np.where(keep, direct, np.inf)
    return np.ascontiguousarray(direct), np.ascontiguousarray(member)


def _run(users: UserSet, bss: Sequence[BaseStation], table: LinkCostTable, limits: SolveLimits,
         banned: Iterable[int], energy) -> SolveReport:
    n = len(users)
    if n > limits.max_users:
        raise SolverLimitError(f"{n} users exceed the solver limit of {limits.max_users}")
    if limits.method not in ("auto", "exhaustive", "bnb"):
        raise ValueError(f"unknown solve method {limits.method!r}")
    head_ok = np.ones(n, dtype=bool)
    for b in banned:
        head_ok[int(b)] = False
    direct, member = cost_arrays(table, users, limits.free_association)
    method = limits.method
    if energy is not None:
        if method == "exhaustive":
            raise SolverLimitError("exhaustive mode does not support the energy constraint")
        method = "bnb"
    else:
        fits = (n <= limits.exhaustive_max_users
                and _states(int(head_ok.sum()), len(bss)) <= limits.exhaustive_max_states)
        if method == "exhaustive" and not fits:
            raise SolverLimitError(f"{n} users over {len(bss)} BSs exceed the exhaustive limits "
                                   f"({limits.exhaustive_max_users} users)")
        if method == "auto":
            method = "exhaustive" if fits and n < limits.exhaustive_below else "bnb"
    if method == "exhaustive":
        serving, head, _, nodes = kernels.exhaustive(direct, member, head_ok)
        proven = True
    else:
        serving, head, _, nodes, proven = kernels.branch_and_bound(direct, member, head_ok, energy,
                                                                   limits.node_budget)
    state = AssociationState(serving, head, len(bss))
    return SolveReport(state, objective(state, table, users), int(nodes), bool(proven), method)


def solve_exact(users: UserSet, bss: Sequence[BaseStation], table: LinkCostTable,
                limits: SolveLimits | None = None, banned: Iterable[int] = ()) -> SolveReport:
    """Minimum-PRB association. Ties go to fewer clusters, then the smallest Y."""
    return _run(users, bss, table, limits or SolveLimits(), banned, None)


def solve_energy_constrained(users: UserSet, bss: Sequence[BaseStation], table: LinkCostTable,
                             model: PowerModel, w: float, limits: SolveLimits | None = None,
                             banned: Iterable[int] = ()) -> SolveReport:
    """As :func:`solve_exact`, keeping every head within ``(1 + w)`` of its unclustered power."""
    from .energy import head_budget_arrays

    if not w >= 0:
        raise ValueError("w must be >= 0")
    if math.isinf(w):
        return _run(users, bss, table, limits or SolveLimits(), banned, None)
    energy = head_budget_arrays(table, users, model, w)
    return _run(users, bss, table, limits or SolveLimits(), banned, energy)
