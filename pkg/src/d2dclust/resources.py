"""Expected PRB loads with and without clusters, the ILP objective and cell margins.

Loads are real-valued expectations in PRBs per subframe.  Any association that
uses an unusable link (cost ``inf``) with nonzero traffic loads ``inf``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .association import AssociationState
from .radio import LinkCostTable
from .scenario import BaseStation, UserSet


@dataclass(frozen=True)
class PrbLoad:
    per_bs_dl: np.ndarray
    per_bs_ul: np.ndarray

    @property
    def total_dl(self) -> float:
        return float(self.per_bs_dl.sum())

    @property
    def total_ul(self) -> float:
        return float(self.per_bs_ul.sum())

    @property
    def total(self) -> float:
        return self.total_dl + self.total_ul


def smul(rate, phi):
    """``rate * phi`` with zero traffic costing nothing even over a dead link."""
    rate = np.asarray(rate, dtype=float)
    with np.errstate(invalid="ignore"):
        out = rate * phi
    return np.where(rate == 0, 0.0, out)


def load_unclustered(users: UserSet, table: LinkCostTable, state: AssociationState) -> PrbLoad:
    if np.any(state.head >= 0):
        raise ValueError("load_unclustered needs an association without clusters")
    n_b = table.n_bs
    idx = np.arange(len(users))
    k = state.serving
    dl = np.bincount(k, smul(users.rate_dl, table.phi_dl[k, idx]), minlength=n_b)
    ul = np.bincount(k, smul(users.rate_ul, table.phi_ul[idx, k]), minlength=n_b)
    return PrbLoad(dl.astype(float), ul.astype(float))


def user_loads(users: UserSet, table: LinkCostTable, state: AssociationState):
    """Per-user (cell, dl, ul) contributions. A member is charged at its head's cell.

    The member's DL rides the head's BS link; its UL is the head forwarding
    plus both D2D directions, all in the head's cell.
    """
    n = len(users)
    idx = np.arange(n)
    cell = state.cell()
    carrier = np.where(state.head >= 0, state.head, idx)
    rd, ru = users.rate_dl, users.rate_ul
    dl = smul(rd, table.phi_dl[cell, carrier])
    ul = smul(ru, table.phi_ul[carrier, cell])
    mem = np.flatnonzero(state.head >= 0)
    h = state.head[mem]
    ul[mem] += smul(ru[mem], table.d2d_up[mem, h]) + smul(rd[mem], table.d2d_down[h, mem])
    return cell, dl, ul


def load_clustered(users: UserSet, table: LinkCostTable, state: AssociationState) -> PrbLoad:
    cell, dl, ul = user_loads(users, table, state)
    n_b = table.n_bs
    return PrbLoad(np.bincount(cell, dl, minlength=n_b).astype(float),
                   np.bincount(cell, ul, minlength=n_b).astype(float))


def objective(state: AssociationState, table: LinkCostTable, users: UserSet) -> float:
    """Total expected PRBs evaluated term by term from the X and Y matrices.

    The head-forwarding term is charged at the head's BS, i.e. weighted by
    ``x[i, k]`` of head i.
    """
    x, y = state.x, state.y
    rd, a = users.rate_dl, users.alpha
    total = 0.0
    for i, k in zip(*np.nonzero(x)):
        total += float(smul(rd[i], table.phi_dl[k, i] + smul(a[i], table.phi_ul[i, k])))
        for j in np.flatnonzero(y[:, i]):
            if j == i:
                continue
            c = (table.phi_dl[k, i] + smul(a[j], table.phi_ul[i, k]) + table.d2d_down[i, j]
                 + smul(a[j], table.d2d_up[j, i]))
            total += float(smul(rd[j], c))
    return total


def saturation_margin(bs: BaseStation, per_bs_dl: float, per_bs_ul: float) -> tuple[float, float, float]:
    """Remaining DL / UL PRBs of one cell and the smaller of the two."""
    md = bs.prb_budget_dl - per_bs_dl
    mu = bs.prb_budget_ul - per_bs_ul
    return md, mu, min(md, mu)


def margins(bss: Sequence[BaseStation], load: PrbLoad) -> np.ndarray:
    """(B, 3) array of saturation margins for every cell."""
    return np.array([saturation_margin(b, load.per_bs_dl[k], load.per_bs_ul[k]) for k, b in enumerate(bss)])


def direct_costs(table: LinkCostTable, users: UserSet) -> np.ndarray:
    """(U, B) PRBs of serving user i directly from BS k."""
    rd, a = users.rate_dl[:, None], users.alpha[:, None]
    return smul(rd, table.phi_dl.T + smul(a, table.phi_ul))


def member_costs(table: LinkCostTable, users: UserSet) -> np.ndarray:
    """(U, U, B): PRBs of serving user i as a member of head j attached to BS k."""
    rd = users.rate_dl[:, None, None]
    a = users.alpha[:, None, None]
    n = len(users)
    head_dl = table.phi_dl.T[None, :, :]  # [., j, k]
    head_ul = table.phi_ul[None, :, :]
    d2d = table.d2d_down.T[:, :, None] + smul(a, table.d2d_up[:, :, None])
    c = smul(rd, head_dl + smul(a, head_ul) + d2d)
    c[np.arange(n), np.arange(n), :] = np.inf
    return c
