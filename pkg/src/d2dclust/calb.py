"""Load-balancing clusters for DL-saturated cells (CaLB).

Run after eCORE.  In a cell whose spare DL capacity is below ``n_d_min``
it attaches users to heads with a better DL link, trading DL PRBs for UL
PRBs while the UL keeps at least ``n_u_min`` spare.  Existing clusters are
only ever enlarged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .association import AssociationState
from .config import CalbConfig
from .radio import LinkCostTable
from .resources import load_clustered, smul
from .scenario import BaseStation, UserSet


def delta_nd(i: int, j: int, k: int, table: LinkCostTable, users: UserSet) -> float:
    """Change in BS k's DL PRBs when i is served through head j (<= 0 when j has the better link)."""
    return float(smul(users.rate_dl[i], table.phi_dl[k, j] - table.phi_dl[k, i]))


def delta_nu(i: int, j: int, k: int, table: LinkCostTable, users: UserSet) -> float:
    """Change in BS k's UL-band PRBs: D2D both ways plus j forwarding i's uplink instead of i."""
    rd, a = float(users.rate_dl[i]), float(users.alpha[i])
    return float(smul(rd, table.d2d_down[j, i]
                      + smul(a, table.phi_ul[j, k] + table.d2d_up[i, j] - table.phi_ul[i, k])))


@dataclass(frozen=True)
class CalbAction:
    bs: int
    member: int
    head: int
    dnd: float
    dnu: float
    n_d: float  # spare DL PRBs before the action
    n_u: float

    @property
    def margin_ok(self) -> bool:
        """The capacity condition: the DL stays the limiting band after the move."""
        return self.dnu <= self.dnd + self.n_u - self.n_d


@dataclass
class CalbResult:
    state: AssociationState
    actions: list[CalbAction] = field(default_factory=list)


def _cell_tables(k: int, loc: np.ndarray, table: LinkCostTable, users: UserSet):
    """DL and UL-band changes for every ordered pair (i, j) of the users ``loc`` in cell k.

    Entry-wise identical to :func:`delta_nd` and :func:`delta_nu`.
    """
    rd, a = users.rate_dl[loc], users.alpha[loc]
    pd = table.phi_dl[k, loc]
    pu = table.phi_ul[loc, k]
    with np.errstate(invalid="ignore"):
        dnd = smul(rd[:, None], pd[None, :] - pd[:, None])
        inner = pu[None, :] + table.d2d_up[np.ix_(loc, loc)] - pu[:, None]
        dnu = smul(rd[:, None], table.d2d_down[np.ix_(loc, loc)].T + smul(a[:, None], inner))
    better = pd[None, :] < pd[:, None]  # j has the better DL link
    reach = np.isfinite(table.d2d_up[np.ix_(loc, loc)]) & np.isfinite(table.d2d_down[np.ix_(loc, loc)].T)
    ok = better & reach
    np.fill_diagonal(ok, False)
    return dnd, dnu, ok


def run_calb(bss: Sequence[BaseStation], users: UserSet, state: AssociationState, table: LinkCostTable,
             cfg: CalbConfig | None = None) -> CalbResult:
    cfg = cfg or CalbConfig()
    load = load_clustered(users, table, state)
    serving, head = state.serving.copy(), state.head.copy()
    is_head = np.zeros(len(users), dtype=bool)
    is_head[head[head >= 0]] = True
    actions: list[CalbAction] = []

    for k, bs in enumerate(bss):
        n_d_min = cfg.calb_dl_fraction * bs.prb_budget_dl
        n_u_min = cfg.calb_ul_fraction * bs.prb_budget_ul
        n_d = bs.prb_budget_dl - load.per_bs_dl[k]
        n_u = bs.prb_budget_ul - load.per_bs_ul[k]
        if not n_d < n_d_min:
            continue
        loc = np.flatnonzero((serving == k) & (head < 0))  # unclustered users and heads of cell k
        if len(loc) < 2:
            continue
        dnd, dnu, ok = _cell_tables(k, loc, table, users)
        # local views of the global role arrays
        l_member = np.zeros(len(loc), dtype=bool)
        l_head = is_head[loc].copy()

        def partners(i, exclude):
            # best same-cell partner of i that is still unclustered or a head
            cand = ok[i] & ~l_member & (dnd[i] < 0)
            cand[list(exclude)] = False
            if not cand.any():
                return 0.0, -1
            q = int(np.argmin(np.where(cand, dnd[i], np.inf)))  # first minimum: lowest id
            return float(dnd[i, q]), q

        free = ~l_head
        qi, qj = np.nonzero(ok & free[:, None])
        order = np.lexsort((qj, qi, dnd[qi, qj]))

        def try_attach(i, j):
            nonlocal n_d, n_u
            act = CalbAction(k, int(loc[i]), int(loc[j]), float(dnd[i, j]), float(dnu[i, j]), n_d, n_u)
            if not (act.dnd < 0 and n_u - act.dnu >= n_u_min and act.margin_ok):
                return False
            serving[loc[i]] = -1
            head[loc[i]] = loc[j]
            is_head[loc[j]] = True
            l_member[i] = True
            l_head[j] = True
            n_d -= act.dnd
            n_u -= act.dnu
            actions.append(act)
            return True

        for i, j in zip(qi[order].tolist(), qj[order].tolist()):
            if not (n_u >= n_u_min and n_d < n_d_min):
                break
            if l_member[i] or l_head[i] or l_member[j]:
                continue  # i already placed, or j became a member
            if l_head[j]:
                try_attach(i, j)
                continue
            dni, m = partners(i, (i, j))
            dnj, nn = partners(j, (i, j))
            x = dnd[i, j] - dni - dnj
            if x <= 0:
                try_attach(i, j)
            else:
                # the two alternative clusters save more DL than pairing i with j
                if m >= 0:
                    try_attach(i, m)
                if nn >= 0 and n_u >= n_u_min and n_d < n_d_min and not l_member[nn]:
                    try_attach(j, nn)
    return CalbResult(AssociationState(serving, head, state.n_bs), actions)
