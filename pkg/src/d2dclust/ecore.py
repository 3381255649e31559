"""Clustering gains and the two-phase greedy clustering (eCORE, and CORE via a flag).

Gains are computed once against the unclustered baseline.  Phase 1 attaches
every user whose best head has no candidates of its own; phase 2 resolves
the remaining chains, strongest gain first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .association import AssociationState
from .radio import LinkCostTable
from .resources import smul
from .scenario import UserSet


def clustering_gain(i: int, j: int, table: LinkCostTable, users: UserSet, state: AssociationState) -> float:
    """PRBs saved by serving i through head j, each at its current BS."""
    if i == j:
        return -np.inf
    k, q = int(state.serving[i]), int(state.serving[j])
    if not (np.isfinite(table.d2d_up[i, j]) and np.isfinite(table.d2d_down[j, i])):
        return -np.inf
    rd, a = float(users.rate_dl[i]), float(users.alpha[i])
    return float(smul(rd, (table.phi_dl[k, i] - table.phi_dl[q, j] - table.d2d_down[j, i])
                      + smul(a, table.phi_ul[i, k] - table.phi_ul[j, q] - table.d2d_up[i, j])))


def gain_matrix(table: LinkCostTable, users: UserSet, state: AssociationState) -> np.ndarray:
    """(U, U) gains ``G[i, j]`` with j as head; ``-inf`` out of D2D range and on the diagonal."""
    n = len(users)
    idx = np.arange(n)
    k = state.serving
    rd, a = users.rate_dl[:, None], users.alpha[:, None]
    own = smul(rd[:, 0], table.phi_dl[k, idx] + smul(a[:, 0], table.phi_ul[idx, k]))
    head_d = table.phi_dl[k, idx][None, :]
    head_u = table.phi_ul[idx, k][None, :]
    via = smul(rd, head_d + smul(a, head_u) + table.d2d_down.T + smul(a, table.d2d_up))
    with np.errstate(invalid="ignore"):
        g = own[:, None] - via
    reach = np.isfinite(table.d2d_up) & np.isfinite(table.d2d_down.T)
    g = np.where(reach, g, -np.inf)
    g[idx, idx] = -np.inf
    return g


@dataclass
class EcoreResult:
    state: AssociationState
    clusters: dict[int, list[int]]
    gains: np.ndarray
    deferred: list[int] = field(default_factory=list)  # users that went through phase 2


def run_ecore(users: UserSet, table: LinkCostTable, state: AssociationState, banned: Iterable[int] = (),
              intra_cell_only: bool = False, score_rule: bool = False,
              defer_chains: bool = True, gains: np.ndarray | None = None) -> EcoreResult:
    """Greedy clustering from the unclustered ``state``.

    ``banned`` users are never heads.  ``intra_cell_only`` keeps candidate
    heads in the user's own cell.  Phase 2 picks the head with the best
    conflict score and discards the user only if that head's gain is not
    positive; ``score_rule`` discards it whenever the score itself is not
    positive (a stricter variant).  With ``defer_chains`` a user that is itself wanted as
    a head is left to phase 2 even when its own best head is free, so the
    stronger link of a chain wins.
    """
    n = len(users)
    g = gain_matrix(table, users, state) if gains is None else gains
    ok = g > 0
    if intra_cell_only:
        ok &= state.serving[:, None] == state.serving[None, :]
    for b in banned:
        ok[:, int(b)] = False
    cand = [set(np.flatnonzero(ok[i]).tolist()) for i in range(n)]
    head_of = np.full(n, -1)
    clusters: dict[int, list[int]] = {}

    wanted = ok.sum(axis=0)  # users that still list each user as a candidate head
    wanted_by = [np.flatnonzero(ok[:, j]).tolist() for j in range(n)]

    def attach(i, j):
        clusters.setdefault(j, []).append(i)
        head_of[i] = j
        for x in cand[i]:
            wanted[x] -= 1
        cand[i] = set()
        for x in wanted_by[i]:  # members are never heads
            cand[x].discard(i)

    def best(i, pool):
        # argmax with ties to the lowest id
        return max(sorted(pool), key=lambda j: g[i, j])

    pending: list[int] = []
    g_max = np.zeros(n)
    for i in range(n):
        if not cand[i]:
            continue
        j = best(i, cand[i])
        g_max[i] = g[i, j]
        # i is also the middle of a chain when another undecided user wants it as head
        chained = defer_chains and wanted[i] > 0
        if not cand[j] and not chained:
            attach(i, j)
        else:
            pending.append(i)

    deferred = list(pending)
    pending.sort(key=lambda i: (-g_max[i], i))
    while pending:
        i = pending[0]
        in_a = set(pending)
        pool = [j for j in sorted(cand[i]) if head_of[j] < 0]
        if not pool:
            cand[i] = set()
            pending.remove(i)
            continue

        def free(x):
            return not cand[x] or x in in_a

        scores = []
        for j in pool:
            alt_j = [g[j, m] for m in cand[j] if free(m) and m != i]
            alt_i = [g[i, t] for t in pool if t != j and free(t)]
            scores.append(g[i, j] - max(alt_j, default=0.0) - max(alt_i, default=0.0))
        pick = int(np.argmax(scores))
        j = pool[pick]
        if (scores[pick] <= 0) if score_rule else (g[i, j] <= 0):
            cand[i] = set()
            pending.remove(i)
            continue
        is_head = j in clusters
        attach(i, j)
        pending.remove(i)
        if not is_head:
            cand[j] = set()
            if j in pending:
                pending.remove(j)

    for h in clusters:
        clusters[h].sort()
    return EcoreResult(state.with_clusters(clusters), dict(sorted(clusters.items())), g, deferred)
