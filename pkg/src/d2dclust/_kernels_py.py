"""Pure-Python kernels; reference implementation of the compiled core.

All kernels take plain numpy arrays so both backends share one signature:

* ``direct[i, k]``     PRBs of user i served directly by BS k (``inf`` if unusable)
* ``member[i, j, k]``  PRBs of user i served through head j attached to BS k
* ``head_ok[j]``       whether j may act as a cluster head
* ``energy``           optional head power-budget arrays (see :func:`head_feasible`)
"""

from __future__ import annotations

import itertools
import math

import numpy as np

TIE_RTOL = 1e-12
BACKEND = "python"


def _close(a: float, b: float) -> bool:
    if a == b:
        return True
    if not (math.isfinite(a) and math.isfinite(b)):
        return False
    return abs(a - b) <= TIE_RTOL * max(abs(a), abs(b))


def tie_key(serving, head):
    """Fewer clusters first, then lexicographically smallest Y, then X."""
    n = len(head)
    n_clusters = len({int(h) for h in head if h >= 0})
    ykey = tuple(0 if h < 0 else n - int(h) for h in head)
    return (n_clusters, ykey, tuple(int(s) for s in serving))


def _better(cost, serving, head, best_cost, best_serving, best_head) -> bool:
    if best_serving is None:
        return True
    if _close(cost, best_cost):
        return tie_key(serving, head) < tie_key(best_serving, best_head)
    return cost < best_cost


def baseline_state(direct):
    n = direct.shape[0]
    serving = np.argmin(direct, axis=1) if n else np.empty(0, dtype=np.int64)
    cost = 0.0
    for i in range(n):
        cost += float(direct[i, serving[i]])
    return serving.astype(np.int64), np.full(n, -1, dtype=np.int64), cost


def exhaustive(direct, member, head_ok):
    """Enumerate every head set and head-BS choice; members pick their best option.

    For a fixed set of heads with fixed BSs the remaining users decouple, so
    each takes its cheapest option (direct, or via one of the heads).
    """
    direct = np.asarray(direct, dtype=float)
    member = np.asarray(member, dtype=float)
    n, n_b = direct.shape
    d_arg = np.argmin(direct, axis=1) if n else np.empty(0, dtype=int)
    d_min = direct[np.arange(n), d_arg] if n else np.empty(0)
    best = baseline_state(direct)
    best_cost, best_s, best_h = best[2], best[0], best[1]
    nodes = 1
    eligible = [j for j in range(n) if head_ok[j]]
    for r in range(1, len(eligible) + 1):
        for heads in itertools.combinations(eligible, r):
            heads = list(heads)
            others = [i for i in range(n) if i not in heads]
            if not others:
                continue
            combos = np.array(list(itertools.product(range(n_b), repeat=r)), dtype=np.int64)
            nodes += len(combos)
            oth = np.array(others)
            # (C, |others|, r) member costs through each head at its chosen BS
            mc = member[oth[None, :, None], np.array(heads)[None, None, :], combos[:, None, :]]
            mmin = mc.min(axis=2)
            choice = np.minimum(mmin, d_min[oth][None, :])
            # summed term by term so both backends round identically
            total = np.zeros(len(combos))
            for t, hj in enumerate(heads):
                total += direct[hj, combos[:, t]]
            for a in range(len(others)):
                total += choice[:, a]
            lo = total.min()
            if not (lo < best_cost or _close(lo, best_cost)):
                continue
            for c in np.flatnonzero([_close(t, lo) or t < lo for t in total]):
                serving = np.full(n, -1, dtype=np.int64)
                head = np.full(n, -1, dtype=np.int64)
                for hj, kj in zip(heads, combos[c]):
                    serving[hj] = kj
                for a, i in enumerate(others):
                    # ties: direct first, then the highest-id head
                    row = mc[c, a]
                    m = mmin[c, a]
                    if d_min[i] <= m or _close(d_min[i], m):
                        serving[i] = d_arg[i]
                    else:
                        picks = [t for t in range(r) if _close(row[t], m)]
                        head[i] = heads[max(picks)]
                # a head nobody joined is just a direct user
                cost = float(total[c])
                if _better(cost, serving, head, best_cost, best_s, best_h):
                    best_cost, best_s, best_h = cost, serving, head
    return best_s, best_h, best_cost, nodes


def head_feasible(energy, h, k, sums) -> bool:
    """Power check for head h at BS k given member sums ``(sa, sb, st)``.

    ``energy = (hd0, hu0, tx0, lim, a, b, t, dp)``: the head's own DL and
    UL connected-time shares, its own transmit power, the power limit and
    the per-member increments of those three quantities.  Feasible when
    ``dp * min(1, max(hd0 + sa, hu0 + sb)) + tx0 + st <= lim``.
    """
    hd0, hu0, tx0, lim, _, _, _, dp = energy
    sa, sb, st = sums
    theta = min(1.0, max(hd0[h, k] + sa, hu0[h, k] + sb))
    return dp * theta + tx0[h, k] + st <= lim[h, k]


class _Search:
    def __init__(self, direct, member, head_ok, energy, node_budget):
        self.direct = np.asarray(direct, dtype=float)
        self.member = np.asarray(member, dtype=float)
        self.n, self.nb = self.direct.shape
        self.head_ok = np.asarray(head_ok, dtype=bool)
        self.energy = energy
        self.budget = node_budget
        n, nb = self.n, self.nb
        self.serving = np.full(n, -1, dtype=np.int64)
        self.head = np.full(n, -1, dtype=np.int64)
        self.decided = np.zeros(n, dtype=bool)
        self.npend = np.zeros(n, dtype=np.int64)
        self.nmem = np.zeros(n, dtype=np.int64)
        self.psum = np.zeros((n, nb))  # member costs pending on an undecided head
        self.esum = np.zeros((3, n, nb))  # energy increments of every member of a head
        d_min = self.direct.min(axis=1) if n else np.empty(0)
        m = self.member.copy()
        m[:, ~self.head_ok, :] = np.inf
        m_min = m.min(axis=(1, 2)) if n > 1 else np.full(n, np.inf)
        self.lb0 = np.minimum(d_min, m_min)
        self.lb = self.lb0.copy()
        self.lb_total = 0.0
        for v in self.lb.tolist():
            self.lb_total += v
        # most expensive users first: their choice moves the objective most
        self.order = sorted(range(n), key=lambda i: (-_finite(self.lb0[i]), i))
        s, h, c = baseline_state(self.direct)
        self.best = (c, s, h)
        self.nodes = 0
        self.aborted = False

    def feasible(self, h, k, extra=None) -> bool:
        if self.energy is None:
            return True
        sa, sb, st = self.esum[:, h, k]
        if extra is not None:
            _, _, _, _, a, b, t, _ = self.energy
            sa, sb, st = sa + a[extra, h, k], sb + b[extra, h, k], st + t[extra, h, k]
        return head_feasible(self.energy, h, k, (sa, sb, st))

    def pending_lb(self, v) -> float:
        best = math.inf
        for k in range(self.nb):
            c = self.direct[v, k] + self.psum[v, k]
            if c < best and self.feasible(v, k):
                best = c
        return best

    def add_member(self, i, h, pending):
        """Attach i to h; returns what :meth:`remove_member` needs to undo it exactly."""
        saved = (self.psum[h].copy(), self.esum[:, h].copy())
        self.head[i] = h
        self.nmem[h] += 1
        if self.energy is not None:
            _, _, _, _, a, b, t, _ = self.energy
            self.esum[0, h] += a[i, h]
            self.esum[1, h] += b[i, h]
            self.esum[2, h] += t[i, h]
        if pending:
            self.npend[h] += 1
            self.psum[h] += self.member[i, h]
        return saved

    def remove_member(self, i, h, pending, saved):
        self.head[i] = -1
        self.nmem[h] -= 1
        if pending:
            self.npend[h] -= 1
        self.psum[h], self.esum[:, h] = saved

    def prune(self, bound) -> bool:
        c = self.best[0]
        return bound > c and not _close(bound, c)

    def run(self):
        self.dfs(0, 0.0)
        return self.best[1], self.best[2], self.best[0], self.nodes, not self.aborted

    def options(self, u):
        """Children of user u as ``(increment, kind, target, new_lb)``, best first.

        kind 0: direct at BS ``target``; 1: member of placed head ``target``;
        2: member of undecided head ``target`` (increment is the bound change).
        """
        out = []
        if self.npend[u]:
            for k in range(self.nb):
                inc = self.direct[u, k] + self.psum[u, k]
                if math.isfinite(inc) and self.feasible(u, k):
                    out.append((inc, 0, k, 0.0))
        else:
            for k in range(self.nb):
                if math.isfinite(self.direct[u, k]):
                    out.append((self.direct[u, k], 0, k, 0.0))
            for h in range(self.n):
                if h == u or not self.head_ok[h]:
                    continue
                if self.decided[h]:
                    k = self.serving[h]
                    if k < 0:
                        continue
                    inc = self.member[u, h, k]
                    if math.isfinite(inc) and self.feasible(h, k, extra=u):
                        out.append((inc, 1, h, 0.0))
                else:
                    saved = self.add_member(u, h, True)
                    new_lb = self.pending_lb(h)
                    self.remove_member(u, h, True, saved)
                    if math.isfinite(new_lb):
                        out.append((new_lb - self.lb[h], 2, h, new_lb))
        out.sort(key=lambda e: (e[0], e[1], e[2]))
        return out

    def dfs(self, pos, cost):
        if self.aborted:
            return
        self.nodes += 1
        if self.nodes > self.budget:
            self.aborted = True
            return
        if pos == self.n:
            c, s, h = self.best
            if _better(cost, self.serving, self.head, c, s, h):
                self.best = (cost, self.serving.copy(), self.head.copy())
            return
        u = self.order[pos]
        entry_total, entry_lb = self.lb_total, self.lb[u]
        rest = entry_total - entry_lb
        opts = self.options(u)
        self.decided[u] = True
        self.lb_total = rest
        self.lb[u] = 0.0
        for inc, kind, p, new_lb in opts:
            if self.prune(cost + inc + rest):
                continue
            if kind == 0:
                self.serving[u] = p
                self.dfs(pos + 1, cost + inc)
                self.serving[u] = -1
            elif kind == 1:
                saved = self.add_member(u, p, False)
                self.dfs(pos + 1, cost + inc)
                self.remove_member(u, p, False, saved)
            else:
                old = self.lb[p]
                saved = self.add_member(u, p, True)
                self.lb[p] = new_lb
                self.lb_total = rest + inc
                self.dfs(pos + 1, cost)
                self.lb_total = rest
                self.lb[p] = old
                self.remove_member(u, p, True, saved)
            if self.aborted:
                break
        self.lb[u] = entry_lb
        self.lb_total = entry_total
        self.decided[u] = False


def _finite(v: float) -> float:
    return v if math.isfinite(v) else 1e300


def branch_and_bound(direct, member, head_ok, energy=None, node_budget=2_000_000):
    """Depth-first search over per-user attachments.

    Each user is served directly by some BS, joins an already placed head,
    or joins a head that is still undecided (its cost is charged when that
    head is placed, and the head is then forced onto a BS).  The bound adds
    to the cost so far a per-user lower bound for every undecided user: the
    cheapest single option ignoring interactions, or for a user with pending
    members the cheapest BS carrying them.  Each undecided user's final cost
    is at least that value and pending members are charged only through
    their head's bound, so the sum never overestimates and pruning is safe.

    Returns ``(serving, head, cost, nodes, complete)``.
    """
    return _Search(direct, member, head_ok, energy, node_budget).run()


def schedule(demand, budget, u, order):
    """Random-order PRB grants over ``S`` subframes.

    ``demand`` is the expected PRBs per subframe of each flow.  In subframe
    s flow f asks for ``floor(demand[f] + u[s, f])`` PRBs; flows are served
    in the order ``order[s]`` until ``budget`` PRBs are gone.  Returns the
    total (requested, granted) PRBs per flow.
    """
    demand = np.asarray(demand, dtype=float)
    req = np.floor(demand[None, :] + u).astype(np.int64)
    req_sorted = np.take_along_axis(req, order, axis=1)
    before = np.cumsum(req_sorted, axis=1) - req_sorted
    got_sorted = np.clip(np.minimum(req_sorted, budget - before), 0, None)
    got = np.empty_like(got_sorted)
    np.put_along_axis(got, order, got_sorted, axis=1)
    return req.sum(axis=0), got.sum(axis=0)
