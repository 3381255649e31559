# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Same signatures and results as ``_kernels_py``."""

import numpy as np

from libc.math cimport INFINITY, fabs, isfinite, floor
from libc.stdlib cimport malloc, free, calloc

BACKEND = "compiled"

cdef double TIE_RTOL = 1e-12


cdef inline bint _close(double a, double b) noexcept nogil:
    if a == b:
        return True
    if not (isfinite(a) and isfinite(b)):
        return False
    return fabs(a - b) <= TIE_RTOL * (fabs(a) if fabs(a) > fabs(b) else fabs(b))


cdef bint _key_less(long long[::1] s1, long long[::1] h1, long long[::1] s2, long long[::1] h2,
                    int n, int* mark) noexcept nogil:
    # (n_clusters, Y key, X key) lexicographic, see _kernels_py.tie_key
    cdef int i, c1 = 0, c2 = 0
    cdef long long k1, k2
    for i in range(n):
        mark[i] = 0
    for i in range(n):
        if h1[i] >= 0 and mark[h1[i]] == 0:
            mark[h1[i]] = 1
            c1 += 1
    for i in range(n):
        mark[i] = 0
    for i in range(n):
        if h2[i] >= 0 and mark[h2[i]] == 0:
            mark[h2[i]] = 1
            c2 += 1
    if c1 != c2:
        return c1 < c2
    for i in range(n):
        k1 = 0 if h1[i] < 0 else n - h1[i]
        k2 = 0 if h2[i] < 0 else n - h2[i]
        if k1 != k2:
            return k1 < k2
    for i in range(n):
        if s1[i] != s2[i]:
            return s1[i] < s2[i]
    return False


cdef bint _better(double cost, long long[::1] s, long long[::1] h, double best_cost,
                  long long[::1] bs, long long[::1] bh, int n, int* mark) noexcept nogil:
    if _close(cost, best_cost):
        return _key_less(s, h, bs, bh, n, mark)
    return cost < best_cost


def baseline_state(direct):
    direct = np.ascontiguousarray(direct, dtype=np.float64)
    cdef Py_ssize_t n = direct.shape[0]
    serving = np.argmin(direct, axis=1).astype(np.int64) if n else np.empty(0, dtype=np.int64)
    cdef double cost = 0.0
    cdef double[:, ::1] d = direct
    cdef long long[::1] sv = serving
    cdef Py_ssize_t i
    for i in range(n):
        cost += d[i, sv[i]]
    return serving, np.full(n, -1, dtype=np.int64), cost


def exhaustive(direct, member, head_ok):
    direct = np.ascontiguousarray(direct, dtype=np.float64)
    member = np.ascontiguousarray(member, dtype=np.float64)
    cdef double[:, ::1] D = direct
    cdef double[:, :, ::1] M = member
    cdef int n = direct.shape[0]
    cdef int nb = direct.shape[1]
    ok = np.asarray(head_ok, dtype=bool)
    elig_py = [j for j in range(n) if ok[j]]
    cdef int m = len(elig_py)
    d_arg_np = np.argmin(direct, axis=1).astype(np.int64) if n else np.empty(0, dtype=np.int64)
    cdef long long[::1] d_arg = d_arg_np
    d_min_np = np.ascontiguousarray(direct[np.arange(n), d_arg_np]) if n else np.empty(0)
    cdef double[::1] d_min = d_min_np
    bs_np, bh_np, best_cost0 = baseline_state(direct)
    cdef double best_cost = best_cost0
    best_s = bs_np.copy()
    best_h = bh_np.copy()
    cdef long long[::1] bs = best_s
    cdef long long[::1] bh = best_h
    cur_s_np = np.full(n, -1, dtype=np.int64)
    cur_h_np = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] cs = cur_s_np
    cdef long long[::1] ch = cur_h_np
    elig_np = np.array(elig_py, dtype=np.int64)
    cdef long long[::1] elig = elig_np
    cdef int* comb = <int*> calloc(n + 1, sizeof(int))
    cdef int* heads = <int*> calloc(n + 1, sizeof(int))
    cdef int* is_head = <int*> calloc(n + 1, sizeof(int))
    cdef int* kap = <int*> calloc(n + 1, sizeof(int))
    cdef int* mark = <int*> calloc(n + 1, sizeof(int))
    cdef long long nodes = 1
    cdef int r, t, i, a, idx, best_t, k
    cdef long long c, ncomb, cc
    cdef double total, lo, mm, v, dm
    cdef double* totals = NULL
    try:
        for r in range(1, m + 1):
            for t in range(r):
                comb[t] = t
            while True:
                for i in range(n):
                    is_head[i] = 0
                for t in range(r):
                    heads[t] = <int> elig[comb[t]]
                    is_head[heads[t]] = 1
                if r < n:
                    ncomb = 1
                    for t in range(r):
                        ncomb *= nb
                    nodes += ncomb
                    totals = <double*> malloc(ncomb * sizeof(double))
                    lo = INFINITY
                    for c in range(ncomb):
                        cc = c
                        for t in range(r - 1, -1, -1):
                            kap[t] = cc % nb
                            cc //= nb
                        total = 0.0
                        for t in range(r):
                            total += D[heads[t], kap[t]]
                        for i in range(n):
                            if is_head[i]:
                                continue
                            mm = INFINITY
                            for t in range(r):
                                v = M[i, heads[t], kap[t]]
                                if v < mm:
                                    mm = v
                            total += mm if mm < d_min[i] else d_min[i]
                        totals[c] = total
                        if c == 0 or total < lo:
                            lo = total
                    if lo < best_cost or _close(lo, best_cost):
                        for c in range(ncomb):
                            if not (_close(totals[c], lo) or totals[c] < lo):
                                continue
                            cc = c
                            for t in range(r - 1, -1, -1):
                                kap[t] = cc % nb
                                cc //= nb
                            for i in range(n):
                                cs[i] = -1
                                ch[i] = -1
                            for t in range(r):
                                cs[heads[t]] = kap[t]
                            for i in range(n):
                                if is_head[i]:
                                    continue
                                mm = INFINITY
                                for t in range(r):
                                    v = M[i, heads[t], kap[t]]
                                    if v < mm:
                                        mm = v
                                dm = d_min[i]
                                if dm <= mm or _close(dm, mm):
                                    cs[i] = d_arg[i]
                                else:
                                    best_t = -1
                                    for t in range(r):
                                        if _close(M[i, heads[t], kap[t]], mm):
                                            best_t = t
                                    ch[i] = heads[best_t]
                            if _better(totals[c], cs, ch, best_cost, bs, bh, n, mark):
                                best_cost = totals[c]
                                bs[:] = cs
                                bh[:] = ch
                    free(totals)
                    totals = NULL
                # next combination of r out of m
                t = r - 1
                while t >= 0 and comb[t] == m - r + t:
                    t -= 1
                if t < 0:
                    break
                comb[t] += 1
                for a in range(t + 1, r):
                    comb[a] = comb[a - 1] + 1
    finally:
        free(comb); free(heads); free(is_head); free(kap); free(mark)
        if totals != NULL:
            free(totals)
    return best_s, best_h, best_cost, int(nodes)


cdef class _Search:
    cdef double[:, ::1] D
    cdef double[:, :, ::1] M
    cdef int n, nb
    cdef signed char[::1] head_ok
    cdef bint has_energy
    cdef double[:, ::1] hd0, hu0, tx0, lim
    cdef double[:, :, ::1] ea, eb, et
    cdef double dp
    cdef long long budget, nodes
    cdef bint aborted
    cdef long long[::1] serving, head
    cdef signed char[::1] decided
    cdef long long[::1] npend, nmem
    cdef double[:, ::1] psum
    cdef double[:, :, ::1] esum
    cdef double[::1] lb0, lb
    cdef double lb_total
    cdef long long[::1] order
    cdef double best_cost
    cdef long long[::1] best_s, best_h
    cdef object best_s_np, best_h_np
    cdef int* mark
    # per-depth scratch
    cdef double* opt_inc
    cdef int* opt_kind
    cdef int* opt_p
    cdef double* opt_new
    cdef double* save  # 2 slots per depth, each 4 * nb doubles
    cdef int width

    def __cinit__(self):
        self.mark = NULL
        self.opt_inc = NULL
        self.opt_kind = NULL
        self.opt_p = NULL
        self.opt_new = NULL
        self.save = NULL

    def __dealloc__(self):
        free(self.mark); free(self.opt_inc); free(self.opt_kind); free(self.opt_p)
        free(self.opt_new); free(self.save)

    def setup(self, direct, member, head_ok, energy, long long node_budget):
        direct = np.ascontiguousarray(direct, dtype=np.float64)
        member = np.ascontiguousarray(member, dtype=np.float64)
        self.D = direct
        self.M = member
        self.n = direct.shape[0]
        self.nb = direct.shape[1]
        n, nb = self.n, self.nb
        self.head_ok = np.ascontiguousarray(np.asarray(head_ok, dtype=bool).view(np.int8))
        self.has_energy = energy is not None
        if energy is None:
            z2 = np.zeros((max(n, 1), max(nb, 1)))
            z3 = np.zeros((max(n, 1), max(n, 1), max(nb, 1)))
            self.hd0 = z2; self.hu0 = z2; self.tx0 = z2; self.lim = z2
            self.ea = z3; self.eb = z3; self.et = z3
            self.dp = 0.0
        else:
            hd0, hu0, tx0, lim, a, b, t, dp = energy
            self.hd0 = np.ascontiguousarray(hd0, dtype=np.float64)
            self.hu0 = np.ascontiguousarray(hu0, dtype=np.float64)
            self.tx0 = np.ascontiguousarray(tx0, dtype=np.float64)
            self.lim = np.ascontiguousarray(lim, dtype=np.float64)
            self.ea = np.ascontiguousarray(a, dtype=np.float64)
            self.eb = np.ascontiguousarray(b, dtype=np.float64)
            self.et = np.ascontiguousarray(t, dtype=np.float64)
            self.dp = float(dp)
        self.budget = node_budget
        self.nodes = 0
        self.aborted = False
        self.serving = np.full(n, -1, dtype=np.int64)
        self.head = np.full(n, -1, dtype=np.int64)
        self.decided = np.zeros(n, dtype=np.int8)
        self.npend = np.zeros(n, dtype=np.int64)
        self.nmem = np.zeros(n, dtype=np.int64)
        self.psum = np.zeros((n, nb))
        self.esum = np.zeros((3, n, nb))
        d_min = direct.min(axis=1) if n else np.empty(0)
        mm = member.copy()
        mm[:, ~np.asarray(head_ok, dtype=bool), :] = np.inf
        m_min = mm.min(axis=(1, 2)) if n > 1 else np.full(n, np.inf)
        lb0 = np.ascontiguousarray(np.minimum(d_min, m_min), dtype=np.float64)
        self.lb0 = lb0
        self.lb = lb0.copy()
        cdef double tot = 0.0
        cdef Py_ssize_t i
        for i in range(n):
            tot += self.lb[i]
        self.lb_total = tot
        fin = [v if np.isfinite(v) else 1e300 for v in lb0.tolist()]
        self.order = np.array(sorted(range(n), key=lambda q: (-fin[q], q)), dtype=np.int64)
        s, h, c = baseline_state(direct)
        self.best_s_np, self.best_h_np = s.copy(), h.copy()
        self.best_s = self.best_s_np
        self.best_h = self.best_h_np
        self.best_cost = c
        self.width = nb + n
        self.mark = <int*> calloc(n + 1, sizeof(int))
        self.opt_inc = <double*> malloc((n + 1) * self.width * sizeof(double) + 8)
        self.opt_kind = <int*> malloc((n + 1) * self.width * sizeof(int) + 8)
        self.opt_p = <int*> malloc((n + 1) * self.width * sizeof(int) + 8)
        self.opt_new = <double*> malloc((n + 1) * self.width * sizeof(double) + 8)
        self.save = <double*> malloc((n + 1) * 2 * 4 * nb * sizeof(double) + 8)

    cdef inline bint feasible(self, int h, int k, int extra) noexcept nogil:
        cdef double sa, sb, st, x1, x2, th
        if not self.has_energy:
            return True
        sa = self.esum[0, h, k]
        sb = self.esum[1, h, k]
        st = self.esum[2, h, k]
        if extra >= 0:
            sa = sa + self.ea[extra, h, k]
            sb = sb + self.eb[extra, h, k]
            st = st + self.et[extra, h, k]
        x1 = self.hd0[h, k] + sa
        x2 = self.hu0[h, k] + sb
        th = x1 if x1 >= x2 else x2
        if th > 1.0:
            th = 1.0
        return self.dp * th + self.tx0[h, k] + st <= self.lim[h, k]

    cdef double pending_lb(self, int v) noexcept nogil:
        cdef double best = INFINITY, c
        cdef int k
        for k in range(self.nb):
            c = self.D[v, k] + self.psum[v, k]
            if c < best and self.feasible(v, k, -1):
                best = c
        return best

    cdef void add_member(self, int i, int h, bint pending, double* slot) noexcept nogil:
        cdef int k, nb = self.nb
        for k in range(nb):
            slot[k] = self.psum[h, k]
            slot[nb + k] = self.esum[0, h, k]
            slot[2 * nb + k] = self.esum[1, h, k]
            slot[3 * nb + k] = self.esum[2, h, k]
        self.head[i] = h
        self.nmem[h] += 1
        if self.has_energy:
            for k in range(nb):
                self.esum[0, h, k] += self.ea[i, h, k]
                self.esum[1, h, k] += self.eb[i, h, k]
                self.esum[2, h, k] += self.et[i, h, k]
        if pending:
            self.npend[h] += 1
            for k in range(nb):
                self.psum[h, k] += self.M[i, h, k]

    cdef void remove_member(self, int i, int h, bint pending, double* slot) noexcept nogil:
        cdef int k, nb = self.nb
        self.head[i] = -1
        self.nmem[h] -= 1
        if pending:
            self.npend[h] -= 1
        for k in range(nb):
            self.psum[h, k] = slot[k]
            self.esum[0, h, k] = slot[nb + k]
            self.esum[1, h, k] = slot[2 * nb + k]
            self.esum[2, h, k] = slot[3 * nb + k]

    cdef inline bint prune(self, double bound) noexcept nogil:
        return bound > self.best_cost and not _close(bound, self.best_cost)

    cdef int options(self, int u, int pos) noexcept nogil:
        cdef int base = pos * self.width, cnt = 0, k, h, a, b
        cdef double inc, new_lb, ti, tn
        cdef int tk, tp
        cdef double* scratch = self.save + (pos * 2 + 1) * 4 * self.nb
        if self.npend[u]:
            for k in range(self.nb):
                inc = self.D[u, k] + self.psum[u, k]
                if isfinite(inc) and self.feasible(u, k, -1):
                    self.opt_inc[base + cnt] = inc; self.opt_kind[base + cnt] = 0
                    self.opt_p[base + cnt] = k; self.opt_new[base + cnt] = 0.0
                    cnt += 1
        else:
            for k in range(self.nb):
                if isfinite(self.D[u, k]):
                    self.opt_inc[base + cnt] = self.D[u, k]; self.opt_kind[base + cnt] = 0
                    self.opt_p[base + cnt] = k; self.opt_new[base + cnt] = 0.0
                    cnt += 1
            for h in range(self.n):
                if h == u or not self.head_ok[h]:
                    continue
                if self.decided[h]:
                    k = <int> self.serving[h]
                    if k < 0:
                        continue
                    inc = self.M[u, h, k]
                    if isfinite(inc) and self.feasible(h, k, u):
                        self.opt_inc[base + cnt] = inc; self.opt_kind[base + cnt] = 1
                        self.opt_p[base + cnt] = h; self.opt_new[base + cnt] = 0.0
                        cnt += 1
                else:
                    self.add_member(u, h, True, scratch)
                    new_lb = self.pending_lb(h)
                    self.remove_member(u, h, True, scratch)
                    if isfinite(new_lb):
                        self.opt_inc[base + cnt] = new_lb - self.lb[h]; self.opt_kind[base + cnt] = 2
                        self.opt_p[base + cnt] = h; self.opt_new[base + cnt] = new_lb
                        cnt += 1
        # insertion sort on (inc, kind, target)
        for a in range(1, cnt):
            ti = self.opt_inc[base + a]; tk = self.opt_kind[base + a]
            tp = self.opt_p[base + a]; tn = self.opt_new[base + a]
            b = a - 1
            while b >= 0 and (self.opt_inc[base + b] > ti or (self.opt_inc[base + b] == ti and (
                    self.opt_kind[base + b] > tk or (self.opt_kind[base + b] == tk and self.opt_p[base + b] > tp)))):
                self.opt_inc[base + b + 1] = self.opt_inc[base + b]
                self.opt_kind[base + b + 1] = self.opt_kind[base + b]
                self.opt_p[base + b + 1] = self.opt_p[base + b]
                self.opt_new[base + b + 1] = self.opt_new[base + b]
                b -= 1
            self.opt_inc[base + b + 1] = ti; self.opt_kind[base + b + 1] = tk
            self.opt_p[base + b + 1] = tp; self.opt_new[base + b + 1] = tn
        return cnt

    cdef void dfs(self, int pos, double cost) noexcept nogil:
        cdef int u, cnt, o, kind, p, base
        cdef double entry_total, entry_lb, rest, inc, new_lb, old
        cdef double* slot
        cdef Py_ssize_t q
        if self.aborted:
            return
        self.nodes += 1
        if self.nodes > self.budget:
            self.aborted = True
            return
        if pos == self.n:
            if _better(cost, self.serving, self.head, self.best_cost, self.best_s, self.best_h, self.n, self.mark):
                self.best_cost = cost
                for q in range(self.n):
                    self.best_s[q] = self.serving[q]
                    self.best_h[q] = self.head[q]
            return
        u = <int> self.order[pos]
        entry_total = self.lb_total
        entry_lb = self.lb[u]
        rest = entry_total - entry_lb
        cnt = self.options(u, pos)
        base = pos * self.width
        slot = self.save + (pos * 2) * 4 * self.nb
        self.decided[u] = 1
        self.lb_total = rest
        self.lb[u] = 0.0
        for o in range(cnt):
            inc = self.opt_inc[base + o]
            kind = self.opt_kind[base + o]
            p = self.opt_p[base + o]
            new_lb = self.opt_new[base + o]
            if self.prune(cost + inc + rest):
                continue
            if kind == 0:
                self.serving[u] = p
                self.dfs(pos + 1, cost + inc)
                self.serving[u] = -1
            elif kind == 1:
                self.add_member(u, p, False, slot)
                self.dfs(pos + 1, cost + inc)
                self.remove_member(u, p, False, slot)
            else:
                old = self.lb[p]
                self.add_member(u, p, True, slot)
                self.lb[p] = new_lb
                self.lb_total = rest + inc
                self.dfs(pos + 1, cost)
                self.lb_total = rest
                self.lb[p] = old
                self.remove_member(u, p, True, slot)
            if self.aborted:
                break
        self.lb[u] = entry_lb
        self.lb_total = entry_total
        self.decided[u] = 0

    def run(self):
        with nogil:
            self.dfs(0, 0.0)
        return (np.asarray(self.best_s_np).copy(), np.asarray(self.best_h_np).copy(), self.best_cost,
                int(self.nodes), not self.aborted)


def branch_and_bound(direct, member, head_ok, energy=None, node_budget=2_000_000):
    s = _Search()
    s.setup(direct, member, head_ok, energy, int(node_budget))
    return s.run()


def schedule(demand, long long budget, u, order):
    demand = np.ascontiguousarray(demand, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    order = np.ascontiguousarray(order, dtype=np.int64)
    cdef double[::1] dem = demand
    cdef double[:, ::1] U = u
    cdef long long[:, ::1] O = order
    cdef Py_ssize_t S = U.shape[0], F = dem.shape[0], s, f, q
    req_np = np.zeros(F, dtype=np.int64)
    got_np = np.zeros(F, dtype=np.int64)
    cdef long long[::1] req = req_np
    cdef long long[::1] got = got_np
    cdef long long left, want, g
    with nogil:
        for s in range(S):
            left = budget
            for q in range(F):
                f = O[s, q]
                want = <long long> floor(dem[f] + U[s, f])
                req[f] += want
                g = want if want < left else left
                if g < 0:
                    g = 0
                got[f] += g
                left -= g
    return req_np, got_np
