"""Independent reference computations, written from the model definitions
rather than from the package code.  Frozen: do not edit to match the package."""

import itertools
import math

import numpy as np

LOG2 = math.log2


def path_loss_db(kind, d_m):
    a, b = {"macro": (128.1, 37.6), "small": (140.7, 36.7), "d2d": (148.0, 40.0)}[kind]
    return a + b * math.log10(max(d_m, 1.0) / 1000.0)


def per_link_load(users, table, serving, head):
    """(dl, ul) PRBs per BS by walking every link of every user."""
    n_b = table.phi_dl.shape[0]
    dl, ul = [0.0] * n_b, [0.0] * n_b
    for i in range(len(users)):
        rd = float(users.rate_dl[i])
        ru = float(users.alpha[i]) * rd
        if head[i] >= 0:
            h = int(head[i])
            k = int(serving[h])
            if rd:
                dl[k] += rd * table.phi_dl[k, h]
                ul[k] += rd * table.d2d_down[h, i]
            if ru:
                ul[k] += ru * table.phi_ul[h, k] + ru * table.d2d_up[i, h]
        else:
            k = int(serving[i])
            if rd:
                dl[k] += rd * table.phi_dl[k, i]
            if ru:
                ul[k] += ru * table.phi_ul[i, k]
    return dl, ul


def brute_force_optimum(users, table, n_b):
    """Enumerate every user -> (BS | other user) choice; keep valid single-hop ones."""
    n = len(users)
    options = [("bs", k) for k in range(n_b)] + [("ue", j) for j in range(n)]
    best = math.inf
    for combo in itertools.product(options, repeat=n):
        serving = [-1] * n
        head = [-1] * n
        ok = True
        for i, (kind, v) in enumerate(combo):
            if kind == "bs":
                serving[i] = v
            elif v == i:
                ok = False
                break
            else:
                head[i] = v
        if not ok or any(head[i] >= 0 and serving[head[i]] < 0 for i in range(n)):
            continue
        dl, ul = per_link_load(users, table, serving, head)
        best = min(best, sum(dl) + sum(ul))
    return best


def subframe_energy(window, bits_dl, bits_ul, eta_dl, eta_ul, cap_dl, cap_ul, p_prb, p_c, p_i, ts=1e-3):
    """Walk the window subframe by subframe: send up to cap*eta bits per band
    and subframe until both queues drain; connected subframes cost p_c plus the
    transmit power of every PRB used in an UL subframe (all cap PRBs), the rest p_i."""
    n_sf = int(round(window / ts))
    left_d, left_u = float(bits_dl), float(bits_ul)
    e = 0.0
    for _ in range(n_sf):
        busy = left_d > 0 or left_u > 0
        if busy:
            e += p_c * ts
            if left_u > 0:
                e += p_prb * cap_ul * ts
                left_u -= cap_ul * eta_ul
            if left_d > 0:
                left_d -= cap_dl * eta_dl
        else:
            e += p_i * ts
    return e


def theta_n(rd, ru, phi_d, phi_u, m_d, m_u):
    return min(1.0, max(rd * phi_d / m_d, ru * phi_u / m_u))
