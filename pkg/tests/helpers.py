"""Hand-built link tables and random states for the tests."""

import numpy as np

from d2dclust.association import AssociationState
from d2dclust.radio import LinkCostTable
from d2dclust.scenario import MACRO, SMALL, BaseStation, UserSet


def make_table(phi_dl, phi_ul=None, d2d_up=None, d2d_down=None, serving=None, ul_power_w=None,
               subframe=1e-3):
    phi_dl = np.atleast_2d(np.asarray(phi_dl, dtype=float))
    n_b, n_u = phi_dl.shape
    phi_ul = phi_dl.T.copy() if phi_ul is None else np.asarray(phi_ul, dtype=float).reshape(n_u, n_b)
    full = np.full((n_u, n_u), np.inf)
    d2d_up = full.copy() if d2d_up is None else np.asarray(d2d_up, dtype=float)
    d2d_down = d2d_up.T.copy() if d2d_down is None else np.asarray(d2d_down, dtype=float)
    serving = np.zeros(n_u, dtype=int) if serving is None else np.asarray(serving)
    ul_power_w = np.full((n_u, n_b), 1e-3) if ul_power_w is None else np.asarray(ul_power_w, dtype=float)
    z_bu, z_ub, z_uu = np.zeros((n_b, n_u)), np.zeros((n_u, n_b)), np.zeros((n_u, n_u))
    return LinkCostTable(phi_dl, phi_ul, d2d_up, d2d_down, z_bu, np.where(np.isfinite(d2d_up), 0.0, -np.inf),
                         z_bu, z_ub, z_uu, z_uu, ul_power_w, serving, tuple(["macro"] * n_b), subframe)


def users_of(rate_dl, alpha, n=None):
    rate_dl = np.atleast_1d(np.asarray(rate_dl, dtype=float))
    n = len(rate_dl) if n is None else n
    return UserSet.from_arrays(np.zeros((n, 2)), rate_dl, alpha)


def macros(n):
    return [BaseStation.make(k, MACRO, (500.0 * k, 0.0), k) for k in range(n)]


def random_table(rng, n_u, n_b, reach=0.7):
    """Finite random costs (PRB-subframes per bit) with some D2D pairs out of range."""
    phi_dl = rng.uniform(1e-3 / 2000, 1e-3 / 20, (n_b, n_u))
    phi_ul = rng.uniform(1e-3 / 2000, 1e-3 / 20, (n_u, n_b))
    up = rng.uniform(1e-3 / 2000, 1e-3 / 50, (n_u, n_u))
    down = rng.uniform(1e-3 / 2000, 1e-3 / 50, (n_u, n_u))
    mask = rng.random((n_u, n_u)) < reach
    mask &= mask.T
    np.fill_diagonal(mask, False)
    up = np.where(mask, up, np.inf)
    down = np.where(mask.T, down, np.inf)
    serving = phi_dl.argmin(axis=0)
    return make_table(phi_dl, phi_ul, up, down, serving, ul_power_w=rng.uniform(1e-5, 0.1, (n_u, n_b)))


def random_users(rng, n):
    voip = rng.random(n) < 0.5
    return UserSet.from_arrays(rng.uniform(-100, 100, (n, 2)), np.where(voip, 64e3, 700e3),
                               np.where(voip, 1.0, rng.uniform(0, 1, n)))


def random_state(rng, table, n_b):
    """A valid association with random heads and random (finite) attachments."""
    n = table.n_users
    reach = np.isfinite(table.d2d_up) & np.isfinite(table.d2d_down.T)  # [member, head]
    serving = rng.integers(0, n_b, n)
    head = np.full(n, -1)
    is_head = np.zeros(n, bool)
    for i in rng.permutation(n):
        if is_head[i] or rng.random() < 0.4:
            continue
        opts = [j for j in np.flatnonzero(reach[i]) if head[j] < 0]
        if opts:
            j = int(rng.choice(opts))
            head[i] = j
            serving[i] = -1
            is_head[j] = True
    return AssociationState(serving, head, n_b)


def small_cell(id, pos, macro_id=0):
    return BaseStation.make(id, SMALL, pos, macro_id)
