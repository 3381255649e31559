"""UE power and energy model, head power budgets and the CEEa ban ledger.

Expected quantities (``theta_*``, ``expected_*``) are per-subframe averages
for fixed links.  The engine instead counts connected subframes from the
bits actually carried in a window (:func:`window_energy`), which is also how
the unclustered counterfactual is estimated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .association import AssociationState
from .config import CeeaConfig, PowerModel, dbm_to_w
from .radio import LinkCostTable
from .resources import smul
from .scenario import UserSet


def tx_power(m_prbs: float, role: str, model: PowerModel, gain_db: float | None = None,
             max_power_dbm: float | None = None) -> float:
    """Instantaneous transmit power in W for ``m_prbs`` scheduled PRBs.

    BS-attached roles (N, H) use fractional power control ``P_0 h^-xi`` per
    PRB, optionally capped per PRB at ``max_power_dbm``; members send
    ``P_d2d`` per PRB.
    """
    if m_prbs == 0:
        return 0.0
    if role == "M":
        return m_prbs * model.d2d_power_w
    if gain_db is None:
        raise ValueError("gain_db is needed for a BS-attached user")
    p = model.ul_target_power - model.compensation * gain_db
    if max_power_dbm is not None:
        p = min(p, max_power_dbm)
    return m_prbs * dbm_to_w(p)


def _clamp(v):
    return min(1.0, max(0.0, v))


def theta_N(i: int, k: int, table: LinkCostTable, users: UserSet, model: PowerModel) -> float:
    """Share of time in RRC_CONNECTED for user i served directly by BS k."""
    rd, ru = users.rate_dl[i], users.rate_ul[i]
    return _clamp(max(smul(rd, table.phi_dl[k, i]) / model.m_max_dl, smul(ru, table.phi_ul[i, k]) / model.m_max_ul))


def _head_terms(i, k, members, table, users, model):
    """Head i's own and per-member terms of the two connected-state branches."""
    rd, ru = users.rate_dl, users.rate_ul
    own_dl = float(smul(rd[i], table.phi_dl[k, i])) / model.m_max_head_dl
    own_ul = float(smul(ru[i], table.phi_ul[i, k])) / model.m_max_head_ul
    dl, ul = [], []
    for j in members:
        dl.append(float(smul(rd[j], table.phi_dl[k, i])) / model.m_max_head_dl)
        ul.append(float(smul(ru[j], table.phi_ul[i, k])) / model.m_max_head_ul
                  + float(smul(rd[j], table.d2d_down[i, j])) / model.m_max_d2d_head
                  + float(smul(ru[j], table.d2d_up[j, i])) / model.m_max_d2d_member)
    return own_dl, own_ul, dl, ul


def head_connected_prob(i: int, k: int, members, table: LinkCostTable, users: UserSet,
                        model: PowerModel) -> float:
    """Connected-state probability of head i: the larger of the DL-receive
    branch and the UL-band branch (own and forwarded transmissions plus D2D
    reception), full-duplex."""
    own_dl, own_ul, dl, ul = _head_terms(i, k, members, table, users, model)
    return _clamp(max(own_dl + sum(dl), own_ul + sum(ul)))


def theta_H(i: int, k: int, members, table: LinkCostTable, users: UserSet, model: PowerModel) -> dict[int, float]:
    """Per-member share of the head's extra connected time.

    The residual ``P{connected | H} - theta_N`` is split over the members in
    proportion to their terms in whichever branch is active, so the shares
    sum back exactly to the head probability.
    """
    members = list(members)
    total = head_connected_prob(i, k, members, table, users, model)
    resid = total - theta_N(i, k, table, users, model)
    own_dl, own_ul, dl, ul = _head_terms(i, k, members, table, users, model)
    terms = dl if own_dl + sum(dl) >= own_ul + sum(ul) else ul
    s = sum(terms)
    if s <= 0 or resid <= 0:
        return {j: 0.0 for j in members}
    return {j: resid * t / s for j, t in zip(members, terms)}


def theta_M(i: int, h: int, table: LinkCostTable, users: UserSet, model: PowerModel) -> float:
    """Connected-state share of a member: D2D reception or transmission, full-duplex."""
    return _clamp(max(float(smul(users.rate_dl[i], table.d2d_down[h, i])) / model.m_max_d2d_head,
                      float(smul(users.rate_ul[i], table.d2d_up[i, h])) / model.m_max_d2d_member))


def expected_tx_power(i: int, state: AssociationState, table: LinkCostTable, users: UserSet,
                      model: PowerModel) -> float:
    """Mean transmit power in W for user i's current role."""
    rd, ru = users.rate_dl, users.rate_ul
    role = state.roles[i]
    if role == "M":
        h = int(state.head[i])
        return model.d2d_power_w * float(smul(ru[i], table.d2d_up[i, h]))
    k = int(state.serving[i])
    p = float(table.ul_power_w[i, k])
    if role == "N":
        return p * float(smul(ru[i], table.phi_ul[i, k]))
    members = state.clusters[i]
    up = ru[i] + sum(ru[j] for j in members)
    return p * float(smul(up, table.phi_ul[i, k])) + model.d2d_power_w * sum(
        float(smul(rd[j], table.d2d_down[i, j])) for j in members)


def unclustered_power(i: int, k: int, table: LinkCostTable, users: UserSet, model: PowerModel) -> float:
    """``E[P_i | N]`` at BS k."""
    tx = float(table.ul_power_w[i, k]) * float(smul(users.rate_ul[i], table.phi_ul[i, k]))
    return model.idle_power + model.delta_power * theta_N(i, k, table, users, model) + tx


def expected_power(i: int, state: AssociationState, table: LinkCostTable, users: UserSet,
                   model: PowerModel) -> float:
    """``E[P_i | role]`` in W under the current association."""
    role = state.roles[i]
    tx = expected_tx_power(i, state, table, users, model)
    if role == "M":
        theta = theta_M(i, int(state.head[i]), table, users, model)
    elif role == "H":
        theta = head_connected_prob(i, int(state.serving[i]), state.clusters[i], table, users, model)
    else:
        theta = theta_N(i, int(state.serving[i]), table, users, model)
    return model.idle_power + model.delta_power * theta + tx


def head_violations(state: AssociationState, table: LinkCostTable, users: UserSet, model: PowerModel,
                    w: float, rtol: float = 1e-9) -> list[tuple[int, float, float]]:
    """Heads with ``E[P|H] > (1 + w) E[P|N]``, as (head, P_H, limit)."""
    out = []
    for h in state.clusters:
        k = int(state.serving[h])
        ph = expected_power(h, state, table, users, model)
        lim = (1 + w) * unclustered_power(h, k, table, users, model)
        if ph > lim * (1 + rtol):
            out.append((h, ph, lim))
    return out


def head_budget_arrays(table: LinkCostTable, users: UserSet, model: PowerModel, w: float):
    """Arrays for the solver's head power check, indexed ``[head, bs]`` and
    ``[member, head, bs]`` (see ``_kernels_py.head_feasible``).  Same terms
    as :func:`head_connected_prob` and :func:`expected_tx_power`."""
    rd, ru = users.rate_dl, users.rate_ul
    phi_d = table.phi_dl.T  # [j, k]
    phi_u = table.phi_ul  # [j, k]
    p = table.ul_power_w  # [j, k]
    hd0 = smul(rd[:, None], phi_d) / model.m_max_head_dl
    hu0 = smul(ru[:, None], phi_u) / model.m_max_head_ul
    tx0 = p * smul(ru[:, None], phi_u)
    theta_n = np.clip(np.maximum(smul(rd[:, None], phi_d) / model.m_max_dl,
                                 smul(ru[:, None], phi_u) / model.m_max_ul), 0.0, 1.0)
    p_n = model.idle_power + model.delta_power * theta_n + tx0
    with np.errstate(invalid="ignore"):
        lim = (1 + w) * p_n - model.idle_power
    lim = np.where(np.isfinite(lim), lim, -np.inf)
    # member i of head j at k
    a = smul(rd[:, None, None], phi_d[None, :, :]) / model.m_max_head_dl
    down = table.d2d_down.T[:, :, None]  # [i, j] = head j -> member i
    up = table.d2d_up[:, :, None]  # member i -> head j
    b = (smul(ru[:, None, None], phi_u[None, :, :]) / model.m_max_head_ul
         + smul(rd[:, None, None], down) / model.m_max_d2d_head
         + smul(ru[:, None, None], up) / model.m_max_d2d_member)
    t = p[None, :, :] * smul(ru[:, None, None], phi_u[None, :, :]) + model.d2d_power_w * smul(rd[:, None, None], down)
    arrs = [np.ascontiguousarray(np.nan_to_num(x, nan=np.inf)) for x in (hd0, hu0, tx0, lim, a, b, t)]
    return (*arrs, float(model.delta_power))


def subframes_needed(bits, eta, cap):
    """Subframes to carry ``bits`` with ``cap`` PRBs of ``eta`` bits each: ceil(bits / (cap eta))."""
    bits = np.asarray(bits, dtype=float)
    eta = np.asarray(eta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        n = np.ceil(bits / (cap * eta))
    n = np.where(bits <= 0, 0.0, np.where(eta > 0, n, np.inf))
    return n


def counterfactual_energy(window, bits_dl, bits_ul, eta_dl, eta_ul, p_prb_w, model: PowerModel,
                          subframe: float = 1e-3):
    """Energy in J the user would have spent unclustered over ``window`` seconds.

    Connected time is the longer of the DL and UL transfer at full per-user
    PRB caps; the rest is idle.  The transmit term charges every PRB of
    every UL subframe (``m_max_ul`` PRBs at ``p_prb_w`` W).
    """
    n_sf = round(window / subframe)  # the window holds no more subframes than this
    nd = np.minimum(subframes_needed(bits_dl, eta_dl, model.m_max_dl), n_sf)
    nu = np.minimum(subframes_needed(bits_ul, eta_ul, model.m_max_ul), n_sf)
    tc = subframe * np.maximum(nd, nu)
    tx = subframe * np.asarray(p_prb_w, dtype=float) * model.m_max_ul * nu
    e = tc * model.connected_power + (window - tc) * model.idle_power + np.where(nu > 0, tx, 0.0)
    return float(e) if np.ndim(e) == 0 else e


@dataclass
class WindowTraffic:
    """Bits carried by every user over one window, with the links in use."""

    bits_dl: np.ndarray
    bits_ul: np.ndarray


def window_energy(window: float, traffic: WindowTraffic, state: AssociationState, baseline: np.ndarray,
                  table: LinkCostTable, model: PowerModel, subframe: float = 1e-3):
    """(actual, counterfactual) energy per user over one window.

    Actual energy counts connected subframes per role: direct users as in
    the counterfactual; heads add the forwarded traffic on the BS links and
    the D2D legs to each member; members only use their D2D links.
    """
    n = state.n_users
    idx = np.arange(n)
    bd, bu = traffic.bits_dl, traffic.bits_ul
    eta_dl = table.eta_dl  # [k, i]
    eta_ul = table.eta_ul  # [i, k]
    eta_up, eta_down = table.eta_up, table.eta_down
    pw = table.ul_power_w
    pd = model.d2d_power_w
    base = np.asarray(baseline)
    e_cf = counterfactual_energy(window, bd, bu, eta_dl[base, idx], eta_ul[idx, base], pw[idx, base], model, subframe)

    roles = state.roles
    cell = state.cell()
    e = np.empty(n)
    att = roles != "M"
    k = np.where(att, state.serving, cell)
    heads = state.clusters
    # head relays sum their members' traffic
    fwd_d, fwd_u = bd.copy(), bu.copy()
    d2d_tx = np.zeros(n)  # head -> member subframes
    d2d_rx = np.zeros(n)  # member -> head subframes, at the head
    for h, ms in heads.items():
        ms = np.asarray(ms)
        fwd_d[h] += bd[ms].sum()
        fwd_u[h] += bu[ms].sum()
        d2d_tx[h] = subframes_needed(bd[ms], eta_down[h, ms], model.m_max_d2d_head).sum()
        d2d_rx[h] = subframes_needed(bu[ms], eta_up[ms, h], model.m_max_d2d_member).sum()
    is_h = roles == "H"
    cap_d = np.where(is_h, model.m_max_head_dl, model.m_max_dl)
    cap_u = np.where(is_h, model.m_max_head_ul, model.m_max_ul)
    nd = subframes_needed(fwd_d[att], eta_dl[k[att], idx[att]], cap_d[att])
    nu = subframes_needed(fwd_u[att], eta_ul[idx[att], k[att]], cap_u[att])
    n_sf = round(window / subframe)
    nu = np.minimum(nu, n_sf)
    tc = subframe * np.minimum(np.maximum(nd, nu + d2d_tx[att] + d2d_rx[att]), n_sf)
    tx = subframe * (pw[idx[att], k[att]] * cap_u[att] * nu + pd * model.m_max_d2d_head * d2d_tx[att])
    tx = np.where(np.isfinite(tx), tx, 0.0)
    e[att] = tc * model.connected_power + (window - tc) * model.idle_power + tx

    mem = np.flatnonzero(~att)
    if len(mem):
        h = state.head[mem]
        n_rx = subframes_needed(bd[mem], eta_down[h, mem], model.m_max_d2d_head)
        n_tx = np.minimum(subframes_needed(bu[mem], eta_up[mem, h], model.m_max_d2d_member), n_sf)
        tc = subframe * np.minimum(np.maximum(n_rx, n_tx), n_sf)
        tx = subframe * pd * model.m_max_d2d_member * n_tx
        e[mem] = tc * model.connected_power + (window - tc) * model.idle_power + np.where(n_tx > 0, tx, 0.0)
    return e, e_cf


ENERGY_COLUMNS = ("user", "time_head", "time_member", "time_direct", "energy_j",
                  "energy_counterfactual_j", "w", "banned")


@dataclass
class EnergyLedger:
    """Per-user energy bookkeeping for CEEa and the overconsumption metric."""

    n_users: int
    cfg: CeeaConfig = field(default_factory=CeeaConfig)

    def __post_init__(self):
        n = self.n_users
        self.E = np.zeros(n)  # cumulative over the observation period (checked subperiods)
        self.E_cf = np.zeros(n)
        self.sub_E = np.zeros(n)  # current subperiod
        self.sub_E_cf = np.zeros(n)
        self.tau_H = np.zeros(n)
        self.tau_M = np.zeros(n)
        self.banned = np.zeros(n, dtype=bool)
        self.n_sub = 1  # subperiod index shared by all users, 1..n_eps
        self.w = np.full(n, self.cfg.ceea_w_max)
        # run totals
        self.total_E = np.zeros(n)
        self.total_E_cf = np.zeros(n)
        self.clustered_E = np.zeros(n)  # subperiods labelled H or M
        self.clustered_E_cf = np.zeros(n)
        self.time = {r: np.zeros(n) for r in "HMN"}
        self.elapsed = 0.0
        self.sub_elapsed = 0.0

    def accumulate(self, e, e_cf, roles, dt: float) -> None:
        self.sub_E += e
        self.sub_E_cf += e_cf
        self.total_E += e
        self.total_E_cf += e_cf
        self.tau_H += dt * (roles == "H")
        self.tau_M += dt * (roles == "M")
        for r in "HMN":
            self.time[r] += dt * (roles == r)
        self.elapsed += dt
        self.sub_elapsed += dt

    def subperiod_due(self) -> bool:
        return self.sub_elapsed >= self.cfg.ceea_subperiod - 1e-9

    def overconsumption(self) -> np.ndarray:
        """Run-level ``sum E / sum E_cf - 1`` over clustered subperiods (0 if never clustered)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            w = self.clustered_E / self.clustered_E_cf - 1.0
        return np.where(self.clustered_E_cf > 0, w, 0.0)

    def close_subperiod(self, roles, enforce: bool = True) -> set[int]:
        """Run the ban rules for this subperiod boundary; returns the banned set."""
        clustered = (roles == "H") | (roles == "M")
        self.clustered_E[clustered] += self.sub_E[clustered]
        self.clustered_E_cf[clustered] += self.sub_E_cf[clustered]
        if enforce:
            run_ceea(self, roles)
        else:
            self.E[clustered] += self.sub_E[clustered]
            self.E_cf[clustered] += self.sub_E_cf[clustered]
        self.sub_E[:] = 0.0
        self.sub_E_cf[:] = 0.0
        self.sub_elapsed = 0.0
        self.n_sub += 1
        n_eps = self.cfg.n_subperiods
        # every user follows the shared subperiod index, clustered or not
        self.w[:] = self.cfg.ceea_w_max * ((n_eps - 1) / n_eps) ** (self.n_sub - 1)
        if self.n_sub > n_eps:
            self.n_sub = 1
            self.w[:] = self.cfg.ceea_w_max
            self.E[:] = 0.0
            self.E_cf[:] = 0.0
            self.tau_H[:] = 0.0
            self.tau_M[:] = 0.0
        return set(np.flatnonzero(self.banned).tolist())

    def rows(self, user_ids=None):
        """Per-user report rows in ``ENERGY_COLUMNS`` order."""
        ids = range(self.n_users) if user_ids is None else user_ids
        w = self.overconsumption()
        for i in ids:
            yield [i, repr(float(self.time["H"][i])), repr(float(self.time["M"][i])),
                   repr(float(self.time["N"][i])), repr(float(self.total_E[i])),
                   repr(float(self.total_E_cf[i])), repr(float(w[i])), int(self.banned[i])]

    def write_csv(self, path, user_ids=None) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(ENERGY_COLUMNS)
            out.writerows(self.rows(user_ids))


def run_ceea(ledger: EnergyLedger, roles) -> set[int]:
    """One subperiod boundary of the ban rule, for users that are heads or members now.

    The cumulative check uses the energy of earlier subperiods in this
    observation period; a user over budget stays eligible only if the
    subperiod just ended was within budget and it has not been head longer
    than member.  ``w`` then decays by ``(n_eps - 1) / n_eps``.
    """
    n_eps = ledger.cfg.n_subperiods
    for i in np.flatnonzero((roles == "H") | (roles == "M")):
        w = ledger.w[i]
        if ledger.E[i] > (w + 1) * ledger.E_cf[i]:
            if ledger.sub_E[i] > (w + 1) * ledger.sub_E_cf[i]:
                ledger.banned[i] = True
            elif ledger.tau_H[i] > ledger.tau_M[i]:
                ledger.banned[i] = True
            else:
                ledger.banned[i] = False
        else:
            ledger.banned[i] = False
        ledger.w[i] = w * (n_eps - 1) / n_eps
        ledger.E[i] += ledger.sub_E[i]
        ledger.E_cf[i] += ledger.sub_E_cf[i]
    return set(np.flatnonzero(ledger.banned).tolist())
