"""Path loss, SINR, truncated-Shannon TBS and per-bit PRB costs.

Costs are ``phi = T^s / eta`` in PRB-subframes per bit; an unusable link
(SINR below the floor, or a D2D pair out of range) costs ``inf``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .config import PowerModel, RadioConfig, db_to_lin, dbm_to_w, lin_to_db
from .scenario import MACRO, SMALL, BaseStation, UserSet

_PL = {
    MACRO: (128.1, 37.6),
    SMALL: (140.7, 36.7),
    "d2d": (148.0, 40.0),
}


def path_loss(kind: str, distance):
    """Table-I path loss in dB for ``distance`` in metres (clamped below at 1 m)."""
    d = np.asarray(distance, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("path loss needs a strictly positive distance")
    a, b = _PL[kind]
    pl = a + b * np.log10(np.maximum(d, 1.0) / 1000.0)
    return float(pl) if pl.ndim == 0 else pl


def sinr(tx_power_per_prb: float, gain: float, interferers: Iterable[tuple[float, float]],
         noise_per_prb: float) -> float:
    """Linear SINR from dBm powers and dB gains."""
    s = db_to_lin(tx_power_per_prb + gain)
    i = sum(db_to_lin(p + g) for p, g in interferers)
    return s / (db_to_lin(noise_per_prb) + i)


def tbs(gamma, cfg: RadioConfig):
    """Bits per PRB per subframe: ``T^s r W log2(1 + gamma)``, truncated.

    Below the SINR floor the link carries nothing; above the cap it saturates.
    """
    g = np.asarray(gamma, dtype=float)
    lo, hi = db_to_lin(cfg.sinr_floor), db_to_lin(cfg.sinr_cap)
    eta = cfg.subframe * cfg.attenuation_factor * cfg.prb_bandwidth * np.log2(1.0 + np.minimum(g, hi))
    eta = np.where(g < lo, 0.0, eta)
    return float(eta) if eta.ndim == 0 else eta


def cost_from_tbs(eta, subframe: float):
    eta = np.asarray(eta, dtype=float)
    with np.errstate(divide="ignore"):
        phi = np.where(eta > 0, subframe / np.where(eta > 0, eta, 1.0), np.inf)
    return float(phi) if phi.ndim == 0 else phi


def noise_per_prb(cfg: RadioConfig, receiver: str) -> float:
    nf = cfg.ue_noise_figure if receiver == "ue" else cfg.bs_noise_figure
    return cfg.noise_density + 10.0 * math.log10(cfg.prb_bandwidth) + nf


def ul_power_dbm(gain_db, power: PowerModel, cfg: RadioConfig):
    """Per-PRB UE power under fractional power control, ``P_0 h^-xi``, capped."""
    return np.minimum(power.ul_target_power - power.compensation * np.asarray(gain_db, dtype=float),
                      cfg.ue_max_power)


@dataclass(frozen=True)
class LinkCostTable:
    """Link budgets and PRB costs for one snapshot.

    Orientation follows the transmit direction: ``phi_dl[k, i]`` (BS k to
    UE i), ``phi_ul[i, k]``.  D2D costs live in the band of the would-be
    cluster head: ``d2d_up[i, j]`` is member i sending to head j and
    ``d2d_down[j, i]`` is head j sending to member i.
    """

    phi_dl: np.ndarray
    phi_ul: np.ndarray
    d2d_up: np.ndarray
    d2d_down: np.ndarray
    gain_db: np.ndarray  # (B, U) BS-UE
    d2d_gain_db: np.ndarray  # (U, U)
    sinr_dl_db: np.ndarray
    sinr_ul_db: np.ndarray
    sinr_up_db: np.ndarray
    sinr_down_db: np.ndarray
    ul_power_w: np.ndarray  # (U, B) per-PRB UE power toward each BS
    serving: np.ndarray  # baseline BS per user; fixes D2D bands
    band: tuple[str, ...]
    subframe: float = 1e-3

    @property
    def n_users(self) -> int:
        return self.phi_ul.shape[0]

    @property
    def n_bs(self) -> int:
        return self.phi_dl.shape[0]

    @property
    def eta_dl(self):
        return _eta(self.phi_dl, self.subframe)

    @property
    def eta_ul(self):
        return _eta(self.phi_ul, self.subframe)

    @property
    def eta_up(self):
        return _eta(self.d2d_up, self.subframe)

    @property
    def eta_down(self):
        return _eta(self.d2d_down, self.subframe)

    def in_range(self) -> np.ndarray:
        """Pairs (i, j) with any usable D2D link between them."""
        return np.isfinite(self.d2d_gain_db) & ~np.eye(self.n_users, dtype=bool)


def _eta(phi, subframe):
    with np.errstate(divide="ignore"):
        return np.where(np.isfinite(phi), subframe / phi, 0.0)


def _distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    return np.maximum(d, 1.0)


def bs_gains_db(bss: Sequence[BaseStation], users: UserSet) -> np.ndarray:
    """(B, U) channel gain in dB (negative path loss)."""
    bpos = np.array([b.position for b in bss], dtype=float).reshape(-1, 2)
    d = _distances(bpos, users.positions)
    out = np.empty_like(d)
    for k, b in enumerate(bss):
        out[k] = -path_loss(b.kind, d[k])
    return out


def d2d_gains_db(users: UserSet, cfg: RadioConfig) -> np.ndarray:
    """(U, U) D2D gains in dB; pairs outside the candidate range are ``-inf``."""
    pos = users.positions
    g = -path_loss("d2d", _distances(pos, pos)) if len(pos) else np.empty((0, 0))
    snr = cfg.d2d_max_power + g - noise_per_prb(cfg, "ue")
    g = np.where(snr >= cfg.sinr_floor, g, -np.inf)
    np.fill_diagonal(g, -np.inf)
    return g


def build_cost_table(bss: Sequence[BaseStation], users: UserSet, cfg: RadioConfig, power: PowerModel,
                     serving: np.ndarray, occupancy: tuple[np.ndarray, np.ndarray] | None = None,
                     gain_db: np.ndarray | None = None) -> LinkCostTable:
    """Compute every BS-UE and in-range UE-UE cost for the current positions.

    ``serving`` is the baseline (RSRP) association: it defines which UEs
    interfere in which uplink band and whose band a D2D pair uses.  With
    ``occupancy=(dl, ul)`` per-cell PRB occupancy scales interferers
    (``activity_scaled`` mode); otherwise every co-band cell is fully loaded.
    """
    n_b, n_u = len(bss), len(users)
    serving = np.asarray(serving, dtype=int)
    gain_db = bs_gains_db(bss, users) if gain_db is None else gain_db
    glin = db_to_lin(gain_db)  # (B, U)
    band = tuple(b.band_id for b in bss)
    band_arr = np.array(band)
    same_band = band_arr[:, None] == band_arr[None, :]  # (B, B)
    if occupancy is None or cfg.interference_mode == "full_load":
        occ_dl, occ_ul = np.ones(n_b), np.ones(n_b)
    else:
        occ_dl, occ_ul = (np.clip(np.asarray(o, dtype=float), 0.0, 1.0) for o in occupancy)

    # downlink: per-PRB power is the BS power spread evenly over its PRBs
    p_bs = np.array([dbm_to_w(b.max_tx_power) / b.prb_budget_dl for b in bss]) * 1e3  # mW
    rx = p_bs[:, None] * glin  # (B, U)
    interf = (same_band * (1 - np.eye(n_b)) * occ_dl[None, :]) @ rx  # sum over co-band others
    n_ue = db_to_lin(noise_per_prb(cfg, "ue"))
    n_bs = db_to_lin(noise_per_prb(cfg, "bs"))
    sinr_dl = rx / (n_ue + interf)

    # uplink: each co-band cell contributes the mean power of its own users
    pu_dbm = ul_power_dbm(gain_db.T, power, cfg)  # (U, B) toward each BS
    pu_mw = db_to_lin(pu_dbm)
    own_mw = pu_mw[np.arange(n_u), serving] if n_u else np.empty(0)
    counts = np.bincount(serving, minlength=n_b).astype(float) if n_u else np.zeros(n_b)
    weight = np.zeros((n_u, n_b))
    if n_u:
        weight[np.arange(n_u), serving] = own_mw / counts[serving]
    weight *= occ_ul[None, :]
    cell_at_bs = glin @ weight  # (B, B): [k, q] mean interference of cell q at BS k
    ul_interf = ((same_band * (1 - np.eye(n_b))) * cell_at_bs).sum(axis=1)
    sinr_ul = (pu_mw * glin.T) / (n_bs + ul_interf[None, :])

    # D2D in the head's uplink band; the head's own cell is orthogonal
    g_uu_db = d2d_gains_db(users, cfg)
    g_uu = db_to_lin(g_uu_db)  # -inf -> 0
    p_d2d = db_to_lin(min(power.d2d_power, cfg.d2d_max_power))
    cell_at_ue = g_uu.T @ weight if n_u else np.zeros((0, n_b))  # [r, q]
    band_tot = cell_at_ue @ same_band.astype(float)  # [r, q] = sum over cells in q's band
    if n_u:
        # receiver r hears interference in the band of head h: cells co-band with serving[h], minus serving[h]
        i_up = band_tot[np.arange(n_u), serving] - cell_at_ue[np.arange(n_u), serving]  # head = receiver
        i_down = (band_tot[:, serving] - cell_at_ue[:, serving]).T  # [t, r], head = transmitter
    else:
        i_up = np.empty(0)
        i_down = np.empty((0, 0))
    s_d2d = p_d2d * g_uu
    sinr_up = s_d2d / (n_ue + i_up[None, :])
    sinr_down = s_d2d / (n_ue + i_down)

    def cost(s):
        return cost_from_tbs(tbs(s, cfg), cfg.subframe)

    in_range = np.isfinite(g_uu_db)
    phi_up = np.where(in_range, cost(sinr_up), np.inf)
    phi_down = np.where(in_range, cost(sinr_down), np.inf)
    return LinkCostTable(
        phi_dl=cost(sinr_dl), phi_ul=cost(sinr_ul), d2d_up=phi_up, d2d_down=phi_down,
        gain_db=gain_db, d2d_gain_db=g_uu_db,
        sinr_dl_db=lin_to_db(sinr_dl), sinr_ul_db=lin_to_db(sinr_ul),
        sinr_up_db=np.where(in_range, lin_to_db(sinr_up), -np.inf),
        sinr_down_db=np.where(in_range, lin_to_db(sinr_down), -np.inf),
        ul_power_w=pu_mw * 1e-3, serving=serving.copy(), band=band, subframe=cfg.subframe,
    )


def write_links_csv(table: LinkCostTable, path) -> int:
    """Dump every link as CSV rows ``src, dst, band, gain_db, sinr_db, eta_bits, phi``."""
    rows = 0
    eta_dl, eta_ul, eta_up, eta_down = table.eta_dl, table.eta_ul, table.eta_up, table.eta_down
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst", "band", "gain_db", "sinr_db", "eta_bits", "phi"])
        for k in range(table.n_bs):
            for i in range(table.n_users):
                w.writerow([f"bs{k}", f"ue{i}", f"{table.band[k]}-dl", _f(table.gain_db[k, i]),
                            _f(table.sinr_dl_db[k, i]), _f(eta_dl[k, i]), _f(table.phi_dl[k, i])])
                w.writerow([f"ue{i}", f"bs{k}", f"{table.band[k]}-ul", _f(table.gain_db[k, i]),
                            _f(table.sinr_ul_db[i, k]), _f(eta_ul[i, k]), _f(table.phi_ul[i, k])])
                rows += 2
        for i, j in zip(*np.nonzero(table.in_range())):
            # i -> j as member-to-head (band of j) and as head-to-member (band of i)
            w.writerow([f"ue{i}", f"ue{j}", f"{table.band[table.serving[j]]}-ul", _f(table.d2d_gain_db[i, j]),
                        _f(table.sinr_up_db[i, j]), _f(eta_up[i, j]), _f(table.d2d_up[i, j])])
            w.writerow([f"ue{i}", f"ue{j}", f"{table.band[table.serving[i]]}-ul", _f(table.d2d_gain_db[i, j]),
                        _f(table.sinr_down_db[i, j]), _f(eta_down[i, j]), _f(table.d2d_down[i, j])])
            rows += 2
    return rows


def _f(v) -> str:
    return repr(float(v))
