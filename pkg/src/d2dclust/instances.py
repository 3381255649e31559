"""Small random instances for solver tests and the optimality-gap check."""

from __future__ import annotations

import math

import numpy as np

from .association import associate_rsrp
from .config import PowerModel, RadioConfig
from .radio import bs_gains_db, build_cost_table
from .scenario import FTP, MACRO, SMALL, VOIP, BaseStation, UserSet


def random_instance(rng: np.random.Generator, n_users: int, n_bs: int = 3, isd: float = 500.0,
                    radius: float | None = None, radio: RadioConfig | None = None,
                    power: PowerModel | None = None):
    """Three co-band macros around a shared hex corner plus ``n_bs - 3`` small cells.

    Users are uniform in a disc around the corner, where the macros
    interfere most, so D2D relaying has something to gain.  With
    ``n_bs < 3`` only the first macros are kept.
    Returns (bss, users, table, baseline association).
    """
    radio = radio or RadioConfig()
    power = power or PowerModel()
    r_site = isd / math.sqrt(3.0)  # corner-to-site distance
    radius = r_site if radius is None else radius
    bss = []
    for k in range(min(n_bs, 3)):
        a = math.pi / 2 + 2 * math.pi * k / 3
        bss.append(BaseStation.make(k, MACRO, (r_site * math.cos(a), r_site * math.sin(a)), k))
    for k in range(3, n_bs):
        r = rng.uniform(0.2, 0.8) * radius
        a = rng.uniform(0, 2 * math.pi)
        bss.append(BaseStation.make(k, SMALL, (r * math.cos(a), r * math.sin(a)), 0))
    r = radius * np.sqrt(rng.random(n_users))
    a = rng.uniform(0, 2 * math.pi, n_users)
    voip = rng.random(n_users) < 0.5
    users = UserSet.from_arrays(np.column_stack([r * np.cos(a), r * np.sin(a)]),
                                np.where(voip, 64e3, 700e3), np.where(voip, 1.0, 0.05),
                                kind=np.where(voip, VOIP, FTP))
    gain = bs_gains_db(bss, users)
    base = associate_rsrp(bss, gain, radio.cre_bias)
    table = build_cost_table(bss, users, radio, power, base.serving, None, gain)
    return bss, users, table, base
