"""Deployment geometry, user drop and hit-and-bounce pedestrian mobility."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .config import ScenarioConfig

MACRO, SMALL = "macro", "small"
VOIP, FTP = "voip", "ftp"

MAX_SC_REDRAWS = 10_000

# Default BS figures by kind.
_BS_DEFAULTS = {
    MACRO: dict(max_tx_power=46.0, bandwidth=10.0, prb=50),
    SMALL: dict(max_tx_power=27.0, bandwidth=5.0, prb=25),
}


class DeploymentError(RuntimeError):
    pass


@dataclass(frozen=True)
class BaseStation:
    id: int
    kind: str
    position: tuple[float, float]
    max_tx_power: float  # dBm
    band_id: str
    bandwidth: float  # MHz
    prb_budget_dl: int
    prb_budget_ul: int
    macro_id: int  # owning macro area

    @classmethod
    def make(cls, id: int, kind: str, position, macro_id: int) -> "BaseStation":
        d = _BS_DEFAULTS[kind]
        return cls(id, kind, (float(position[0]), float(position[1])), d["max_tx_power"], kind,
                   d["bandwidth"], d["prb"], d["prb"], macro_id)


@dataclass(frozen=True)
class TrafficProfile:
    rate_dl: float  # bits/s
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.rate_dl < 0:
            raise ValueError("rate_dl must be >= 0")

    @property
    def rate_ul(self) -> float:
        return self.alpha * self.rate_dl


@dataclass(frozen=True)
class UserEquipment:
    """Single-user view; the simulator itself works on :class:`UserSet`."""

    id: int
    position: tuple[float, float]
    heading: float
    speed: float  # m/s
    profile: TrafficProfile
    kind: str
    role: str = "N"
    serving_bs: int | None = None
    cluster_id: int | None = None


@dataclass(frozen=True)
class UserSet:
    """Struct-of-arrays user population."""

    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    speed: np.ndarray
    rate_dl: np.ndarray
    alpha: np.ndarray
    kind: np.ndarray  # VOIP / FTP labels

    def __len__(self) -> int:
        return len(self.x)

    @property
    def rate_ul(self) -> np.ndarray:
        return self.alpha * self.rate_dl

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def user(self, i: int) -> UserEquipment:
        return UserEquipment(i, (float(self.x[i]), float(self.y[i])), float(self.heading[i]),
                             float(self.speed[i]), TrafficProfile(float(self.rate_dl[i]), float(self.alpha[i])),
                             str(self.kind[i]))

    @classmethod
    def from_arrays(cls, positions, rate_dl, alpha, heading=None, speed=None, kind=None) -> "UserSet":
        pos = np.asarray(positions, dtype=float).reshape(-1, 2)
        n = len(pos)
        rate_dl = np.broadcast_to(np.asarray(rate_dl, dtype=float), (n,)).copy()
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (n,)).copy()
        heading = np.zeros(n) if heading is None else np.asarray(heading, dtype=float)
        speed = np.zeros(n) if speed is None else np.broadcast_to(np.asarray(speed, dtype=float), (n,)).copy()
        kind = np.array([FTP] * n) if kind is None else np.asarray(kind)
        return cls(pos[:, 0].copy(), pos[:, 1].copy(), heading, speed, rate_dl, alpha, kind)

    @classmethod
    def from_users(cls, users: Sequence[UserEquipment]) -> "UserSet":
        return cls.from_arrays([u.position for u in users], [u.profile.rate_dl for u in users],
                               [u.profile.alpha for u in users], [u.heading for u in users],
                               [u.speed for u in users], [u.kind for u in users])

    def subset(self, idx) -> "UserSet":
        idx = np.asarray(idx)
        return UserSet(*(getattr(self, f)[idx] for f in ("x", "y", "heading", "speed", "rate_dl", "alpha", "kind")))


@dataclass(frozen=True)
class Bounds:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def contains(self, x, y) -> np.ndarray:
        return (x > self.xmin) & (x < self.xmax) & (y > self.ymin) & (y < self.ymax)


def hex_sites(n: int, isd: float) -> np.ndarray:
    """Centre site followed by rings of a hexagonal grid, ``n`` sites total."""
    sites = [(0.0, 0.0)]
    ring = 1
    while len(sites) < n:
        # walk the hexagonal ring of radius `ring`
        corners = [(isd * ring * math.cos(math.radians(30 + 60 * c)),
                    isd * ring * math.sin(math.radians(30 + 60 * c))) for c in range(6)]
        for c in range(6):
            (x0, y0), (x1, y1) = corners[c], corners[(c + 1) % 6]
            for s in range(ring):
                f = s / ring
                sites.append((x0 + f * (x1 - x0), y0 + f * (y1 - y0)))
        ring += 1
    return np.array(sites[:n])


def _in_hex(dx, dy, radius):
    # Cell hexagon with vertices at 0, 60, ... degrees (neighbours sit at 30 + 60k).
    ax, ay = np.abs(dx), np.abs(dy)
    return (ay <= radius * math.sqrt(3) / 2) & (math.sqrt(3) * ax + ay <= math.sqrt(3) * radius)


def _uniform_in_hex(rng: np.random.Generator, centre, radius: float, n: int) -> np.ndarray:
    out = np.empty((0, 2))
    h = radius * math.sqrt(3) / 2
    while len(out) < n:
        cand = rng.uniform([-radius, -h], [radius, h], size=(2 * (n - len(out)) + 4, 2))
        keep = cand[_in_hex(cand[:, 0], cand[:, 1], radius)]
        out = np.vstack([out, keep])
    return out[:n] + np.asarray(centre)


def scenario_bounds(config: ScenarioConfig) -> Bounds:
    sites = hex_sites(config.num_macro, config.inter_site_distance)
    m = config.inter_site_distance
    return Bounds(sites[:, 0].min() - m, sites[:, 0].max() + m, sites[:, 1].min() - m, sites[:, 1].max() + m)


def deploy(config: ScenarioConfig, rng: np.random.Generator | None = None) -> tuple[list[BaseStation], UserSet]:
    """Macro hex layout, rejection-sampled small cells and a uniform user drop.

    Ids: macros first (centre macro is id 0), then small cells grouped by
    owning macro.  Deterministic for a given ``rng_seed`` when ``rng`` is None.
    """
    config.validate()
    rng = np.random.default_rng(config.rng_seed) if rng is None else rng
    isd = config.inter_site_distance
    radius = isd / math.sqrt(3)
    sites = hex_sites(config.num_macro, isd)
    bss = [BaseStation.make(m, MACRO, sites[m], m) for m in range(config.num_macro)]

    for m in range(config.num_macro):
        placed: list[np.ndarray] = []
        redraws = 0
        while len(placed) < config.small_cells_per_macro:
            p = _uniform_in_hex(rng, sites[m], radius, 1)[0]
            ok = np.hypot(*(p - sites[m])) >= config.min_enb_sc_distance and all(
                np.hypot(*(p - q)) >= config.min_sc_sc_distance for q in placed)
            if ok:
                placed.append(p)
                continue
            redraws += 1
            if redraws > MAX_SC_REDRAWS:
                raise DeploymentError(f"could not place small cells around macro {m} "
                                      f"after {MAX_SC_REDRAWS} redraws")
        for p in placed:
            bss.append(BaseStation.make(len(bss), SMALL, p, m))

    n_per = config.users_per_macro_area
    pos = np.vstack([_uniform_in_hex(rng, sites[m], radius, n_per) for m in range(config.num_macro)]) \
        if n_per else np.empty((0, 2))
    n = len(pos)
    n_voip = int(round(config.voip_fraction * n))
    voip = np.zeros(n, dtype=bool)
    voip[rng.permutation(n)[:n_voip]] = True
    kind = np.where(voip, VOIP, FTP)
    rate_dl = np.where(voip, config.voip_rate, config.ftp_rate)
    alpha = np.where(voip, 1.0, config.ftp_alpha)
    heading = rng.uniform(0.0, 2 * math.pi, n)
    speed = np.full(n, config.user_speed / 3.6)
    users = UserSet(pos[:, 0].copy(), pos[:, 1].copy(), heading, speed, rate_dl.astype(float), alpha.astype(float), kind)
    return bss, users


def _inward_heading(rng, left, right, below, above):
    """Uniform heading pointing away from every violated wall."""
    lo, hi = 0.0, 2 * math.pi
    # Allowed direction arcs for each wall, intersected; corners give a quarter circle.
    if left and below:
        lo, hi = 0.0, math.pi / 2
    elif left and above:
        lo, hi = -math.pi / 2, 0.0
    elif right and below:
        lo, hi = math.pi / 2, math.pi
    elif right and above:
        lo, hi = math.pi, 1.5 * math.pi
    elif left:
        lo, hi = -math.pi / 2, math.pi / 2
    elif right:
        lo, hi = math.pi / 2, 1.5 * math.pi
    elif below:
        lo, hi = 0.0, math.pi
    elif above:
        lo, hi = math.pi, 2 * math.pi
    return lo + (hi - lo) * rng.random()


def step_mobility(users: UserSet, timestep: float, bounds: Bounds, rng: np.random.Generator) -> UserSet:
    """Advance every user by ``speed * timestep``; bounce off the walls.

    A user crossing a wall is mirrored back inside and given a fresh
    uniformly drawn heading that points into the scenario.
    """
    if timestep <= 0:
        raise ValueError("timestep must be > 0")
    x = users.x + users.speed * timestep * np.cos(users.heading)
    y = users.y + users.speed * timestep * np.sin(users.heading)
    heading = users.heading.copy()
    out = ~bounds.contains(x, y)
    for i in np.flatnonzero(out):
        left, right = x[i] <= bounds.xmin, x[i] >= bounds.xmax
        below, above = y[i] <= bounds.ymin, y[i] >= bounds.ymax
        x[i] = _reflect(x[i], bounds.xmin, bounds.xmax)
        y[i] = _reflect(y[i], bounds.ymin, bounds.ymax)
        heading[i] = _inward_heading(rng, left, right, below, above)
    return replace(users, x=x, y=y, heading=heading)


def _reflect(v: float, lo: float, hi: float) -> float:
    if v <= lo:
        v = 2 * lo - v
    elif v >= hi:
        v = 2 * hi - v
    # overshoot wider than the box, or landing exactly on the wall
    eps = 1e-9 * (hi - lo)
    return min(max(v, lo + eps), hi - eps)
