"""Time-stepped simulation: mobility, link costs, clustering, random PRB scheduling, metrics.

Every replication drops a fresh network.  All selected algorithms run on
the same drop, the same mobility trace and the same link-cost tables, so
their results are paired per seed.  Cell-level metrics come from the
central macro and its small cells; per-user metrics from the users
dropped in the central macro area.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .association import AssociationState, associate_rsrp
from .calb import run_calb
from .config import ALGORITHMS, ConfigError, SimConfig
from .ecore import run_ecore
from .energy import EnergyLedger, WindowTraffic, window_energy
from .optimal import SolveLimits, SolverLimitError, solve_energy_constrained, solve_exact
from .radio import LinkCostTable, bs_gains_db, build_cost_table
from .resources import load_clustered, smul
from .scenario import BaseStation, UserSet, deploy, scenario_bounds, step_mobility

log = logging.getLogger(__name__)

STREAM_DEPLOY, STREAM_MOBILITY, STREAM_SCHEDULE = 0, 1, 2


def rng_for(seed: int, rep: int, stream: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng([seed, rep, stream, *extra])


@dataclass(frozen=True)
class MetricsFrame:
    """One algorithm at one timestep of one replication (central cells only)."""

    replication: int
    step: int
    time: float
    algorithm: str
    se_dl: float  # bits/s/Hz over granted PRBs
    se_ul: float
    se_total: float
    thr_dl: float  # served bits/s
    thr_ul: float
    offered_dl: float
    n_clusters: int
    mean_cluster_size: float  # head included; nan without clusters
    objective: float  # expected PRBs/subframe, whole network
    load_dl: float  # expected DL PRBs/subframe in the central cells
    n_banned: int


@dataclass
class AlgoResult:
    frames: list[MetricsFrame] = field(default_factory=list)
    overconsumption: list[np.ndarray] = field(default_factory=list)  # per replication, central users
    efficiency: list[np.ndarray] = field(default_factory=list)  # bits/J
    user_throughput: list[np.ndarray] = field(default_factory=list)  # DL bits/s
    calb_actions: list = field(default_factory=list)
    ledgers: list[EnergyLedger] = field(default_factory=list)


@dataclass
class RunResult:
    config: SimConfig
    algorithms: tuple[str, ...]
    results: dict[str, AlgoResult]

    def summary_rows(self) -> list[dict]:
        rows = []
        for a in self.algorithms:
            r = self.results[a]
            fr = r.frames
            n_cl = np.array([f.n_clusters for f in fr], dtype=float)
            sizes = np.array([f.mean_cluster_size * f.n_clusters if f.n_clusters else 0.0 for f in fr])
            w = np.concatenate(r.overconsumption) if r.overconsumption else np.zeros(0)
            ee = np.concatenate(r.efficiency) if r.efficiency else np.zeros(0)
            rows.append({
                "algorithm": a,
                "se_dl": _mean([f.se_dl for f in fr]),
                "se_ul": _mean([f.se_ul for f in fr]),
                "se_total": _mean([f.se_total for f in fr]),
                "thr_dl": _mean([f.thr_dl for f in fr]),
                "thr_ul": _mean([f.thr_ul for f in fr]),
                "offered_dl": _mean([f.offered_dl for f in fr]),
                "avg_num_clusters": _mean(n_cl),
                "avg_cluster_size": float(sizes.sum() / n_cl.sum()) if n_cl.sum() else float("nan"),
                "objective": _mean([f.objective for f in fr]),
                "w_mean": _mean(w),
                "w_p99": float(np.percentile(w, 99)) if len(w) else float("nan"),
                "w_frac_le_0.3": float(np.mean(w <= 0.3)) if len(w) else float("nan"),
                "energy_efficiency": _mean(ee[np.isfinite(ee)]),
            })
        return rows


def _mean(v) -> float:
    v = np.asarray(v, dtype=float)
    v = v[~np.isnan(v)]
    return float(v.mean()) if len(v) else float("nan")


def central_cells(bss: Sequence[BaseStation]) -> np.ndarray:
    return np.array([b.macro_id == 0 for b in bss])


# --- scheduling ---------------------------------------------------------------------------

def schedule_random(demand, budget: int, rng: np.random.Generator, subframes: int):
    """Random-order PRB grants for one cell and band over ``subframes`` subframes.

    ``demand`` is PRBs per subframe per flow; unusable (non-finite) flows ask
    for nothing and larger ones are capped at the budget.  Returns
    (requested, granted) PRB totals per flow.
    """
    demand = np.asarray(demand, dtype=float)
    f = len(demand)
    if f == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    u = rng.random((subframes, f))
    order = np.argsort(rng.random((subframes, f)), axis=1).astype(np.int64)
    d = np.where(np.isfinite(demand), np.minimum(demand, budget), 0.0)
    return kernels.schedule(np.ascontiguousarray(d), int(budget), u, np.ascontiguousarray(order))


@dataclass
class StepService:
    frac_dl: np.ndarray  # end-to-end served fraction per user
    frac_ul: np.ndarray
    prb_dl: np.ndarray  # granted PRBs per subframe per cell
    prb_ul: np.ndarray


def serve(bss, users: UserSet, table: LinkCostTable, state: AssociationState, rng, subframes: int) -> StepService:
    """Schedule every cell's DL and UL band and turn grants into served fractions."""
    n, n_b = len(users), len(bss)
    idx = np.arange(n)
    cell = state.cell()
    mem = state.head >= 0
    carrier = np.where(mem, state.head, idx)
    rd, ru = users.rate_dl, users.rate_ul
    dem_dl = smul(rd, table.phi_dl[cell, carrier])
    dem_fwd = smul(ru, table.phi_ul[carrier, cell])  # own UL, or the head forwarding it
    hh = np.where(mem, state.head, 0)
    dem_down = np.where(mem, smul(rd, table.d2d_down[hh, idx]), 0.0)
    dem_up = np.where(mem, smul(ru, table.d2d_up[idx, hh]), 0.0)

    f_dl, f_fwd = np.ones(n), np.ones(n)
    f_down, f_up = np.ones(n), np.ones(n)
    prb_dl, prb_ul = np.zeros(n_b), np.zeros(n_b)

    def run(flow_dem, budget):
        req, got = schedule_random(flow_dem, budget, rng, subframes)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(req > 0, got / np.maximum(req, 1), 1.0)
        frac = np.where(np.isfinite(flow_dem), frac, 0.0)
        frac = np.where(flow_dem == 0, 1.0, frac)
        return frac, got.sum() / subframes

    for k, bs in enumerate(bss):
        users_k = np.flatnonzero(cell == k)
        if not len(users_k):
            continue
        frac, used = run(dem_dl[users_k], bs.prb_budget_dl)
        f_dl[users_k] = frac
        prb_dl[k] = used
        m_k = users_k[mem[users_k]]
        ul = np.concatenate([dem_fwd[users_k], dem_down[m_k], dem_up[m_k]])
        frac, used = run(ul, bs.prb_budget_ul)
        nk = len(users_k)
        f_fwd[users_k] = frac[:nk]
        f_down[m_k] = frac[nk:nk + len(m_k)]
        f_up[m_k] = frac[nk + len(m_k):]
        prb_ul[k] = used
    frac_dl = np.where(mem, np.minimum(f_dl, f_down), f_dl)
    frac_ul = np.where(mem, np.minimum(f_fwd, f_up), f_fwd)
    return StepService(frac_dl, frac_ul, prb_dl, prb_ul)


# --- clustering pipelines ------------------------------------------------------------------

@dataclass
class AlgoState:
    name: str
    ledger: EnergyLedger
    rng: np.random.Generator
    state: AssociationState | None = None
    bits_dl: np.ndarray | None = None
    bits_ul: np.ndarray | None = None
    occupancy: tuple | None = None


def cluster(name: str, bss, users: UserSet, table: LinkCostTable, base: AssociationState, cfg: SimConfig,
            banned=(), actions: list | None = None) -> AssociationState:
    """Apply one named pipeline to the RSRP baseline."""
    if name == "none":
        return base
    if name in ("optimal", "energy_constrained"):
        limits = SolveLimits(max_users=cfg.engine.solver_max_users, node_budget=cfg.engine.solver_node_budget)
        if name == "optimal":
            return solve_exact(users, bss, table, limits).best_assoc
        return solve_energy_constrained(users, bss, table, cfg.power, cfg.engine.energy_w, limits).best_assoc
    if name == "core":
        return run_ecore(users, table, base, intra_cell_only=True).state
    ceea = name.endswith("+ceea")
    state = run_ecore(users, table, base, banned=banned if ceea else ()).state
    if "+calb" in name:
        res = run_calb(bss, users, state, table, cfg.calb)
        if actions is not None:
            actions.extend(res.actions)
        state = res.state
    return state


def check_startup(cfg: SimConfig) -> None:
    n_users = cfg.scenario.num_macro * cfg.scenario.users_per_macro_area
    for a in cfg.engine.algorithms:
        if a not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {a!r}")
        if a in ("optimal", "energy_constrained") and n_users > cfg.engine.solver_max_users:
            raise SolverLimitError(f"algorithm {a} needs <= {cfg.engine.solver_max_users} users, "
                                   f"the scenario has {n_users}")


def run(cfg: SimConfig, progress: Callable[[str], None] | None = None,
        observer: Callable[..., None] | None = None) -> RunResult:
    """Run every replication for every configured algorithm.

    ``observer(rep, step, name, bss, users, table, base, state, actions)`` is
    called after every re-clustering, with the CaLB actions of that pass.
    """
    cfg.validate()
    check_startup(cfg)
    algos = cfg.engine.algorithms
    results = {a: AlgoResult() for a in algos}
    for rep in range(cfg.engine.replications):
        _replication(cfg, rep, algos, results, observer)
        if progress:
            progress(f"replication {rep + 1}/{cfg.engine.replications} done")
    return RunResult(cfg, algos, results)


def _replication(cfg: SimConfig, rep: int, algos, results: dict[str, AlgoResult], observer=None) -> None:
    sc, radio, power = cfg.scenario, cfg.radio, cfg.power
    seed = sc.rng_seed
    bss, users = deploy(sc, rng_for(seed, rep, STREAM_DEPLOY))
    bounds = scenario_bounds(sc)
    mob = rng_for(seed, rep, STREAM_MOBILITY)
    n = len(users)
    central = central_cells(bss)
    home = np.zeros(n, dtype=bool)
    home[:sc.users_per_macro_area] = True  # users are dropped macro by macro, centre first
    dt = sc.timestep
    n_steps = int(round(sc.sim_duration / dt))
    every = max(1, int(round(cfg.engine.recluster_interval / dt)))
    subframes = cfg.engine.subframes_per_step
    ts = radio.subframe

    runs = [AlgoState(a, EnergyLedger(n, cfg.ceea), rng_for(seed, rep, STREAM_SCHEDULE, ALGORITHMS.index(a)),
                      bits_dl=np.zeros(n), bits_ul=np.zeros(n)) for a in algos]
    shared: dict = {}
    for step in range(n_steps):
        if step:
            users = step_mobility(users, dt, bounds, mob)
        gain_db = bs_gains_db(bss, users)
        base = associate_rsrp(bss, gain_db, radio.cre_bias)
        shared.clear()
        for st in runs:
            if radio.interference_mode == "activity_scaled" and st.occupancy is not None:
                table = build_cost_table(bss, users, radio, power, base.serving, st.occupancy, gain_db)
            else:
                if "table" not in shared:
                    shared["table"] = build_cost_table(bss, users, radio, power, base.serving, None, gain_db)
                table = shared["table"]
            res = results[st.name]
            if step % every == 0 or st.state is None:
                banned = np.flatnonzero(st.ledger.banned).tolist()
                actions: list = []
                st.state = cluster(st.name, bss, users, table, base, cfg, banned, actions)
                res.calb_actions.extend(actions)
                problems = st.state.validate()
                if problems:
                    raise RuntimeError(f"{st.name} produced an invalid association: {problems[:5]}")
                if observer is not None:
                    observer(rep, step, st.name, bss, users, table, base, st.state, actions)
            state = st.state
            svc = serve(bss, users, table, state, st.rng, subframes)
            bits_dl = users.rate_dl * dt * svc.frac_dl
            bits_ul = users.rate_ul * dt * svc.frac_ul
            st.bits_dl += bits_dl
            st.bits_ul += bits_ul
            e, e_cf = window_energy(dt, WindowTraffic(bits_dl, bits_ul), state, base.serving, table, power, ts)
            roles = state.roles
            st.ledger.accumulate(e, e_cf, roles, dt)
            if st.ledger.subperiod_due():
                st.ledger.close_subperiod(roles, enforce=st.name.endswith("+ceea"))
            budget_dl = np.array([b.prb_budget_dl for b in bss], dtype=float)
            budget_ul = np.array([b.prb_budget_ul for b in bss], dtype=float)
            st.occupancy = (svc.prb_dl / budget_dl, svc.prb_ul / budget_ul)
            res.frames.append(_frame(rep, step, dt, st.name, bss, users, table, state, svc, bits_dl, bits_ul,
                                     central, central[base.serving], st.ledger))

    for st in runs:
        res = results[st.name]
        led = st.ledger
        if led.sub_elapsed > 0:  # a trailing partial subperiod still counts for the metric
            st.ledger.close_subperiod(st.state.roles if st.state is not None else np.full(n, "N"), enforce=False)
        res.overconsumption.append(led.overconsumption()[home])
        with np.errstate(divide="ignore", invalid="ignore"):
            ee = (st.bits_dl + st.bits_ul) / led.total_E
        res.efficiency.append(ee[home])
        res.user_throughput.append(st.bits_dl[home] / (n_steps * dt))
        res.ledgers.append(led)


def _frame(rep, step, dt, name, bss, users, table, state, svc: StepService, bits_dl, bits_ul, central,
           home, ledger: EnergyLedger) -> MetricsFrame:
    # spectral efficiency: bits carried by the central cells over the PRBs they granted;
    # throughput: users the central cells would serve without clustering
    in_c = central[state.cell()]
    w_hz = 180e3
    dl_hz_s = svc.prb_dl[central].sum() * dt * w_hz  # PRBs per subframe -> Hz * s
    ul_hz_s = svc.prb_ul[central].sum() * dt * w_hz
    b_dl, b_ul = bits_dl[in_c].sum(), bits_ul[in_c].sum()
    clusters = state.clusters
    sizes = [len(m) + 1 for h, m in clusters.items() if central[state.serving[h]]]
    load = load_clustered(users, table, state)
    return MetricsFrame(
        replication=rep, step=step, time=step * dt, algorithm=name,
        se_dl=float(b_dl / dl_hz_s) if dl_hz_s else float("nan"),
        se_ul=float(b_ul / ul_hz_s) if ul_hz_s else float("nan"),
        se_total=float((b_dl + b_ul) / (dl_hz_s + ul_hz_s)) if dl_hz_s + ul_hz_s else float("nan"),
        thr_dl=float(bits_dl[home].sum() / dt), thr_ul=float(bits_ul[home].sum() / dt),
        offered_dl=float(users.rate_dl[home].sum()),
        n_clusters=len(sizes), mean_cluster_size=float(np.mean(sizes)) if sizes else float("nan"),
        objective=load.total, load_dl=float(load.per_bs_dl[central].sum()),
        n_banned=int(ledger.banned.sum()),
    )


# --- output --------------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_outputs(result: RunResult, out_dir, seed: int | None = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    p = out / "metrics.csv"
    names = [f.name for f in dataclasses.fields(MetricsFrame)]
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for a in result.algorithms:
            for fr in result.results[a].frames:
                w.writerow([_fmt(getattr(fr, k)) for k in names])
    paths.append(p)

    for fname, attr, col in (("cdf_overconsumption.csv", "overconsumption", "w"),
                             ("cdf_energy_efficiency.csv", "efficiency", "bits_per_joule")):
        p = out / fname
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["algorithm", col, "cdf"])
            for a in result.algorithms:
                vals = getattr(result.results[a], attr)
                v = np.sort(np.concatenate(vals)) if vals else np.zeros(0)
                v = v[np.isfinite(v)]
                for i, x in enumerate(v):
                    w.writerow([a, _fmt(x), _fmt((i + 1) / len(v))])
        paths.append(p)

    p = out / "summary.csv"
    rows = result.summary_rows()
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        if rows:
            w.writerow(list(rows[0]))
            for r in rows:
                w.writerow([_fmt(v) for v in r.values()])
    paths.append(p)

    p = out / "manifest"
    sd = result.config.scenario.rng_seed if seed is None else seed
    p.write_text(f"seed = {sd}\nbackend = {kernels.BACKEND}\n" + result.config.to_text())
    paths.append(p)
    return paths
