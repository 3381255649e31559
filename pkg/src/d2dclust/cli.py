"""Command-line front end.

Exit codes: 0 on success, 1 for config or snapshot errors, 2 when a
solver limit is exceeded.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import engine, kernels
from .association import AssociationState, associate_rsrp, write_association_csv
from .calb import run_calb
from .config import ConfigError, SimConfig, load_config
from .ecore import run_ecore
from .energy import ENERGY_COLUMNS
from .optimal import SolveLimits, SolverLimitError, solve_energy_constrained, solve_exact
from .radio import bs_gains_db, build_cost_table, write_links_csv
from .resources import objective
from .scenario import DeploymentError, deploy
from .snapshot import Snapshot, SnapshotError
from . import snapshot as snapshot_io

log = logging.getLogger("d2dclust")


def _resolve(args) -> SimConfig:
    over = {}
    if getattr(args, "seed", None) is not None:
        over["rng_seed"] = args.seed
    if getattr(args, "algo", None) and args.cmd in ("run", "energy-report"):
        over["algorithm"] = args.algo
    if getattr(args, "replications", None) is not None:
        over["replications"] = args.replications
    if getattr(args, "users", None) is not None:
        over["users_per_macro_area"] = args.users
    if getattr(args, "duration", None) is not None:
        over["sim_duration"] = args.duration
    for item in getattr(args, "set", None) or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        over[k.strip()] = v.strip()
    return load_config(args.config, overrides=over)


def _scenario(args) -> Snapshot:
    """The snapshot named on the command line, or the first drop of the configured scenario."""
    if getattr(args, "snapshot", None):
        return snapshot_io.read(args.snapshot)
    cfg = _resolve(args)
    bss, users = deploy(cfg.scenario, engine.rng_for(cfg.scenario.rng_seed, 0, engine.STREAM_DEPLOY))
    gain = bs_gains_db(bss, users)
    base = associate_rsrp(bss, gain, cfg.radio.cre_bias)
    table = build_cost_table(bss, users, cfg.radio, cfg.power, base.serving, None, gain)
    return Snapshot(bss, users, table)


def _out_file(args, default_name: str) -> Path:
    out = Path(args.out)
    if out.suffix == ".csv":
        out.parent.mkdir(parents=True, exist_ok=True)
        return out
    out.mkdir(parents=True, exist_ok=True)
    return out / default_name


def cmd_run(args) -> int:
    cfg = _resolve(args)
    res = engine.run(cfg, progress=log.info)
    paths = engine.write_outputs(res, args.out, cfg.scenario.rng_seed)
    for p in paths:
        print(p)
    return 0


def cmd_solve(args) -> int:
    snap = snapshot_io.read(args.snapshot)
    limits = SolveLimits(method=args.method, max_users=args.max_users, node_budget=args.node_budget)
    if args.energy_w is None:
        rep = solve_exact(snap.users, snap.bss, snap.table, limits)
    else:
        cfg = _resolve(args)
        rep = solve_energy_constrained(snap.users, snap.bss, snap.table, cfg.power, args.energy_w, limits)
    print(f"objective {rep.best_objective!r}")
    print(f"method {rep.method}")
    print(f"nodes {rep.nodes_explored}")
    print(f"proven_optimal {str(rep.proven_optimal).lower()}")
    clusters = rep.best_assoc.clusters
    print(f"clusters {len(clusters)}")
    for h, members in clusters.items():
        print(f"  head {h} bs {int(rep.best_assoc.serving[h])} members {' '.join(map(str, members))}")
    return 0


def cmd_cluster(args) -> int:
    snap = _scenario(args)
    cfg = _resolve(args)
    base = AssociationState(snap.table.serving.copy(), np.full(len(snap.users), -1), len(snap.bss))
    if args.algo == "core":
        state = run_ecore(snap.users, snap.table, base, intra_cell_only=True).state
    else:
        state = run_ecore(snap.users, snap.table, base).state
        if args.algo == "calb":
            state = run_calb(snap.bss, snap.users, state, snap.table, cfg.calb).state
    path = _out_file(args, f"clusters_{args.algo}.csv")
    write_association_csv(state, path)
    print(f"objective_before {objective(base, snap.table, snap.users)!r}")
    print(f"objective_after {objective(state, snap.table, snap.users)!r}")
    print(f"clusters {state.n_clusters}")
    print(path)
    return 0


def cmd_dump_links(args) -> int:
    snap = _scenario(args)
    path = _out_file(args, "links.csv")
    n = write_links_csv(snap.table, path)
    print(f"{n} links -> {path}")
    return 0


def cmd_dump_association(args) -> int:
    snap = _scenario(args)
    state = AssociationState(snap.table.serving.copy(), np.full(len(snap.users), -1), len(snap.bss))
    path = _out_file(args, "association.csv")
    write_association_csv(state, path)
    print(path)
    return 0


def cmd_snapshot(args) -> int:
    snap = _scenario(args)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    snapshot_io.write(snap, path)
    print(path)
    return 0


def cmd_energy_report(args) -> int:
    cfg = _resolve(args)
    if len(cfg.engine.algorithms) != 1:
        raise ConfigError("energy-report needs exactly one algorithm")
    res = engine.run(cfg, progress=log.info)
    algo = cfg.engine.algorithms[0]
    path = _out_file(args, f"energy_{algo}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replication"] + list(ENERGY_COLUMNS))
        for rep, led in enumerate(res.results[algo].ledgers):
            for row in led.rows():
                w.writerow([rep] + row)
    print(path)
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default="default", help="key = value config file, or 'default'")
    p.add_argument("--seed", type=int, help="override rng_seed")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="d2dclust", description="D2D clustering simulator for FDD cellular networks")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="simulate and write metric CSVs")
    _common(p)
    p.add_argument("--algo", help="comma-separated algorithm list")
    p.add_argument("--out", default="out")
    p.add_argument("--replications", type=int)
    p.add_argument("--users", type=int, help="users per macro area")
    p.add_argument("--duration", type=float, help="simulated seconds per replication")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("solve", help="exact solver on a snapshot")
    _common(p)
    p.add_argument("snapshot")
    p.add_argument("--method", choices=("auto", "exhaustive", "bnb"), default="auto")
    p.add_argument("--energy-w", type=float, help="solve with the head power constraint at this w")
    p.add_argument("--max-users", type=int, default=SolveLimits.max_users)
    p.add_argument("--node-budget", type=int, default=SolveLimits.node_budget)
    p.set_defaults(func=cmd_solve)

    for name, func, default, helptext in (
            ("cluster", cmd_cluster, "clusters.csv", "run a clustering heuristic once"),
            ("dump-links", cmd_dump_links, "links.csv", "write the link-cost table"),
            ("dump-association", cmd_dump_association, "association.csv", "write the RSRP association"),
            ("snapshot", cmd_snapshot, "scenario.snap", "write a scenario snapshot")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--snapshot", help="read the scenario from this snapshot instead of deploying")
        p.add_argument("--users", type=int, help="users per macro area")
        p.add_argument("--out", default="out" if name != "snapshot" else default)
        if name == "cluster":
            p.add_argument("--algo", choices=("ecore", "core", "calb"), default="ecore")
        p.set_defaults(func=func)

    p = sub.add_parser("energy-report", help="per-user energy ledger CSV")
    _common(p)
    p.add_argument("--algo", default="ecore+ceea")
    p.add_argument("--out", default="out")
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--users", type=int)
    p.add_argument("--duration", type=float)
    p.set_defaults(func=cmd_energy_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        return args.func(args)
    except (ConfigError, SnapshotError, DeploymentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
