"""Line-oriented text snapshots of a scenario: BSs, users and the link-cost table.

Floats are written with ``repr`` so a round trip is exact; ``inf`` marks an
unusable link.  The layout is described in ``docs/formats.md``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .radio import LinkCostTable
from .scenario import BaseStation, UserSet

MAGIC = "d2dclust-snapshot"
VERSION = 1
MATRICES = ("phi_dl", "phi_ul", "d2d_up", "d2d_down", "gain_db", "d2d_gain_db", "sinr_dl_db",
            "sinr_ul_db", "sinr_up_db", "sinr_down_db", "ul_power_w")


class SnapshotError(ValueError):
    """Malformed or unsupported snapshot file."""


@dataclass
class Snapshot:
    bss: list[BaseStation]
    users: UserSet
    table: LinkCostTable


def _f(v) -> str:
    return repr(float(v))


def dumps(snap: Snapshot) -> str:
    out = [f"{MAGIC} {VERSION}"]
    for b in snap.bss:
        out.append(" ".join(["bs", str(b.id), b.kind, _f(b.position[0]), _f(b.position[1]), _f(b.max_tx_power),
                             b.band_id, _f(b.bandwidth), str(b.prb_budget_dl), str(b.prb_budget_ul),
                             str(b.macro_id)]))
    u = snap.users
    for i in range(len(u)):
        out.append(" ".join(["user", str(i), _f(u.x[i]), _f(u.y[i]), _f(u.heading[i]), _f(u.speed[i]),
                             _f(u.rate_dl[i]), _f(u.alpha[i]), str(u.kind[i])]))
    t = snap.table
    out.append("subframe " + _f(t.subframe))
    out.append("serving " + " ".join(str(int(s)) for s in t.serving))
    for name in MATRICES:
        m = np.asarray(getattr(t, name), dtype=float)
        out.append(f"matrix {name} {m.shape[0]} {m.shape[1]}")
        out.extend(" ".join(_f(v) for v in row) for row in m)
    out.append("end")
    return "\n".join(out) + "\n"


def write(snap: Snapshot, path) -> None:
    Path(path).write_text(dumps(snap))


def _float(tok: str, where: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise SnapshotError(f"{where}: not a number: {tok!r}") from None
    if v != v:
        raise SnapshotError(f"{where}: NaN is not allowed")
    return v


def loads(text: str, source: str = "<snapshot>") -> Snapshot:
    lines = text.splitlines()
    if not lines:
        raise SnapshotError(f"{source}: empty file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise SnapshotError(f"{source}:1: missing '{MAGIC} <version>' header")
    if head[1] != str(VERSION):
        raise SnapshotError(f"{source}:1: unsupported snapshot version {head[1]!r} (expected {VERSION})")
    bss: list[BaseStation] = []
    urows: list[list[str]] = []
    mats: dict[str, np.ndarray] = {}
    serving = None
    subframe = 1e-3
    n = 1
    ended = False
    while n < len(lines):
        where = f"{source}:{n + 1}"
        tok = lines[n].split()
        n += 1
        if not tok:
            continue
        tag = tok[0]
        if tag == "bs":
            if len(tok) != 11:
                raise SnapshotError(f"{where}: bs line needs 10 fields")
            bss.append(BaseStation(int(tok[1]), tok[2], (_float(tok[3], where), _float(tok[4], where)),
                                   _float(tok[5], where), tok[6], _float(tok[7], where), int(tok[8]),
                                   int(tok[9]), int(tok[10])))
        elif tag == "user":
            if len(tok) != 9:
                raise SnapshotError(f"{where}: user line needs 8 fields")
            urows.append(tok[2:])
        elif tag == "subframe":
            subframe = _float(tok[1], where)
        elif tag == "serving":
            serving = np.array([int(v) for v in tok[1:]], dtype=np.int64)
        elif tag == "matrix":
            name, r, c = tok[1], int(tok[2]), int(tok[3])
            if name not in MATRICES:
                raise SnapshotError(f"{where}: unknown matrix {name!r}")
            m = np.empty((r, c))
            for row in range(r):
                if n >= len(lines):
                    raise SnapshotError(f"{source}: matrix {name} truncated")
                vals = lines[n].split()
                if len(vals) != c:
                    raise SnapshotError(f"{source}:{n + 1}: {name} row {row} has {len(vals)} values, expected {c}")
                for col, v in enumerate(vals):
                    m[row, col] = _float(v, f"{source}:{n + 1}: {name}[{row},{col}]")
                n += 1
            mats[name] = m
        elif tag == "end":
            ended = True
            break
        else:
            raise SnapshotError(f"{where}: unknown record {tag!r}")
    if not ended:
        raise SnapshotError(f"{source}: missing 'end' record")
    missing = [m for m in MATRICES if m not in mats]
    if missing or serving is None:
        raise SnapshotError(f"{source}: missing sections: {', '.join(missing + ([] if serving is not None else ['serving']))}")
    cols = list(zip(*urows)) if urows else [[]] * 7
    num = [np.array([_float(v, f"{source}: user field") for v in c], dtype=float) for c in cols[:6]]
    users = UserSet(num[0], num[1], num[2], num[3], num[4], num[5], np.array(list(cols[6])))
    table = LinkCostTable(**mats, serving=serving, band=tuple(b.band_id for b in bss), subframe=subframe)
    _check_shapes(table, len(bss), len(users), source)
    return Snapshot(bss, users, table)


def _check_shapes(t: LinkCostTable, n_b: int, n_u: int, source: str) -> None:
    want = {"phi_dl": (n_b, n_u), "gain_db": (n_b, n_u), "sinr_dl_db": (n_b, n_u),
            "phi_ul": (n_u, n_b), "sinr_ul_db": (n_u, n_b), "ul_power_w": (n_u, n_b)}
    for f in fields(t):
        if f.name in MATRICES:
            shape = want.get(f.name, (n_u, n_u))
            if getattr(t, f.name).shape != shape:
                raise SnapshotError(f"{source}: matrix {f.name} has shape {getattr(t, f.name).shape}, expected {shape}")
    if t.serving.shape != (n_u,):
        raise SnapshotError(f"{source}: serving has {len(t.serving)} entries for {n_u} users")


def read(path) -> Snapshot:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot {p}: {exc.strerror or exc}") from None
    return loads(text, str(p))
