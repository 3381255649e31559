"""User-to-BS and user-to-head association, RSRP baseline and constraint checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scenario import SMALL, BaseStation


@dataclass(frozen=True)
class AssociationState:
    """Compact form of the binary X / Y matrices.

    ``serving[i]`` is the BS of a directly attached user and -1 for members;
    ``head[i]`` is the head of a member and -1 otherwise.  Members are
    accounted at their head's serving BS.
    """

    serving: np.ndarray
    head: np.ndarray
    n_bs: int

    def __post_init__(self):
        object.__setattr__(self, "serving", np.asarray(self.serving, dtype=np.int64))
        object.__setattr__(self, "head", np.asarray(self.head, dtype=np.int64))

    @property
    def n_users(self) -> int:
        return len(self.serving)

    @property
    def x(self) -> np.ndarray:
        x = np.zeros((self.n_users, self.n_bs), dtype=np.int8)
        att = self.serving >= 0
        x[np.flatnonzero(att), self.serving[att]] = 1
        return x

    @property
    def y(self) -> np.ndarray:
        y = np.zeros((self.n_users, self.n_users), dtype=np.int8)
        mem = self.head >= 0
        y[np.flatnonzero(mem), self.head[mem]] = 1
        return y

    @property
    def clusters(self) -> dict[int, list[int]]:
        """Head id -> sorted member ids."""
        out: dict[int, list[int]] = {}
        for i in np.flatnonzero(self.head >= 0):
            out.setdefault(int(self.head[i]), []).append(int(i))
        return dict(sorted(out.items()))

    @property
    def roles(self) -> np.ndarray:
        r = np.full(self.n_users, "N", dtype="<U1")
        r[self.head >= 0] = "M"
        heads = np.unique(self.head[self.head >= 0])
        r[heads] = "H"
        return r

    def cell(self) -> np.ndarray:
        """BS that carries each user's traffic (the head's BS for members)."""
        c = self.serving.copy()
        mem = self.head >= 0
        c[mem] = self.serving[self.head[mem]]
        return c

    @property
    def n_clusters(self) -> int:
        return len(np.unique(self.head[self.head >= 0]))

    def with_clusters(self, clusters: dict[int, Sequence[int]]) -> "AssociationState":
        """Attach each member to its head; members lose their direct attachment."""
        serving, head = self.serving.copy(), self.head.copy()
        for h, members in clusters.items():
            for m in members:
                serving[m] = -1
                head[m] = h
        return AssociationState(serving, head, self.n_bs)

    def unclustered(self, baseline_serving: np.ndarray) -> "AssociationState":
        return AssociationState(np.asarray(baseline_serving).copy(), np.full(self.n_users, -1), self.n_bs)

    @classmethod
    def from_xy(cls, x, y) -> "AssociationState":
        x, y = np.asarray(x), np.asarray(y)
        bad = validate(x, y)
        if bad:
            raise ValueError(f"invalid association: {bad}")
        serving = np.where(x.any(axis=1), x.argmax(axis=1), -1)
        head = np.where(y.any(axis=1), y.argmax(axis=1), -1)
        return cls(serving, head, x.shape[1])

    def validate(self) -> list[tuple]:
        return validate(self.x, self.y)


def rsrp(bss: Sequence[BaseStation], gain_db: np.ndarray, cre_bias: float = 0.0) -> np.ndarray:
    """(B, U) received reference power in dBm, small cells biased by ``cre_bias``."""
    p = np.array([b.max_tx_power + (cre_bias if b.kind == SMALL else 0.0) for b in bss])
    return p[:, None] + gain_db


def associate_rsrp(bss: Sequence[BaseStation], gain_db: np.ndarray, cre_bias: float = 0.0) -> AssociationState:
    """Attach every user to its strongest BS; argmax keeps the lowest id on ties."""
    r = rsrp(bss, gain_db, cre_bias)
    n_u = r.shape[1]
    serving = r.argmax(axis=0) if n_u else np.empty(0, dtype=int)
    return AssociationState(serving, np.full(n_u, -1), len(bss))


def validate(x, y) -> list[tuple]:
    """Violated constraints as ``(label, *indices)`` tuples; empty when valid.

    Labels: 7a binary entries, 7b at most one BS per user, 7c exactly one
    attachment, 7d someone is BS-attached, 7e heads are BS-attached, 7f no
    mutual membership, 7g no self-membership.
    """
    x, y = np.asarray(x), np.asarray(y)
    out: list[tuple] = []
    for name, m in (("x", x), ("y", y)):
        for idx in zip(*np.nonzero((m != 0) & (m != 1))):
            out.append(("7a", name, *map(int, idx)))
    xs = x.sum(axis=1)
    for i in np.flatnonzero(xs > 1):
        out.append(("7b", int(i)))
    total = xs + y.sum(axis=1)
    for i in np.flatnonzero(total != 1):
        out.append(("7c", int(i)))
    if len(x) and x.sum() < 1:
        out.append(("7d",))
    for j, i in zip(*np.nonzero(y)):
        if i != j and xs[i] < y[j, i]:
            out.append(("7e", int(j), int(i)))
    both = (y != 0) & (y.T != 0)
    for i, j in zip(*np.nonzero(np.triu(both, 1))):
        out.append(("7f", int(i), int(j)))
    for i in np.flatnonzero(np.diag(y) != 0):
        out.append(("7g", int(i)))
    return out


def write_association_csv(state: AssociationState, path) -> None:
    import csv

    roles = state.roles
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "serving_bs", "role", "cluster_id", "head_id"])
        cell = state.cell()
        for i in range(state.n_users):
            head = int(state.head[i]) if state.head[i] >= 0 else (i if roles[i] == "H" else -1)
            tag = head if head >= 0 else ""
            w.writerow([i, int(cell[i]), roles[i], tag, tag])
