import numpy as np
import pytest

from d2dclust import snapshot
from d2dclust.instances import random_instance
from d2dclust.snapshot import Snapshot, SnapshotError


def _snap(n=6, seed=0):
    bss, users, table, _ = random_instance(np.random.default_rng(seed), n, n_bs=4)
    return Snapshot(bss, users, table)


def test_round_trip_is_exact(tmp_path):
    s = _snap()
    p = tmp_path / "s.snap"
    snapshot.write(s, p)
    back = snapshot.read(p)
    assert back.bss == s.bss
    for f in ("x", "y", "heading", "speed", "rate_dl", "alpha"):
        assert np.array_equal(getattr(back.users, f), getattr(s.users, f))
    assert list(back.users.kind) == list(s.users.kind)
    for name in snapshot.MATRICES:
        assert np.array_equal(getattr(back.table, name), getattr(s.table, name))
    assert np.array_equal(back.table.serving, s.table.serving)
    assert snapshot.dumps(back) == snapshot.dumps(s)


def test_version_and_header_errors():
    text = snapshot.dumps(_snap())
    with pytest.raises(SnapshotError, match="version"):
        snapshot.loads(text.replace("d2dclust-snapshot 1", "d2dclust-snapshot 9", 1))
    with pytest.raises(SnapshotError, match="header"):
        snapshot.loads("hello\n" + text)
    with pytest.raises(SnapshotError, match="empty"):
        snapshot.loads("")


def test_nan_reports_location():
    lines = snapshot.dumps(_snap()).splitlines()
    i = next(n for n, l in enumerate(lines) if l.startswith("matrix phi_dl"))
    row = lines[i + 2].split()
    row[1] = "nan"
    lines[i + 2] = " ".join(row)
    with pytest.raises(SnapshotError, match=rf":{i + 3}: phi_dl\[1,1\]: NaN"):
        snapshot.loads("\n".join(lines), "s")


def test_truncation_and_shape():
    text = snapshot.dumps(_snap())
    with pytest.raises(SnapshotError):
        snapshot.loads(text[: len(text) // 2])
    with pytest.raises(SnapshotError, match="end"):
        snapshot.loads(text.replace("\nend\n", "\n"))
    lines = text.splitlines()
    i = next(n for n, l in enumerate(lines) if l.startswith("serving"))
    lines[i] = lines[i].rsplit(" ", 1)[0]
    with pytest.raises(SnapshotError, match="serving"):
        snapshot.loads("\n".join(lines))


def test_missing_file(tmp_path):
    with pytest.raises(SnapshotError):
        snapshot.read(tmp_path / "nope.snap")
